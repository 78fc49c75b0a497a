"""Trainer command line: synthesize datasets, train, export weights."""

from __future__ import annotations

import sys
from pathlib import Path

import click
import numpy as np
from PIL import Image

from . import augment, export, protos
from .train import RunConfig, TrainingDiverged, train


@click.group()
def main():
    """Prototyping-encoder training pipeline."""


def _write_manifest(path: Path, rows: list[tuple[str, str, str]]):
    path.write_text(
        "".join(f"{patch}\t{class_id}\t{proto}\n" for patch, class_id, proto in rows),
        encoding="utf-8")


def read_manifest(path: str | Path) -> list[tuple[str, str, str]]:
    """Lines of ``patch-path<TAB>class-id<TAB>prototype-path``; relative
    paths resolve against the manifest directory."""
    path = Path(path)
    rows = []
    for lineno, line in enumerate(path.read_text("utf-8").splitlines(), start=1):
        if not line.strip() or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 3:
            raise click.ClickException(f"{path}:{lineno}: expected 3 tab-separated fields")
        patch, class_id, proto = parts
        resolve = lambda p: p if Path(p).is_absolute() else str(path.parent / p)
        rows.append((resolve(patch), class_id, resolve(proto)))
    return rows


@main.command()
@click.option("--out", required=True, type=click.Path(file_okay=False))
@click.option("--classes", default=30, show_default=True)
@click.option("--unseen", default=10, show_default=True)
@click.option("--samples", default=150, show_default=True, help="Patches per class.")
@click.option("--seed", default=7, show_default=True)
def synth(out, classes, unseen, samples, seed):
    """Render prototypes, synthesize augmented patches, write manifests."""
    out = Path(out)
    (out / "prototypes").mkdir(parents=True, exist_ok=True)
    (out / "patches").mkdir(exist_ok=True)

    train_classes = protos.training_classes(classes)
    eval_classes = protos.unseen_classes(unseen)
    prototypes = {c.class_id: protos.render_prototype(c)
                  for c in train_classes + eval_classes}
    for class_id, pixels in prototypes.items():
        Image.fromarray(pixels, "RGB").save(out / "prototypes" / f"{class_id}.png")

    policy = augment.default_policy(seed)
    dataset = augment.synthesize_dataset(prototypes, policy, samples)
    rows_train, rows_eval = [], []
    unseen_ids = {c.class_id for c in eval_classes}
    counters: dict[str, int] = {}
    for sample in dataset:
        index = counters.get(sample.class_id, 0)
        counters[sample.class_id] = index + 1
        patch_name = f"patches/{sample.class_id}-{index:03d}.png"
        Image.fromarray(sample.patch, "RGB").save(out / patch_name)
        row = (patch_name, sample.class_id, f"prototypes/{sample.class_id}.png")
        (rows_eval if sample.class_id in unseen_ids else rows_train).append(row)

    _write_manifest(out / "train_manifest.tsv", rows_train)
    _write_manifest(out / "eval_manifest.tsv", rows_eval)
    click.echo(f"wrote {len(rows_train)} training and {len(rows_eval)} "
               f"evaluation samples under {out}")


@main.command(name="train")
@click.argument("manifest", type=click.Path(exists=True, dir_okay=False))
@click.option("--weights-out", required=True, type=click.Path(dir_okay=False))
@click.option("--goldens-out", required=True, type=click.Path(dir_okay=False))
@click.option("--golden-inputs", required=True, type=click.Path(file_okay=False))
@click.option("--epochs", default=20, show_default=True)
@click.option("--batch-size", default=64, show_default=True)
@click.option("--lr", default=1e-3, show_default=True)
@click.option("--kl-weight", default=0.01, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--holdout", default="", help="Comma-separated class ids to withhold.")
def train_command(manifest, weights_out, goldens_out, golden_inputs,
                  epochs, batch_size, lr, kl_weight, seed, holdout):
    """Train on a dataset manifest and export VPE1 weights plus goldens."""
    rows = read_manifest(manifest)
    prototypes: dict[str, np.ndarray] = {}
    samples = []
    for patch_path, class_id, proto_path in rows:
        if class_id not in prototypes:
            prototypes[class_id] = augment.load_prototype(proto_path)
        samples.append(augment.Sample(
            augment.load_prototype(patch_path), prototypes[class_id], class_id))

    unseen = tuple(c for c in holdout.split(",") if c)
    config = RunConfig(epochs=epochs, batch_size=batch_size, learning_rate=lr,
                       kl_weight=kl_weight, seed=seed)
    try:
        run = train(samples, config, unseen)
    except TrainingDiverged as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)
    if run.audit_violations:
        click.echo(f"error: unseen classes leaked into training: "
                   f"{sorted(run.audit_violations)}", err=True)
        sys.exit(1)

    deviation = export.export_weights(
        run.model, weights_out, goldens_out, golden_inputs)
    first, last = run.loss_curve[0], run.loss_curve[-1]
    click.echo(f"trained {len(run.class_ids)} classes over {epochs} epochs: "
               f"loss {first:.4f} -> {last:.4f}")
    click.echo(f"exported {weights_out} (self-reload deviation {deviation:.2e})")
    if last >= first:
        click.echo("warning: final loss did not improve on the initial loss", err=True)
        sys.exit(1)


if __name__ == "__main__":
    main()
