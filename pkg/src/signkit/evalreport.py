"""Rendering and harnesses for the evaluation reports.

Two reports: the search-space reduction distribution of a query workload,
and the ranker accuracy matrix over down-sampled candidate pools. Both can
render as a fixed-layout text table or as line-delimited JSON records, and
both print the published drive-data reference numbers alongside for
comparison (reference rows are never asserted, only displayed).
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

from . import ranker
from .query import HISTOGRAM_LABELS, SearchSpaceReport

# Published drive-data reference values, shown for side-by-side comparison.
REFERENCE_MEAN = 8.92
REFERENCE_STDEV = 7.36
REFERENCE_BUCKETS = (38, 16, 20, 12, 14)  # percent for 1-5 ... 21-25
REFERENCE_ACCURACY = {
    10: (0.73, 0.85, 0.90),
    20: (0.69, 0.80, 0.85),
    30: (0.60, 0.73, 0.80),
}
REFERENCE_KS = (1, 3, 5)


# ---------------------------------------------------------------------------
# Search-space report


def render_search_space_table(report: SearchSpaceReport, total_signs: int) -> str:
    """Fixed column layout; the per-query sizes line lets a reader re-derive
    every printed aggregate."""
    lines = [
        f"{'search space size':<20}{'percentage':>12}",
    ]
    n = len(report.per_query_sizes)
    for label, count in zip(HISTOGRAM_LABELS, report.histogram):
        lines.append(f"{label:<20}{100.0 * count / n:>11.1f}%")
    lines.append(f"{'mean':<20}{report.mean:>12.2f}")
    lines.append(f"{'stdev':<20}{report.stdev:>12.2f}")
    lines.append(f"{'reduction':<20}{report.reduction_percent:>11.2f}%")
    lines.append(f"total signs: {total_signs}, queries: {n}")
    lines.append("per-query sizes: " + " ".join(str(s) for s in report.per_query_sizes))
    lines.append("")
    ref_buckets = "/".join(str(b) for b in REFERENCE_BUCKETS)
    lines.append(
        f"reference (drive-data evaluation): mean {REFERENCE_MEAN}, "
        f"stdev {REFERENCE_STDEV}, buckets {ref_buckets}%"
    )
    return "\n".join(lines) + "\n"


def search_space_records(report: SearchSpaceReport, total_signs: int) -> str:
    """Line-delimited machine-readable form of the same report."""
    lines = []
    for i, size in enumerate(report.per_query_sizes):
        lines.append(json.dumps({"record": "query", "index": i, "size": size}))
    for label, count in zip(HISTOGRAM_LABELS, report.histogram):
        lines.append(json.dumps({"record": "bucket", "label": label, "count": count}))
    lines.append(json.dumps({
        "record": "summary", "mean": report.mean, "stdev": report.stdev,
        "reduction_percent": report.reduction_percent, "total_signs": total_signs,
        "queries": len(report.per_query_sizes),
    }))
    lines.append(json.dumps({
        "record": "reference", "mean": REFERENCE_MEAN, "stdev": REFERENCE_STDEV,
        "bucket_percentages": list(REFERENCE_BUCKETS),
    }))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Ranker evaluation


@dataclass(frozen=True)
class EvalItem:
    """One manifest row: a patch, its true sign, and a candidate pool that
    must contain the true sign."""

    patch_path: str
    true_id: str
    pool: tuple[str, ...]


class ManifestError(ValueError):
    pass


def load_manifest(path: str | Path) -> list[EvalItem]:
    """Manifest lines: {"patch": ..., "true_id": ..., "pool": [...]};
    relative patch paths resolve against the manifest's directory."""
    path = Path(path)
    items: list[EvalItem] = []
    for lineno, line in enumerate(path.read_text("utf-8").splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        try:
            obj = json.loads(line)
            patch_path = obj["patch"]
            if not Path(patch_path).is_absolute():
                patch_path = str(path.parent / patch_path)
            items.append(EvalItem(patch_path, obj["true_id"], tuple(obj["pool"])))
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise ManifestError(f"{path}:{lineno}: bad manifest line ({exc})") from None
    return items


def downsample_pool(item: EvalItem, size: int, seed: int, index: int) -> tuple[str, ...]:
    """Seeded draw of ``size`` candidates that always retains the true id."""
    if item.true_id not in item.pool:
        raise ManifestError(f"item {index}: true id {item.true_id!r} not in pool")
    distractors = sorted(set(item.pool) - {item.true_id})
    if len(distractors) < size - 1:
        raise ManifestError(
            f"item {index}: pool of {len(distractors) + 1} cannot fill size {size}")
    rng = random.Random(f"{seed}:{index}:{size}")
    chosen = rng.sample(distractors, size - 1)
    return tuple(sorted(chosen + [item.true_id]))


def evaluate_ranker(
    model: ranker.EncoderModel,
    items: Sequence[EvalItem],
    prototype_images: Mapping[str, ranker.ImagePatch],
    sizes: Sequence[int] = (10, 20, 30),
    ks: Sequence[int] = (1, 3, 5),
    seed: int = 0,
) -> tuple[dict[tuple[int, int], float], tuple[tuple[int, str], ...]]:
    """Accuracy per (pool size, k) over seeded down-sampled pools.

    Returns (matrix, rejected items). An item whose true id is missing from
    its pool is rejected once and skipped for every size.
    """
    cache = ranker.EmbeddingCache()
    matrix: dict[tuple[int, int], float] = {}
    rejected: tuple[tuple[int, str], ...] = ()
    for size in sizes:
        eval_items = []
        for index, item in enumerate(items):
            if item.true_id not in item.pool:
                continue
            pool = downsample_pool(item, size, seed, index)
            eval_items.append(
                (ranker.ImagePatch.from_png(item.patch_path), item.true_id, pool))
        result = ranker.top_k_accuracy(model, eval_items, ks, prototype_images, cache)
        for k in ks:
            matrix[(size, k)] = result.accuracies[k]
    bad = tuple(
        (index, f"true id {item.true_id!r} not in pool")
        for index, item in enumerate(items) if item.true_id not in item.pool)
    return matrix, bad


def render_ranker_matrix(
    matrix: Mapping[tuple[int, int], float],
    sizes: Sequence[int],
    ks: Sequence[int],
) -> str:
    header = f"{'search space':<14}" + "".join(f"{f'top-{k}':>8}" for k in ks)
    lines = [header]
    for size in sizes:
        row = f"{size:<14}" + "".join(f"{matrix[(size, k)]:>8.3f}" for k in ks)
        lines.append(row)
    lines.append("")
    lines.append("reference (drive-data evaluation):")
    lines.append(f"{'search space':<14}" + "".join(f"{f'top-{k}':>8}" for k in REFERENCE_KS))
    for size, row in REFERENCE_ACCURACY.items():
        lines.append(f"{size:<14}" + "".join(f"{v:>8.3f}" for v in row))
    return "\n".join(lines) + "\n"


def ranker_records(
    matrix: Mapping[tuple[int, int], float],
    sizes: Sequence[int],
    ks: Sequence[int],
) -> str:
    lines = []
    for size in sizes:
        for k in ks:
            lines.append(json.dumps(
                {"record": "accuracy", "size": size, "k": k, "value": matrix[(size, k)]}))
    for size, row in REFERENCE_ACCURACY.items():
        for k, value in zip(REFERENCE_KS, row):
            lines.append(json.dumps(
                {"record": "reference", "size": size, "k": k, "value": value}))
    return "\n".join(lines) + "\n"
