"""Accuracy-trend acceptance: train synthetic, evaluate unseen classes.

Exact drive-data numbers are out of reach without the real patch corpora;
this asserts the direction: top-1 at pool size 10 >= 0.6, top-k
monotonicity per size, and size-10 accuracy >= size-30 accuracy for each
k. Evaluation goes through the inference component on the exported file.
"""

import random
import time

import pytest

from vpetrainer import augment, protos
from vpetrainer.export import export_weights
from vpetrainer.train import RunConfig, train

TRAIN_CLASSES = 30
UNSEEN_CLASSES = 10
SAMPLES_PER_CLASS = 150
EVAL_PER_CLASS = 15
SEED = 11
BUDGET_SECONDS = 1800.0


@pytest.fixture(scope="module")
def trained(tmp_path_factory):
    start = time.perf_counter()
    train_classes = protos.training_classes(TRAIN_CLASSES)
    eval_classes = protos.unseen_classes(UNSEEN_CLASSES)
    prototypes = {c.class_id: protos.render_prototype(c)
                  for c in train_classes + eval_classes}
    unseen_ids = tuple(c.class_id for c in eval_classes)

    dataset = augment.synthesize_dataset(
        prototypes, augment.default_policy(SEED), SAMPLES_PER_CLASS)
    run = train(dataset, RunConfig(epochs=20, batch_size=64, seed=SEED), unseen_ids)

    out = tmp_path_factory.mktemp("trend")
    export_weights(run.model, out / "trained.vpe1", out / "goldens.txt",
                   out / "inputs")
    elapsed = time.perf_counter() - start
    return {"run": run, "prototypes": prototypes, "unseen_ids": unseen_ids,
            "weights": out / "trained.vpe1", "train_seconds": elapsed}


def test_training_converged_and_isolated(trained):
    run = trained["run"]
    assert run.loss_curve[-1] < run.loss_curve[0]
    assert run.audit_violations == set()
    assert set(trained["unseen_ids"]).isdisjoint(run.class_ids)


def test_unseen_class_accuracy_trend(trained):
    from signkit import ranker

    start = time.perf_counter()
    model = ranker.load_weights(trained["weights"])
    prototypes = {cid: ranker.ImagePatch(pixels)
                  for cid, pixels in trained["prototypes"].items()}
    all_ids = sorted(prototypes)

    eval_samples = augment.synthesize_dataset(
        {cid: trained["prototypes"][cid] for cid in trained["unseen_ids"]},
        augment.default_policy(99), EVAL_PER_CLASS)

    cache = ranker.EmbeddingCache()
    matrix: dict[tuple[int, int], float] = {}
    for size in (10, 20, 30):
        items = []
        for index, sample in enumerate(eval_samples):
            distractors = [c for c in all_ids if c != sample.class_id]
            pool = random.Random(f"pool:{index}:{size}").sample(
                distractors, size - 1) + [sample.class_id]
            items.append((ranker.ImagePatch(sample.patch), sample.class_id, pool))
        result = ranker.top_k_accuracy(model, items, [1, 3, 5], prototypes, cache)
        assert result.rejected == ()
        for k in (1, 3, 5):
            matrix[(size, k)] = result.accuracies[k]

    for size in (10, 20, 30):
        row = [matrix[(size, k)] for k in (1, 3, 5)]
        assert row == sorted(row), f"top-k not monotone at size {size}: {row}"
    for k in (1, 3, 5):
        assert matrix[(10, k)] >= matrix[(30, k)], \
            f"size-10 accuracy below size-30 at k={k}"
    assert matrix[(10, 1)] >= 0.6

    total = trained["train_seconds"] + (time.perf_counter() - start)
    assert total < BUDGET_SECONDS
    rows = "; ".join(
        f"size {size}: " + "/".join(f"{matrix[(size, k)]:.3f}" for k in (1, 3, 5))
        for size in (10, 20, 30))
    print(f"PASS [accuracy trend] {rows} (top-1@10 >= 0.6, monotone, "
          f"10 >= 30 per k; reference 0.73/0.85/0.90 at 10) "
          f"({total:.0f}s < {BUDGET_SECONDS:.0f}s)")
