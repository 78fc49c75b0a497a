"""Augmentation policy and dataset synthesis."""

import numpy as np
import pytest

from vpetrainer import augment, protos
from vpetrainer.augment import (
    AugmentationError,
    AugmentationPolicy,
    dataset_digest,
    default_policy,
    identity_policy,
    load_prototype,
    synthesize_dataset,
)


@pytest.fixture(scope="module")
def prototypes():
    classes = protos.training_classes(5)
    return {c.class_id: protos.render_prototype(c) for c in classes}


class TestPolicy:
    def test_degenerate_ranges_rejected(self):
        with pytest.raises(AugmentationError):
            AugmentationPolicy(scale_range=(1.2, 0.8))
        with pytest.raises(AugmentationError):
            AugmentationPolicy(blur_range=(2.0, 1.0))
        with pytest.raises(AugmentationError):
            AugmentationPolicy(warp_magnitude=-0.1)
        with pytest.raises(AugmentationError):
            AugmentationPolicy(noise_sigma=-1)

    def test_defaults_valid(self):
        assert default_policy(3).seed == 3
        assert identity_policy().warp_magnitude == 0.0


class TestSynthesis:
    def test_sample_count_arithmetic(self):
        classes = protos.training_classes(20)
        prototypes = {c.class_id: protos.render_prototype(c) for c in classes}
        dataset = synthesize_dataset(prototypes, identity_policy(), 200)
        assert len(dataset) == 4000

    def test_identity_policy_reproduces_prototypes_exactly(self, prototypes):
        for sample in synthesize_dataset(prototypes, identity_policy(1), 3):
            assert np.array_equal(sample.patch, sample.prototype)
            assert np.array_equal(sample.prototype, prototypes[sample.class_id])

    def test_fixed_seed_gives_identical_hashes(self, prototypes):
        first = dataset_digest(synthesize_dataset(prototypes, default_policy(5), 4))
        second = dataset_digest(synthesize_dataset(prototypes, default_policy(5), 4))
        assert first == second

    def test_seed_changes_patches(self, prototypes):
        first = dataset_digest(synthesize_dataset(prototypes, default_policy(5), 4))
        second = dataset_digest(synthesize_dataset(prototypes, default_policy(6), 4))
        assert first != second

    def test_augmented_patches_differ_from_prototypes(self, prototypes):
        dataset = synthesize_dataset(prototypes, default_policy(5), 2)
        assert any(not np.array_equal(s.patch, s.prototype) for s in dataset)

    def test_needs_two_classes(self, prototypes):
        only = {next(iter(prototypes)): next(iter(prototypes.values()))}
        with pytest.raises(AugmentationError, match="2 classes"):
            synthesize_dataset(only, identity_policy(), 1)

    def test_unreadable_prototype(self, tmp_path):
        with pytest.raises(AugmentationError, match="unreadable"):
            load_prototype(tmp_path / "missing.png")
        bad = tmp_path / "bad.png"
        bad.write_bytes(b"not a png")
        with pytest.raises(AugmentationError, match="unreadable"):
            load_prototype(bad)


class TestPrototypeRendering:
    def test_distinct_classes_distinct_images(self):
        classes = protos.training_classes(30) + protos.unseen_classes(10)
        digests = {protos.render_prototype(c).tobytes() for c in classes}
        assert len(digests) == 40

    def test_unseen_classes_are_diamond_yellow(self):
        for c in protos.unseen_classes(10):
            assert c.plate == "diamond"
            assert c.color == "yellow"

    def test_training_classes_avoid_diamond_yellow(self):
        for c in protos.training_classes(30):
            assert not (c.plate == "diamond" and c.color == "yellow")
