"""Model shapes, loss composition, and the training loop."""

import numpy as np
import pytest
import torch

from vpetrainer import augment, protos
from vpetrainer.model import PrototypingVAE, embed, normalize, vae_loss
from vpetrainer.train import RunConfig, TrainingDiverged, _check_finite, train


@pytest.fixture(scope="module")
def small_dataset():
    classes = protos.training_classes(5)
    prototypes = {c.class_id: protos.render_prototype(c) for c in classes}
    return augment.synthesize_dataset(prototypes, augment.default_policy(1), 20)


class TestModel:
    def test_shapes(self):
        model = PrototypingVAE()
        x = torch.zeros(2, 3, 64, 64)
        mu, logvar = model.encode(x)
        assert mu.shape == (2, 300) and logvar.shape == (2, 300)
        recon, _, _ = model(x)
        assert recon.shape == (2, 3, 64, 64)

    def test_decoder_output_in_tanh_range(self):
        model = PrototypingVAE()
        out = model.decode(torch.randn(3, 300))
        assert out.min() >= -1.0 and out.max() <= 1.0

    def test_zero_kl_weight_reduces_to_mse(self):
        recon = torch.rand(4, 3, 8, 8)
        target = torch.rand(4, 3, 8, 8)
        mu = torch.randn(4, 300)
        logvar = torch.randn(4, 300)
        total, mse, kl = vae_loss(recon, target, mu, logvar, kl_weight=0.0)
        assert torch.equal(total, mse)
        assert kl.item() != 0.0

    def test_normalize_range(self):
        batch = np.stack([np.zeros((64, 64, 3), np.uint8),
                          np.full((64, 64, 3), 255, np.uint8)])
        tensor = normalize(batch)
        assert tensor.shape == (2, 3, 64, 64)
        assert tensor.min().item() == -1.0 and tensor.max().item() == 1.0

    def test_embed_deterministic(self, small_dataset):
        model = PrototypingVAE()
        patch = small_dataset[0].patch[None]
        first = embed(model, patch)
        second = embed(model, patch)
        assert np.array_equal(first, second)


class TestTraining:
    def test_smoke_run_has_finite_decreasing_curve(self, small_dataset):
        run = train(small_dataset, RunConfig(epochs=3, batch_size=32, seed=2))
        assert len(run.loss_curve) == 3
        assert all(np.isfinite(v) for v in run.loss_curve)
        assert run.loss_curve[-1] < run.loss_curve[0]

    def test_unseen_classes_never_in_batches(self, small_dataset):
        unseen = ("train-000", "train-001")
        run = train(small_dataset, RunConfig(epochs=2, batch_size=16, seed=3), unseen)
        assert run.audit_violations == set()
        assert not (run.batch_class_audit & set(unseen))
        assert set(run.class_ids).isdisjoint(unseen)

    def test_all_classes_audited_without_holdout(self, small_dataset):
        run = train(small_dataset, RunConfig(epochs=1, batch_size=16, seed=4))
        assert run.batch_class_audit == {s.class_id for s in small_dataset}

    def test_divergence_aborts_with_epoch(self):
        with pytest.raises(TrainingDiverged) as excinfo:
            _check_finite(float("nan"), epoch=7)
        assert excinfo.value.epoch == 7
        with pytest.raises(TrainingDiverged):
            _check_finite(float("inf"), epoch=0)

    def test_withholding_everything_errors(self, small_dataset):
        every = tuple({s.class_id for s in small_dataset})
        with pytest.raises(ValueError, match="no training samples"):
            train(small_dataset, RunConfig(epochs=1), every)

    def test_training_is_seed_deterministic(self, small_dataset):
        first = train(small_dataset, RunConfig(epochs=1, batch_size=32, seed=9))
        second = train(small_dataset, RunConfig(epochs=1, batch_size=32, seed=9))
        assert first.loss_curve == second.loss_curve
