"""Training loop with unseen-class isolation and a recorded loss curve."""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field

import numpy as np
import torch

from .augment import Sample
from .model import PrototypingVAE, normalize, vae_loss


class TrainingDiverged(RuntimeError):
    def __init__(self, epoch: int, value: float):
        super().__init__(f"non-finite loss {value} at epoch {epoch}")
        self.epoch = epoch


@dataclass(frozen=True)
class RunConfig:
    epochs: int = 20
    batch_size: int = 64
    learning_rate: float = 1e-3
    kl_weight: float = 0.01
    seed: int = 0


@dataclass
class TrainingRun:
    class_ids: tuple[str, ...]
    unseen_class_ids: tuple[str, ...]
    config: RunConfig
    loss_curve: list[float] = field(default_factory=list)
    batch_class_audit: set[str] = field(default_factory=set)
    model: PrototypingVAE | None = None

    @property
    def audit_violations(self) -> set[str]:
        """Unseen classes that appeared in any training batch; must be empty."""
        return self.batch_class_audit & set(self.unseen_class_ids)


def _check_finite(value: float, epoch: int) -> None:
    if not math.isfinite(value):
        raise TrainingDiverged(epoch, value)


def train(
    samples: list[Sample],
    config: RunConfig = RunConfig(),
    unseen_class_ids: tuple[str, ...] = (),
) -> TrainingRun:
    """Minimize reconstruction MSE plus KL-weighted divergence over the
    given samples. Samples of unseen classes are excluded up front and the
    per-batch audit re-verifies the isolation."""
    torch.manual_seed(config.seed)
    rng = random.Random(config.seed)

    training = [s for s in samples if s.class_id not in set(unseen_class_ids)]
    if not training:
        raise ValueError("no training samples left after withholding unseen classes")

    patches = normalize(np.stack([s.patch for s in training]))
    targets = normalize(np.stack([s.prototype for s in training]))
    class_ids = [s.class_id for s in training]

    run = TrainingRun(
        class_ids=tuple(sorted({s.class_id for s in training})),
        unseen_class_ids=tuple(unseen_class_ids),
        config=config,
    )
    model = PrototypingVAE()
    optimizer = torch.optim.Adam(model.parameters(), lr=config.learning_rate)

    order = list(range(len(training)))
    for epoch in range(config.epochs):
        model.train()
        rng.shuffle(order)
        epoch_losses = []
        for start in range(0, len(order), config.batch_size):
            batch = order[start:start + config.batch_size]
            run.batch_class_audit.update(class_ids[i] for i in batch)
            x = patches[batch]
            y = targets[batch]
            optimizer.zero_grad()
            recon, mu, logvar = model(x)
            total, _mse, _kl = vae_loss(recon, y, mu, logvar, config.kl_weight)
            value = float(total.detach())
            _check_finite(value, epoch)
            total.backward()
            optimizer.step()
            epoch_losses.append(value)
        run.loss_curve.append(sum(epoch_losses) / len(epoch_losses))

    run.model = model
    return run
