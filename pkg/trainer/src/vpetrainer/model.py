"""The prototyping variational autoencoder.

Encoder: four stride-2 kernel-4 padding-1 convolutions (3-32-64-128-256),
leaky-rectifier slope 0.2 after each, then 300-wide mean and log-variance
heads over the flattened 256x4x4 map. The decoder mirrors it with
transpose convolutions and a tanh output matching the [-1, 1] input range.
"""

from __future__ import annotations

import numpy as np
import torch
from torch import nn

LATENT_DIM = 300
FLAT_DIM = 256 * 4 * 4
LEAKY_SLOPE = 0.2


class PrototypingVAE(nn.Module):
    def __init__(self):
        super().__init__()
        act = nn.LeakyReLU(LEAKY_SLOPE)
        self.encoder = nn.Sequential(
            nn.Conv2d(3, 32, 4, stride=2, padding=1), act,
            nn.Conv2d(32, 64, 4, stride=2, padding=1), act,
            nn.Conv2d(64, 128, 4, stride=2, padding=1), act,
            nn.Conv2d(128, 256, 4, stride=2, padding=1), act,
        )
        self.mu_head = nn.Linear(FLAT_DIM, LATENT_DIM)
        self.logvar_head = nn.Linear(FLAT_DIM, LATENT_DIM)
        self.decoder_fc = nn.Linear(LATENT_DIM, FLAT_DIM)
        self.decoder = nn.Sequential(
            nn.ConvTranspose2d(256, 128, 4, stride=2, padding=1), act,
            nn.ConvTranspose2d(128, 64, 4, stride=2, padding=1), act,
            nn.ConvTranspose2d(64, 32, 4, stride=2, padding=1), act,
            nn.ConvTranspose2d(32, 3, 4, stride=2, padding=1), nn.Tanh(),
        )

    def encode(self, x: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        flat = self.encoder(x).flatten(1)
        return self.mu_head(flat), self.logvar_head(flat)

    def decode(self, z: torch.Tensor) -> torch.Tensor:
        return self.decoder(self.decoder_fc(z).view(-1, 256, 4, 4))

    def forward(self, x: torch.Tensor):
        mu, logvar = self.encode(x)
        std = torch.exp(0.5 * logvar)
        z = mu + std * torch.randn_like(std)
        return self.decode(z), mu, logvar


def vae_loss(recon: torch.Tensor, target: torch.Tensor, mu: torch.Tensor,
             logvar: torch.Tensor, kl_weight: float):
    """Reconstruction MSE plus weighted KL against the standard normal.
    With kl_weight 0 the total reduces exactly to the MSE term."""
    mse = torch.mean((recon - target) ** 2)
    kl = -0.5 * torch.mean(torch.sum(1 + logvar - mu.pow(2) - logvar.exp(), dim=1))
    return mse + kl_weight * kl, mse, kl


def normalize(patches: np.ndarray) -> torch.Tensor:
    """uint8 NxHxWx3 -> float32 Nx3xHxW in [-1, 1]."""
    tensor = torch.from_numpy(np.ascontiguousarray(patches)).float()
    tensor = (tensor / 255.0 - 0.5) / 0.5
    return tensor.permute(0, 3, 1, 2).contiguous()


@torch.no_grad()
def embed(model: PrototypingVAE, patches: np.ndarray) -> np.ndarray:
    """Latent means for a uint8 NxHxWx3 batch (inference path)."""
    model.eval()
    mu, _ = model.encode(normalize(patches))
    return mu.numpy()
