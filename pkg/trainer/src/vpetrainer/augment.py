"""Synthetic augmentation of prototype images into training patches.

Each sample is an augmented rendering of its class prototype paired with
the clean prototype as the reconstruction target. Every operation is
skipped at zero magnitude, so the identity policy reproduces prototypes
exactly; sampling is deterministic per (policy seed, class id, index).
"""

from __future__ import annotations

import hashlib
import random
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image, ImageFilter

SIZE = 64


class AugmentationError(ValueError):
    pass


@dataclass(frozen=True)
class AugmentationPolicy:
    """Magnitudes and ranges of the augmentation pipeline."""

    warp_magnitude: float = 0.0        # corner jitter as a fraction of size
    scale_range: tuple[float, float] = (1.0, 1.0)
    brightness_jitter: float = 0.0     # +/- fraction of full scale
    contrast_jitter: float = 0.0       # +/- relative contrast change
    noise_sigma: float = 0.0           # additive gaussian, 8-bit units
    blur_range: tuple[float, float] = (0.0, 0.0)
    background_composite: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.warp_magnitude < 0 or self.noise_sigma < 0:
            raise AugmentationError("magnitudes must be non-negative")
        for low, high, name in ((*self.scale_range, "scale_range"),
                                (*self.blur_range, "blur_range")):
            if low > high or low < 0:
                raise AugmentationError(f"degenerate {name}: ({low}, {high})")
        if self.brightness_jitter < 0 or self.contrast_jitter < 0:
            raise AugmentationError("jitter ranges must be non-negative")


def identity_policy(seed: int = 0) -> AugmentationPolicy:
    return AugmentationPolicy(seed=seed)


def default_policy(seed: int = 0) -> AugmentationPolicy:
    """Mild distortions: enough variation to learn invariance while
    keeping glyph identity readable."""
    return AugmentationPolicy(
        warp_magnitude=0.06,
        scale_range=(0.82, 1.12),
        brightness_jitter=0.12,
        contrast_jitter=0.15,
        noise_sigma=6.0,
        blur_range=(0.0, 0.9),
        background_composite=True,
        seed=seed,
    )


def _background_for(rng: random.Random, shape: tuple[int, int]) -> np.ndarray:
    npr = np.random.default_rng(rng.getrandbits(32))
    base = npr.integers(40, 200, size=3)
    noise = npr.normal(0.0, 18.0, size=(*shape, 3))
    return np.clip(base[None, None, :] + noise, 0, 255).astype(np.uint8)


def augment(pixels: np.ndarray, policy: AugmentationPolicy, rng: random.Random) -> np.ndarray:
    """One augmented patch from one prototype image (HxWx3 uint8)."""
    out = np.asarray(pixels, dtype=np.uint8)
    height, width = out.shape[:2]

    if policy.background_composite:
        corners = np.stack([out[0, 0], out[0, -1], out[-1, 0], out[-1, -1]])
        canvas = corners.astype(np.int16).mean(axis=0)
        mask = (np.abs(out.astype(np.int16) - canvas[None, None, :]).sum(axis=2) <= 24)
        background = _background_for(rng, (height, width))
        out = np.where(mask[:, :, None], background, out)

    image = Image.fromarray(out, "RGB")

    low, high = policy.scale_range
    if (low, high) != (1.0, 1.0):
        factor = rng.uniform(low, high)
        new_w = max(8, round(width * factor))
        new_h = max(8, round(height * factor))
        scaled = image.resize((new_w, new_h), Image.BILINEAR)
        canvas_img = Image.fromarray(_background_for(rng, (height, width)), "RGB")
        canvas_img.paste(scaled, ((width - new_w) // 2, (height - new_h) // 2))
        image = canvas_img

    if policy.warp_magnitude > 0:
        limit = policy.warp_magnitude * min(width, height)
        def corner(x, y):
            return (x + rng.uniform(-limit, limit), y + rng.uniform(-limit, limit))
        quad = (*corner(0, 0), *corner(0, height), *corner(width, height),
                *corner(width, 0))
        image = image.transform((width, height), Image.QUAD, quad, Image.BILINEAR)

    array = np.asarray(image, dtype=np.float64)

    if policy.contrast_jitter > 0:
        factor = 1.0 + rng.uniform(-policy.contrast_jitter, policy.contrast_jitter)
        array = (array - 127.5) * factor + 127.5
    if policy.brightness_jitter > 0:
        array = array + rng.uniform(-policy.brightness_jitter,
                                    policy.brightness_jitter) * 255.0

    blur_low, blur_high = policy.blur_range
    if blur_high > 0:
        radius = rng.uniform(blur_low, blur_high)
        if radius > 0.05:
            clipped = np.clip(array, 0, 255).astype(np.uint8)
            blurred = Image.fromarray(clipped, "RGB").filter(
                ImageFilter.GaussianBlur(radius))
            array = np.asarray(blurred, dtype=np.float64)

    if policy.noise_sigma > 0:
        npr = np.random.default_rng(rng.getrandbits(32))
        array = array + npr.normal(0.0, policy.noise_sigma, size=array.shape)

    return np.clip(array, 0, 255).astype(np.uint8)


@dataclass(frozen=True)
class Sample:
    patch: np.ndarray       # augmented rendering, uint8
    prototype: np.ndarray   # clean reconstruction target, uint8
    class_id: str


def load_prototype(path: str | Path) -> np.ndarray:
    try:
        with Image.open(path) as image:
            return np.asarray(image.convert("RGB"), dtype=np.uint8)
    except OSError as exc:
        raise AugmentationError(f"unreadable prototype image {path}: {exc}") from None


def synthesize_dataset(
    prototypes: dict[str, np.ndarray],
    policy: AugmentationPolicy,
    per_class: int,
) -> list[Sample]:
    """``per_class`` augmented patches for every class, deterministic for
    a given policy seed."""
    if len(prototypes) < 2:
        raise AugmentationError("need at least 2 classes")
    samples: list[Sample] = []
    for class_id in sorted(prototypes):
        clean = prototypes[class_id]
        for index in range(per_class):
            rng = random.Random(f"{policy.seed}:{class_id}:{index}")
            samples.append(Sample(augment(clean, policy, rng), clean, class_id))
    return samples


def dataset_digest(samples: list[Sample]) -> str:
    """Order-sensitive content hash, used to check seeded determinism."""
    digest = hashlib.sha256()
    for sample in samples:
        digest.update(sample.class_id.encode())
        digest.update(sample.patch.tobytes())
    return digest.hexdigest()
