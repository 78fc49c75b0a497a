#!/usr/bin/env python3
"""Generate golden parity inputs and embeddings for the fixture weights.

The embeddings are computed with the scalar reference forward pass in
tests/oracles.py (independent of the production path) over the fixture
weight file read with the independent reader. Outputs:

    fixtures/patches/<name>.png        64x64 golden input patches
    fixtures/golden_embeddings.txt     lines: name,input-hash,300 values
"""

import math
import sys
from pathlib import Path

import numpy as np
from PIL import Image

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT / "tests"))

import oracles  # noqa: E402


def golden_patches() -> dict[str, np.ndarray]:
    size = 64
    flat = np.full((size, size, 3), 128, dtype=np.uint8)

    gradient = np.zeros((size, size, 3), dtype=np.uint8)
    for y in range(size):
        for x in range(size):
            gradient[y, x] = ((x * 4) % 256, (y * 4) % 256, ((x + y) * 2) % 256)

    rings = np.zeros((size, size, 3), dtype=np.uint8)
    for y in range(size):
        for x in range(size):
            d = math.hypot(x - 31.5, y - 31.5)
            v = int(127.5 + 127.5 * math.sin(d / 3.0))
            rings[y, x] = (v, 255 - v, (v * 2) % 256)

    return {"flat-gray": flat, "gradient": gradient, "rings": rings}


def main():
    weights = oracles.read_vpe1(ROOT / "fixtures" / "vpe_fixture.vpe1")
    patches_dir = ROOT / "fixtures" / "patches"
    patches_dir.mkdir(parents=True, exist_ok=True)

    lines = []
    for name, pixels in golden_patches().items():
        Image.fromarray(pixels, "RGB").save(patches_dir / f"{name}.png")
        embedding = oracles.scalar_forward(weights, oracles.scalar_preprocess(pixels))
        values = ",".join(f"{v:.9e}" for v in embedding)
        lines.append(f"{name},{oracles.pixel_sha256(pixels)},{values}")
        print(f"{name}: |embedding| = {np.linalg.norm(embedding):.3f}")

    out = ROOT / "fixtures" / "golden_embeddings.txt"
    out.write_text("\n".join(lines) + "\n", encoding="utf-8")
    print(f"wrote {out}")


if __name__ == "__main__":
    main()
