#!/usr/bin/env python3
"""Generate the checked-in fixture weight file (fixtures/vpe_fixture.vpe1).

Seeded random weights with fan-in scaling so activations stay tame; one
decoder tensor is included to exercise the ignore-extras path of the loader.
"""

from pathlib import Path

import numpy as np

from signkit import ranker

SEED = 20260401
ROOT = Path(__file__).resolve().parent.parent


def build_tensors() -> dict[str, np.ndarray]:
    rng = np.random.default_rng(SEED)
    tensors: dict[str, np.ndarray] = {}
    for name, shape in ranker.REQUIRED_TENSORS.items():
        if name.endswith(".b"):
            tensors[name] = (rng.standard_normal(shape) * 0.05).astype(np.float32)
        else:
            fan_in = int(np.prod(shape[1:]))
            tensors[name] = (rng.standard_normal(shape)
                             * np.sqrt(2.0 / fan_in)).astype(np.float32)
    tensors["dec.fc.b"] = np.zeros(4096, dtype=np.float32)
    return tensors


def main():
    out = ROOT / "fixtures" / "vpe_fixture.vpe1"
    out.parent.mkdir(exist_ok=True)
    ranker.write_weights(out, build_tensors())
    print(f"wrote {out} ({out.stat().st_size} bytes)")


if __name__ == "__main__":
    main()
