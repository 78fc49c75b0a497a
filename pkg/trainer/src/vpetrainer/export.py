"""Weight export in the VPE1 interchange format plus golden parity vectors.

This module carries its own encoder/decoder for the format (struct-based)
so the trainer stays independent of the inference-side implementation; the
two meet only at the file bytes.

Format (little-endian): magic ``VPE1``, version 0x01, u32 tensor count,
then per tensor u16 name length, UTF-8 name, u8 rank, u32 dims, float32
row-major data; trailing u32 CRC-32 (IEEE) over all preceding bytes.
"""

from __future__ import annotations

import hashlib
import struct
import zlib
from pathlib import Path

import numpy as np
import torch
from PIL import Image

from .model import PrototypingVAE, embed

MAGIC = b"VPE1"
VERSION = 1

# tensor name in the file -> parameter path in the module
ENCODER_TENSORS = {
    "enc.conv1.w": "encoder.0.weight",
    "enc.conv1.b": "encoder.0.bias",
    "enc.conv2.w": "encoder.2.weight",
    "enc.conv2.b": "encoder.2.bias",
    "enc.conv3.w": "encoder.4.weight",
    "enc.conv3.b": "encoder.4.bias",
    "enc.conv4.w": "encoder.6.weight",
    "enc.conv4.b": "encoder.6.bias",
    "enc.mu.w": "mu_head.weight",
    "enc.mu.b": "mu_head.bias",
    "enc.logvar.w": "logvar_head.weight",
    "enc.logvar.b": "logvar_head.bias",
}
DECODER_TENSORS = {
    "dec.fc.w": "decoder_fc.weight",
    "dec.fc.b": "decoder_fc.bias",
    "dec.deconv1.w": "decoder.0.weight",
    "dec.deconv1.b": "decoder.0.bias",
    "dec.deconv2.w": "decoder.2.weight",
    "dec.deconv2.b": "decoder.2.bias",
    "dec.deconv3.w": "decoder.4.weight",
    "dec.deconv3.b": "decoder.4.bias",
    "dec.deconv4.w": "decoder.6.weight",
    "dec.deconv4.b": "decoder.6.bias",
}


class ExportError(Exception):
    pass


def write_vpe1(path: str | Path, tensors: dict[str, np.ndarray]) -> None:
    body = bytearray()
    body += MAGIC
    body.append(VERSION)
    body += struct.pack("<I", len(tensors))
    for name, values in tensors.items():
        data = np.ascontiguousarray(values, dtype="<f4")
        encoded = name.encode("utf-8")
        body += struct.pack("<H", len(encoded))
        body += encoded
        body += struct.pack("<B", data.ndim)
        body += struct.pack(f"<{data.ndim}I", *data.shape)
        body += data.tobytes()
    body += struct.pack("<I", zlib.crc32(bytes(body)) & 0xFFFFFFFF)
    Path(path).write_bytes(bytes(body))


def read_vpe1(path: str | Path) -> dict[str, np.ndarray]:
    data = Path(path).read_bytes()
    if data[:4] != MAGIC or data[4] != VERSION:
        raise ExportError("bad magic or version")
    (crc,) = struct.unpack_from("<I", data, len(data) - 4)
    if crc != (zlib.crc32(data[:-4]) & 0xFFFFFFFF):
        raise ExportError("checksum mismatch")
    (count,) = struct.unpack_from("<I", data, 5)
    offset = 9
    tensors: dict[str, np.ndarray] = {}
    for _ in range(count):
        (name_len,) = struct.unpack_from("<H", data, offset)
        offset += 2
        name = data[offset:offset + name_len].decode("utf-8")
        offset += name_len
        rank = data[offset]
        offset += 1
        dims = struct.unpack_from(f"<{rank}I", data, offset)
        offset += 4 * rank
        size = int(np.prod(dims)) if rank else 1
        tensors[name] = np.frombuffer(
            data, dtype="<f4", count=size, offset=offset).reshape(dims)
        offset += 4 * size
    if offset != len(data) - 4:
        raise ExportError("trailing bytes before checksum")
    return tensors


def model_tensors(model: PrototypingVAE, include_decoder: bool = True) -> dict[str, np.ndarray]:
    state = model.state_dict()
    mapping = dict(ENCODER_TENSORS)
    if include_decoder:
        mapping.update(DECODER_TENSORS)
    return {name: state[param].detach().numpy() for name, param in mapping.items()}


def model_from_tensors(tensors: dict[str, np.ndarray]) -> PrototypingVAE:
    """Rebuild a module from file tensors (decoder tensors optional)."""
    model = PrototypingVAE()
    state = model.state_dict()
    mapping = {**ENCODER_TENSORS, **DECODER_TENSORS}
    for name, param in mapping.items():
        if name in tensors:
            state[param] = torch.from_numpy(np.array(tensors[name], dtype=np.float32))
    model.load_state_dict(state)
    model.eval()
    return model


def golden_inputs(count: int = 5, seed: int = 99, size: int = 64) -> dict[str, np.ndarray]:
    """Deterministic synthetic 64x64 patches used for parity checks."""
    rng = np.random.default_rng(seed)
    inputs: dict[str, np.ndarray] = {}
    for i in range(count):
        base = rng.integers(0, 256, size=(size, size, 3))
        ramp = (np.arange(size)[:, None, None] * (i + 2)) % 256
        inputs[f"golden-{i:02d}"] = ((base + ramp) % 256).astype(np.uint8)
    return inputs


def _pixel_sha256(pixels: np.ndarray) -> str:
    return hashlib.sha256(np.ascontiguousarray(pixels, np.uint8).tobytes()).hexdigest()


def export_weights(
    model: PrototypingVAE,
    weights_path: str | Path,
    goldens_path: str | Path,
    inputs_dir: str | Path,
    golden_count: int = 5,
    self_check_tolerance: float = 1e-6,
) -> float:
    """Write the weight file and the golden parity file, then reload the
    file and re-run the forward pass: returns the max golden deviation,
    which must stay within ``self_check_tolerance``."""
    weights_path = Path(weights_path)
    inputs_dir = Path(inputs_dir)
    inputs_dir.mkdir(parents=True, exist_ok=True)

    write_vpe1(weights_path, model_tensors(model))

    inputs = golden_inputs(golden_count)
    lines = []
    embeddings: dict[str, np.ndarray] = {}
    for name, pixels in inputs.items():
        Image.fromarray(pixels, "RGB").save(inputs_dir / f"{name}.png")
        vector = embed(model, pixels[None])[0]
        embeddings[name] = vector
        values = ",".join(f"{v:.9e}" for v in vector)
        lines.append(f"{name},{_pixel_sha256(pixels)},{values}")
    Path(goldens_path).write_text("\n".join(lines) + "\n", encoding="utf-8")

    reloaded = model_from_tensors(read_vpe1(weights_path))
    deviation = 0.0
    for name, pixels in inputs.items():
        again = embed(reloaded, pixels[None])[0]
        deviation = max(deviation, float(np.abs(again - embeddings[name]).max()))
    if deviation > self_check_tolerance:
        raise ExportError(
            f"self-reload deviation {deviation:.3e} exceeds {self_check_tolerance:.0e}")
    return deviation
