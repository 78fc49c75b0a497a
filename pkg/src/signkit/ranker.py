"""Latent-space candidate ranking: weight loading, encoding, ranking.

Weight file schema (all integers little-endian)::

    magic   : byte[4] = "VPE1"
    version : uint8   = 0x01
    count   : uint32            number of tensors
    tensor  : count times
        name_len : uint16
        name     : byte[name_len]   UTF-8
        rank     : uint8
        dims     : uint32[rank]
        data     : float32[prod(dims)]   row-major
    crc     : uint32            CRC-32 (IEEE) over all preceding bytes

Required tensors are the four stride-2 convolutions (kernel 4, padding 1,
leaky-rectifier slope 0.2 after each), and the two affine heads over the
flattened 256x4x4 map. Only the mean head is evaluated at inference; extra
``dec.*`` tensors are permitted and ignored.

A loaded model is immutable and safe to share across threads; the optional
prototype-embedding cache fills idempotently under concurrency.
"""

from __future__ import annotations

import io
import struct
import threading
import zlib
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
from PIL import Image

MAGIC = b"VPE1"
VERSION = 1
LATENT_DIM = 300
INPUT_SIZE = 64
LEAKY_SLOPE = 0.2

REQUIRED_TENSORS: dict[str, tuple[int, ...]] = {
    "enc.conv1.w": (32, 3, 4, 4),
    "enc.conv1.b": (32,),
    "enc.conv2.w": (64, 32, 4, 4),
    "enc.conv2.b": (64,),
    "enc.conv3.w": (128, 64, 4, 4),
    "enc.conv3.b": (128,),
    "enc.conv4.w": (256, 128, 4, 4),
    "enc.conv4.b": (256,),
    "enc.mu.w": (300, 4096),
    "enc.mu.b": (300,),
    "enc.logvar.w": (300, 4096),
    "enc.logvar.b": (300,),
}


class WeightFormatError(Exception):
    """The weight file violates the format or shape contract."""


class PatchError(ValueError):
    """An image patch is unusable (zero area, wrong layout)."""


class RankingError(Exception):
    """Ranking inputs are inconsistent (e.g. missing prototype image)."""


@dataclass(frozen=True, eq=False)
class ImagePatch:
    """An RGB crop; arbitrary sizes are accepted and resized later."""

    pixels: np.ndarray  # H x W x 3 uint8
    bbox: tuple[float, float, float, float] | None = None  # source (x, y, w, h)

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.ndim != 3 or px.shape[2] != 3:
            raise PatchError(f"patch must be HxWx3, got shape {px.shape}")
        if px.shape[0] < 1 or px.shape[1] < 1:
            raise PatchError("zero-area patch")
        if px.dtype != np.uint8:
            raise PatchError(f"patch samples must be uint8, got {px.dtype}")
        object.__setattr__(self, "pixels", px)

    @classmethod
    def from_png(cls, source: str | Path | bytes,
                 bbox: tuple[float, float, float, float] | None = None) -> "ImagePatch":
        if isinstance(source, bytes):
            image = Image.open(io.BytesIO(source))
        else:
            image = Image.open(source)
        return cls(np.asarray(image.convert("RGB"), dtype=np.uint8), bbox)


@dataclass(frozen=True, eq=False)
class EncoderModel:
    """Validated weight tensors; forward passes are deterministic."""

    tensors: Mapping[str, np.ndarray]
    latent_dim: int = LATENT_DIM
    input_size: tuple[int, int, int] = (3, INPUT_SIZE, INPUT_SIZE)


# ---------------------------------------------------------------------------
# Weight file IO


def write_weights(path: str | Path, tensors: Mapping[str, np.ndarray]) -> None:
    """Serialize tensors in the file schema above (deterministic order:
    required tensors first, extras sorted)."""
    order = [n for n in REQUIRED_TENSORS if n in tensors]
    order += sorted(n for n in tensors if n not in REQUIRED_TENSORS)
    body = bytearray()
    body += MAGIC
    body.append(VERSION)
    body += struct.pack("<I", len(order))
    for name in order:
        data = np.ascontiguousarray(tensors[name], dtype="<f4")
        encoded = name.encode("utf-8")
        body += struct.pack("<H", len(encoded))
        body += encoded
        body += struct.pack("<B", data.ndim)
        body += struct.pack(f"<{data.ndim}I", *data.shape)
        body += data.tobytes()
    body += struct.pack("<I", zlib.crc32(bytes(body)) & 0xFFFFFFFF)
    Path(path).write_bytes(bytes(body))


def load_weights(path: str | Path) -> EncoderModel:
    """Parse and validate a weight file: magic, version, tensor table,
    shapes, and the trailing checksum; any mismatch rejects the file."""
    data = Path(path).read_bytes()
    if len(data) < len(MAGIC) + 1 + 4 + 4:
        raise WeightFormatError(f"file truncated: only {len(data)} bytes")
    if data[:4] != MAGIC:
        raise WeightFormatError(f"bad magic {data[:4]!r}")
    if data[4] != VERSION:
        raise WeightFormatError(f"unsupported version {data[4]}")

    (stored_crc,) = struct.unpack_from("<I", data, len(data) - 4)
    actual_crc = zlib.crc32(data[:-4]) & 0xFFFFFFFF
    if stored_crc != actual_crc:
        raise WeightFormatError(
            f"checksum failure: stored {stored_crc:#010x}, computed {actual_crc:#010x}"
        )

    offset = 5
    (count,) = struct.unpack_from("<I", data, offset)
    offset += 4
    payload_end = len(data) - 4
    tensors: dict[str, np.ndarray] = {}

    def need(n: int, what: str):
        if offset + n > payload_end:
            raise WeightFormatError(f"file truncated while reading {what} at byte {offset}")

    for i in range(count):
        need(2, "tensor name length")
        (name_len,) = struct.unpack_from("<H", data, offset)
        offset += 2
        need(name_len, "tensor name")
        name = data[offset:offset + name_len].decode("utf-8")
        offset += name_len
        need(1, f"rank of {name}")
        rank = data[offset]
        offset += 1
        need(4 * rank, f"dims of {name}")
        dims = struct.unpack_from(f"<{rank}I", data, offset)
        offset += 4 * rank
        size = int(np.prod(dims, dtype=np.int64)) if rank else 1
        need(4 * size, f"data of {name}")
        values = np.frombuffer(data, dtype="<f4", count=size, offset=offset).reshape(dims)
        offset += 4 * size
        if name in tensors:
            raise WeightFormatError(f"duplicate tensor {name!r}")
        tensors[name] = values
    if offset != payload_end:
        raise WeightFormatError(f"{payload_end - offset} unexpected trailing bytes")

    for name, shape in REQUIRED_TENSORS.items():
        if name not in tensors:
            raise WeightFormatError(f"missing tensor {name!r}")
        if tensors[name].shape != shape:
            raise WeightFormatError(
                f"tensor {name!r} has shape {tensors[name].shape}, expected {shape}"
            )
    unexpected = [n for n in tensors if n not in REQUIRED_TENSORS and not n.startswith("dec.")]
    if unexpected:
        raise WeightFormatError(f"unexpected tensors {unexpected}")

    kept = {name: tensors[name] for name in REQUIRED_TENSORS}
    return EncoderModel(tensors=kept)


# ---------------------------------------------------------------------------
# Preprocessing


def resize_bilinear(pixels: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Bilinear resampling with half-pixel centers and edge clamping;
    float64 output. The per-pixel arithmetic order is fixed so a scalar
    re-implementation reproduces it bitwise."""
    src = np.asarray(pixels, dtype=np.float64)
    in_h, in_w = src.shape[0], src.shape[1]

    def grid(n_out: int, n_in: int):
        centers = (np.arange(n_out, dtype=np.float64) + 0.5) * (n_in / n_out) - 0.5
        centers = np.clip(centers, 0.0, n_in - 1.0)
        low = np.floor(centers).astype(np.int64)
        high = np.minimum(low + 1, n_in - 1)
        frac = centers - low
        return low, high, frac

    y0, y1, fy = grid(out_h, in_h)
    x0, x1, fx = grid(out_w, in_w)

    p00 = src[y0][:, x0]
    p01 = src[y0][:, x1]
    p10 = src[y1][:, x0]
    p11 = src[y1][:, x1]
    fx = fx[None, :, None]
    fy = fy[:, None, None]
    return (1.0 - fy) * ((1.0 - fx) * p00 + fx * p01) + fy * ((1.0 - fx) * p10 + fx * p11)


def preprocess(patch: ImagePatch) -> np.ndarray:
    """Resize to 64x64 and map samples to [-1, 1]; returns a float32
    3x64x64 tensor in RGB channel order."""
    resized = resize_bilinear(patch.pixels, INPUT_SIZE, INPUT_SIZE)
    normalized = (resized / 255.0 - 0.5) / 0.5
    return normalized.transpose(2, 0, 1).astype(np.float32)


# ---------------------------------------------------------------------------
# Forward pass


def _conv2d_s2p1(x: np.ndarray, weight: np.ndarray, bias: np.ndarray) -> np.ndarray:
    """Stride-2, padding-1 convolution of a CxHxW map with kernel 4."""
    c_out, c_in, kh, kw = weight.shape
    padded = np.pad(x, ((0, 0), (1, 1), (1, 1)))
    windows = np.lib.stride_tricks.sliding_window_view(padded, (kh, kw), axis=(1, 2))
    windows = windows[:, ::2, ::2, :, :]
    _, out_h, out_w, _, _ = windows.shape
    cols = windows.transpose(1, 2, 0, 3, 4).reshape(out_h * out_w, c_in * kh * kw)
    out = cols @ weight.reshape(c_out, -1).T + bias
    return out.T.reshape(c_out, out_h, out_w)


def _leaky(x: np.ndarray) -> np.ndarray:
    return np.where(x > 0, x, LEAKY_SLOPE * x)


def encode(model: EncoderModel, x: np.ndarray) -> np.ndarray:
    """Deterministic forward pass of a normalized 3x64x64 tensor to the
    300-dim latent mean (the variance head is not evaluated)."""
    if x.shape != model.input_size:
        raise PatchError(f"input must be shaped {model.input_size}, got {x.shape}")
    t = model.tensors
    h = np.asarray(x, dtype=np.float64)
    for layer in ("conv1", "conv2", "conv3", "conv4"):
        h = _leaky(_conv2d_s2p1(
            h,
            t[f"enc.{layer}.w"].astype(np.float64),
            t[f"enc.{layer}.b"].astype(np.float64),
        ))
    flat = h.reshape(-1)
    mu = t["enc.mu.w"].astype(np.float64) @ flat + t["enc.mu.b"].astype(np.float64)
    return mu.astype(np.float32)


def embed_patch(model: EncoderModel, patch: ImagePatch) -> np.ndarray:
    return encode(model, preprocess(patch))


# ---------------------------------------------------------------------------
# Ranking


@dataclass(frozen=True)
class RankedCandidates:
    """Candidates ordered by ascending latent distance, ties broken by
    ascending sign id."""

    entries: tuple[tuple[str, float], ...]

    @property
    def sign_ids(self) -> tuple[str, ...]:
        return tuple(sign_id for sign_id, _ in self.entries)


class EmbeddingCache:
    """Keyed prototype embeddings; concurrent fills are idempotent."""

    def __init__(self):
        self._values: dict[str, np.ndarray] = {}
        self._lock = threading.Lock()

    def get_or_compute(self, key: str, compute) -> np.ndarray:
        with self._lock:
            cached = self._values.get(key)
        if cached is not None:
            return cached
        value = compute()
        with self._lock:
            return self._values.setdefault(key, value)


def rank(
    model: EncoderModel,
    patch: ImagePatch,
    candidate_ids: Sequence[str],
    prototype_images: Mapping[str, ImagePatch],
    k: int,
    cache: EmbeddingCache | None = None,
) -> RankedCandidates:
    """Embed the patch and every candidate prototype, order candidates by
    Euclidean distance in the latent space, and keep the first ``k``."""
    if k < 1:
        raise RankingError(f"k must be >= 1, got {k}")
    missing = [sid for sid in candidate_ids if sid not in prototype_images]
    if missing:
        raise RankingError(f"no prototype image for candidates: {sorted(missing)}")

    query_vec = embed_patch(model, patch)
    scored: list[tuple[float, str]] = []
    for sign_id in set(candidate_ids):
        if cache is not None:
            proto_vec = cache.get_or_compute(
                sign_id, lambda sid=sign_id: embed_patch(model, prototype_images[sid]))
        else:
            proto_vec = embed_patch(model, prototype_images[sign_id])
        distance = float(np.linalg.norm(query_vec.astype(np.float64)
                                        - proto_vec.astype(np.float64)))
        scored.append((distance, sign_id))
    scored.sort()
    return RankedCandidates(tuple((sid, dist) for dist, sid in scored[:k]))


@dataclass(frozen=True)
class AccuracyResult:
    accuracies: Mapping[int, float]
    rejected: tuple[tuple[int, str], ...]  # (item index, reason)


def top_k_accuracy(
    model: EncoderModel,
    eval_items: Iterable[tuple[ImagePatch, str, Sequence[str]]],
    k_values: Sequence[int],
    prototype_images: Mapping[str, ImagePatch],
    cache: EmbeddingCache | None = None,
) -> AccuracyResult:
    """Fraction of items whose true sign id appears within the first k
    ranked entries; items whose true id is missing from their candidate
    set are rejected and reported."""
    ranks: list[int] = []
    rejected: list[tuple[int, str]] = []
    max_k = max(k_values)
    for index, (patch, true_id, candidates) in enumerate(eval_items):
        if true_id not in candidates:
            rejected.append((index, f"true id {true_id!r} not in its candidate set"))
            continue
        ordered = rank(model, patch, candidates, prototype_images,
                       k=max(max_k, len(candidates)), cache=cache)
        ranks.append(ordered.sign_ids.index(true_id) + 1)
    total = len(ranks)
    accuracies = {
        k: (sum(1 for r in ranks if r <= k) / total if total else 0.0)
        for k in k_values
    }
    return AccuracyResult(accuracies, tuple(rejected))
