"""Synthetic prototype renderer for training and evaluation classes.

Training classes mix plate shapes, colors, and glyphs; evaluation classes
are diamond/yellow plates distinguished only by their glyph and text, so
held-out evaluation exercises unseen classes that share coarse attributes.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np
from PIL import Image, ImageDraw

SIZE = 64

_PALETTE = {
    "white": (245, 245, 245),
    "red": (196, 30, 43),
    "blue": (30, 80, 180),
    "yellow": (250, 205, 45),
    "green": (20, 115, 60),
    "orange": (240, 130, 30),
    "black": (25, 25, 25),
}

_SHAPES = ("circle", "triangle", "rectangle", "octagon", "diamond")
_GLYPHS = ("bar", "cross", "arrow", "dot", "ring", "chevron", "ladder",
           "wave", "grid", "wedge")


@dataclass(frozen=True)
class PrototypeClass:
    class_id: str
    plate: str
    color: str
    glyph: str
    text: str


def _plate_points(shape: str) -> list[tuple[int, int]]:
    if shape == "triangle":
        return [(32, 4), (60, 58), (4, 58)]
    if shape == "rectangle":
        return [(8, 12), (56, 12), (56, 52), (8, 52)]
    if shape == "octagon":
        return [(20, 3), (44, 3), (61, 20), (61, 44), (44, 61), (20, 61), (3, 44), (3, 20)]
    if shape == "diamond":
        return [(32, 2), (62, 32), (32, 62), (2, 32)]
    return []


def _draw_glyph(draw: ImageDraw.ImageDraw, glyph: str, color):
    cx, cy = 32, 32
    if glyph == "bar":
        draw.rectangle([cx - 12, cy - 4, cx + 12, cy + 4], fill=color)
    elif glyph == "cross":
        draw.line([(cx - 10, cy - 10), (cx + 10, cy + 10)], fill=color, width=4)
        draw.line([(cx - 10, cy + 10), (cx + 10, cy - 10)], fill=color, width=4)
    elif glyph == "arrow":
        draw.line([(cx, cy + 10), (cx, cy - 8)], fill=color, width=4)
        draw.polygon([(cx, cy - 13), (cx - 6, cy - 4), (cx + 6, cy - 4)], fill=color)
    elif glyph == "dot":
        draw.ellipse([cx - 7, cy - 7, cx + 7, cy + 7], fill=color)
    elif glyph == "ring":
        draw.ellipse([cx - 10, cy - 10, cx + 10, cy + 10], outline=color, width=4)
    elif glyph == "chevron":
        draw.line([(cx - 10, cy + 6), (cx, cy - 6), (cx + 10, cy + 6)], fill=color, width=4)
    elif glyph == "ladder":
        for dy in (-8, 0, 8):
            draw.line([(cx - 9, cy + dy), (cx + 9, cy + dy)], fill=color, width=3)
    elif glyph == "wave":
        draw.arc([cx - 12, cy - 8, cx, cy + 8], 180, 360, fill=color, width=3)
        draw.arc([cx, cy - 8, cx + 12, cy + 8], 0, 180, fill=color, width=3)
    elif glyph == "grid":
        for d in (-6, 0, 6):
            draw.line([(cx + d, cy - 9), (cx + d, cy + 9)], fill=color, width=2)
            draw.line([(cx - 9, cy + d), (cx + 9, cy + d)], fill=color, width=2)
    elif glyph == "wedge":
        draw.polygon([(cx - 10, cy + 8), (cx + 10, cy + 8), (cx, cy - 10)], fill=color)


def render_prototype(cls: PrototypeClass) -> np.ndarray:
    """64x64 RGB uint8 prototype; a class-id hash strip keeps distinct
    classes pairwise distinct."""
    image = Image.new("RGB", (SIZE, SIZE), (215, 218, 222))
    draw = ImageDraw.Draw(image)
    bg = _PALETTE[cls.color]
    ink = _PALETTE["black"] if cls.color in ("white", "yellow", "orange") \
        else _PALETTE["white"]
    if cls.plate == "circle":
        draw.ellipse([4, 4, 59, 59], fill=bg, outline=ink, width=3)
    else:
        draw.polygon(_plate_points(cls.plate), fill=bg, outline=ink)
    _draw_glyph(draw, cls.glyph, ink)
    if cls.text:
        draw.text((20, 44), cls.text[:6], fill=ink)

    digest = hashlib.sha256(cls.class_id.encode()).digest()
    pixels = np.asarray(image, dtype=np.uint8).copy()
    strip = np.frombuffer((digest * 6)[: SIZE * 3], dtype=np.uint8)
    pixels[SIZE - 1, :, :] = strip.reshape(SIZE, 3)
    return pixels


def training_classes(count: int = 30) -> list[PrototypeClass]:
    """Vienna-style mix of shapes and colors; no diamond/yellow plates."""
    classes = []
    combos = [(shape, color)
              for shape in ("circle", "triangle", "rectangle", "octagon")
              for color in ("white", "red", "blue", "green", "orange")]
    for i in range(count):
        shape, color = combos[i % len(combos)]
        glyph = _GLYPHS[i % len(_GLYPHS)]
        classes.append(PrototypeClass(
            class_id=f"train-{i:03d}", plate=shape, color=color,
            glyph=glyph, text=f"T{i:02d}"))
    return classes


def unseen_classes(count: int = 10) -> list[PrototypeClass]:
    """Diamond/yellow classes unseen during training, distinguished by
    glyph and text."""
    return [PrototypeClass(
        class_id=f"unseen-{i:03d}", plate="diamond", color="yellow",
        glyph=_GLYPHS[i % len(_GLYPHS)], text=f"U{i:02d}")
        for i in range(count)]
