"""Seeded evaluation fixture: sign corpus, prototype images, query workload.

The generator stands in for the proprietary 845-template US corpus: it
honors the published joint-distribution targets (rectangle/white 42%,
diamond/yellow 14%), reserves exactly one octagon/red stop sign, and
spreads the remainder uniformly over the other shape/color pairs. The
workload generator samples 3-5-clause queries from real signs' attributes
and selects 50 of them so the bucket histogram follows the reference
distribution and the mean candidate-set size lands in the target window.
Everything is deterministic for a given seed.
"""

from __future__ import annotations

import hashlib
import random
from dataclasses import dataclass
from pathlib import Path

from PIL import Image, ImageDraw

from . import query as querylang
from . import rso
from .kgstore import KnowledgeGraph, sign_to_json_line
from .query import AttributeQuery, Clause, OP_CONTAINS, OP_EQUALS, evaluate

DEFAULT_SEED = 42
DEFAULT_TOTAL = 845
DEFAULT_TARGETS = (("rectangle", "white", 0.42), ("diamond", "yellow", 0.14))

# Workload calibration: reference bucket proportions and mean window.
BUCKET_PROPORTIONS = (0.38, 0.16, 0.20, 0.12, 0.14, 0.0)
MEAN_TARGET = 8.92
MEAN_TOLERANCE = 2.0


class FixtureError(ValueError):
    pass


@dataclass(frozen=True)
class FixtureSpec:
    """Knobs of the generated corpus; richness values are expected counts
    of printed shapes / icons / texts per sign (each capped at 2)."""

    total_signs: int = DEFAULT_TOTAL
    distribution: tuple[tuple[str, str, float], ...] = DEFAULT_TARGETS
    seed: int = DEFAULT_SEED
    printed_richness: float = 0.8
    icon_richness: float = 0.9
    text_richness: float = 0.9
    query_count: int = 50

    def __post_init__(self):
        if self.total_signs < 1:
            raise FixtureError("total_signs must be positive")
        if sum(p for _, _, p in self.distribution) > 1.0 + 1e-9:
            raise FixtureError("distribution proportions exceed 1")
        pairs = [(s, c) for s, c, _ in self.distribution]
        if len(set(pairs)) != len(pairs):
            raise FixtureError("duplicate shape/color pair in distribution")
        for richness in (self.printed_richness, self.icon_richness, self.text_richness):
            if not 0.0 <= richness <= 2.0:
                raise FixtureError("richness values must be within [0, 2]")


_TEXT_POOL: list[tuple[str, str | None]] = (
    [(f"SPEED LIMIT {s}", "speed") for s in (25, 35, 45, 55, 30, 40, 50, 65, 15, 20, 60, 70)]
    + [(t, None) for t in (
        "ONE WAY", "DO NOT ENTER", "WRONG WAY", "NO PARKING", "NO TURN ON RED",
        "KEEP RIGHT", "KEEP LEFT", "DETOUR", "ROAD WORK AHEAD", "END ROAD WORK",
        "LANE ENDS", "EXIT ONLY", "BIKE LANE", "BUS LANE", "NO TRUCKS",
        "WEIGH STATION", "REST AREA", "SCHOOL ZONE", "PED XING", "SLOW",
    )]
    + [(f"EXIT {n}", None) for n in range(1, 21)]
    + [(f"{name}", "name") for name in ("MAIN ST", "OAK AVE", "PARK RD", "RIVER DR", "HILL BLVD")]
    + [("8:30 AM TO 5:30 PM", "time")]
)


def _count_with_expectation(rng: random.Random, expected: float) -> int:
    """0, 1, or 2 with the requested expected value."""
    p2 = expected * expected / 4.0
    p1 = expected - 2.0 * p2
    r = rng.random()
    if r < p2:
        return 2
    if r < p2 + p1:
        return 1
    return 0


def _zipf_weights(n: int) -> list[float]:
    return [1.0 / rank for rank in range(1, n + 1)]


def generate_signs(spec: FixtureSpec) -> list[rso.SignPrototype]:
    """Deterministically build the sign corpus for ``spec``."""
    registry = rso.default_vocabularies()
    plates = registry["plate"].members
    colors = registry["color"].members
    printed = registry["printed"].members
    icons = registry["icon"].members

    targets = [(registry["plate"].parse(s), registry["color"].parse(c),
                round(p * spec.total_signs)) for s, c, p in spec.distribution]
    allocated = sum(n for _, _, n in targets)
    if allocated > spec.total_signs:
        raise FixtureError("rounded distribution targets exceed total_signs")
    remainder = spec.total_signs - allocated

    # (shape, color, text override) per slot, in generation order. When
    # there is any remainder the first slot is the reserved stop sign and
    # octagon/red is excluded from the uniform spread so the corpus has
    # exactly one octagon/red entry.
    slots: list[tuple[str, str, str | None]] = []
    if remainder > 0:
        slots.append(("octagon", "red", "STOP"))
        remainder -= 1
    for shape, color, count in targets:
        slots.extend((shape, color, None) for _ in range(count))
    if remainder > 0:
        taken = {(s, c) for s, c, _ in targets} | {("octagon", "red")}
        pairs = [(s, c) for s in plates for c in colors if (s, c) not in taken]
        base, extra = divmod(remainder, len(pairs))
        for i, (shape, color) in enumerate(pairs):
            slots.extend((shape, color, None) for _ in range(base + (1 if i < extra else 0)))

    rng = random.Random(spec.seed)
    text_weights = _zipf_weights(len(_TEXT_POOL))
    signs: list[rso.SignPrototype] = []
    for index, (shape, color, fixed_text) in enumerate(slots, start=1):
        sign_id = f"us-{index:04d}"
        fg = rng.choices([c for c in colors if c != color], k=1)[0] \
            if rng.random() < 0.55 else None
        border = rng.choices([c for c in colors if c != color], k=1)[0] \
            if rng.random() < 0.45 else None

        n_printed = _count_with_expectation(rng, spec.printed_richness)
        printed_shapes = frozenset(
            rng.choices(printed, weights=_zipf_weights(len(printed)), k=n_printed))
        n_icons = _count_with_expectation(rng, spec.icon_richness)
        icon_set = frozenset(
            rng.choices(icons, weights=_zipf_weights(len(icons)), k=n_icons))

        if fixed_text is not None:
            texts: tuple[rso.TextEntry, ...] = (rso.TextEntry(fixed_text),)
        else:
            n_texts = _count_with_expectation(rng, spec.text_richness)
            chosen: list[rso.TextEntry] = []
            for raw, category in rng.choices(_TEXT_POOL, weights=text_weights, k=n_texts):
                if not any(t.raw == raw for t in chosen):
                    chosen.append(rso.TextEntry(raw, category=category))
            texts = tuple(chosen)

        signs.append(rso.SignPrototype(
            id=sign_id,
            convention=rso.Convention("mutcd"),
            region="US",
            plate_shape=shape,
            background_color=color,
            prototype_image_color=f"prototypes/{sign_id}.png",
            foreground_color=fg,
            border_color=border,
            printed_shapes=printed_shapes,
            icons=icon_set,
            texts=texts,
        ))
    return signs


# ---------------------------------------------------------------------------
# Workload generation


def _optional_clauses(sign: rso.SignPrototype) -> list[Clause]:
    clauses: list[Clause] = []
    if sign.foreground_color is not None:
        clauses.append(Clause("fg", OP_EQUALS, sign.foreground_color))
    if sign.border_color is not None:
        clauses.append(Clause("border", OP_EQUALS, sign.border_color))
    for shape in sorted(sign.printed_shapes):
        clauses.append(Clause("printed", OP_EQUALS, shape))
    for icon in sorted(sign.icons):
        clauses.append(Clause("icon", OP_EQUALS, icon))
    for entry in sign.texts:
        clauses.append(Clause("text", OP_EQUALS, entry.raw.casefold()))
        first_word = entry.raw.split()[0]
        if len(first_word) >= 4:
            clauses.append(Clause("text", OP_CONTAINS, first_word.casefold()))
    return clauses


def generate_workload(
    spec: FixtureSpec, signs: list[rso.SignPrototype], trials: int = 4000
) -> list[AttributeQuery]:
    """Sample candidate queries from real signs and select ``query_count``
    of them: bucket quotas follow the reference histogram shape, then
    same-bucket swaps steer the mean into the target window."""
    kg = KnowledgeGraph()
    for sign in signs:
        kg.add_sign(sign, emit_facts=False)

    rng = random.Random(spec.seed + 1)
    candidates: list[tuple[str, int]] = []   # (canonical text, size)
    seen: set[str] = set()
    for _ in range(trials):
        sign = signs[rng.randrange(len(signs))]
        pool = _optional_clauses(sign)
        if not pool:
            continue
        n_optional = min(rng.randint(1, 3), len(pool))
        chosen = rng.sample(pool, n_optional)
        q = AttributeQuery((
            Clause("plate", OP_EQUALS, sign.plate_shape),
            Clause("bg", OP_EQUALS, sign.background_color),
            *chosen,
        ))
        text = q.to_text()
        if text in seen:
            continue
        seen.add(text)
        candidates.append((text, evaluate(q, kg).size))

    # Quotas per bucket via largest remainder.
    exact = [p * spec.query_count for p in BUCKET_PROPORTIONS]
    quotas = [int(e) for e in exact]
    for i in sorted(range(len(exact)), key=lambda i: exact[i] - quotas[i], reverse=True):
        if sum(quotas) >= spec.query_count:
            break
        quotas[i] += 1

    by_bucket: dict[int, list[tuple[str, int]]] = {i: [] for i in range(len(quotas))}
    for text, size in candidates:
        by_bucket[querylang.bucket_index(size)].append((text, size))

    selected: list[tuple[str, int]] = []
    leftovers: list[tuple[str, int]] = []
    for bucket, quota in enumerate(quotas):
        selected.extend(by_bucket[bucket][:quota])
        leftovers.extend(by_bucket[bucket][quota:])
    for text, size in leftovers:
        if len(selected) >= spec.query_count:
            break
        selected.append((text, size))
    if len(selected) < spec.query_count:
        raise FixtureError(
            f"could not assemble {spec.query_count} queries (got {len(selected)})")

    # Same-bucket swaps toward the target mean keep the histogram intact.
    unused = [item for item in candidates if item not in selected]
    low = MEAN_TARGET - MEAN_TOLERANCE
    high = MEAN_TARGET + MEAN_TOLERANCE

    def mean() -> float:
        return sum(size for _, size in selected) / len(selected)

    for _ in range(400):
        current = mean()
        if low <= current <= high:
            break
        best_swap = None
        best_gain = 0.0
        for i, (_, size) in enumerate(selected):
            bucket = querylang.bucket_index(size)
            for j, (_, alt_size) in enumerate(unused):
                if querylang.bucket_index(alt_size) != bucket:
                    continue
                gain = (size - alt_size) if current > high else (alt_size - size)
                if gain > best_gain:
                    best_gain = gain
                    best_swap = (i, j)
        if best_swap is None:
            break
        i, j = best_swap
        selected[i], unused[j] = unused[j], selected[i]

    final = mean()
    if not low <= final <= high:
        raise FixtureError(
            f"workload mean {final:.2f} outside [{low:.2f}, {high:.2f}]; "
            "adjust the fixture spec or seed")
    return [querylang.parse_query(text) for text, _ in selected]


# ---------------------------------------------------------------------------
# Prototype rendering


_COLOR_RGB = {
    "white": (245, 245, 245),
    "black": (25, 25, 25),
    "red": (196, 30, 43),
    "orange": (240, 130, 30),
    "yellow": (250, 205, 45),
    "green": (20, 115, 60),
    "blue": (30, 80, 180),
    "brown": (115, 78, 48),
    "purple": (115, 50, 140),
    "gray": (128, 128, 132),
    "fluorescent-yellow-green": (200, 250, 60),
}


def _plate_polygon(shape: str) -> list[tuple[int, int]]:
    if shape == "octagon":
        return [(20, 3), (44, 3), (61, 20), (61, 44), (44, 61), (20, 61), (3, 44), (3, 20)]
    if shape == "diamond":
        return [(32, 2), (62, 32), (32, 62), (2, 32)]
    if shape == "rectangle":
        return [(6, 14), (58, 14), (58, 50), (6, 50)]
    if shape == "square":
        return [(10, 10), (54, 10), (54, 54), (10, 54)]
    if shape == "triangle-up":
        return [(32, 5), (60, 57), (4, 57)]
    if shape == "triangle-down":
        return [(4, 7), (60, 7), (32, 59)]
    if shape == "pentagon":
        return [(32, 3), (61, 25), (50, 59), (14, 59), (3, 25)]
    if shape == "shield":
        return [(10, 6), (54, 6), (54, 30), (48, 46), (32, 58), (16, 46), (10, 30)]
    if shape == "pennant":
        return [(4, 12), (60, 32), (4, 52)]
    if shape == "cross":
        return [(24, 4), (40, 4), (40, 24), (60, 24), (60, 40), (40, 40),
                (40, 60), (24, 60), (24, 40), (4, 40), (4, 24), (24, 24)]
    return []  # circle handled separately


def _draw_printed_shape(draw: ImageDraw.ImageDraw, shape: str, color, offset: int):
    cx, cy = 32 + offset * 8, 30
    if shape == "arrow-left":
        draw.line([(cx + 8, cy), (cx - 8, cy)], fill=color, width=3)
        draw.polygon([(cx - 10, cy), (cx - 3, cy - 5), (cx - 3, cy + 5)], fill=color)
    elif shape == "arrow-right":
        draw.line([(cx - 8, cy), (cx + 8, cy)], fill=color, width=3)
        draw.polygon([(cx + 10, cy), (cx + 3, cy - 5), (cx + 3, cy + 5)], fill=color)
    elif shape == "arrow-up":
        draw.line([(cx, cy + 8), (cx, cy - 8)], fill=color, width=3)
        draw.polygon([(cx, cy - 10), (cx - 5, cy - 3), (cx + 5, cy - 3)], fill=color)
    elif shape == "arrow-down":
        draw.line([(cx, cy - 8), (cx, cy + 8)], fill=color, width=3)
        draw.polygon([(cx, cy + 10), (cx - 5, cy + 3), (cx + 5, cy + 3)], fill=color)
    elif shape == "arrow-curved":
        draw.arc([cx - 8, cy - 8, cx + 8, cy + 8], start=180, end=340, fill=color, width=3)
        draw.polygon([(cx + 9, cy - 4), (cx + 4, cy - 7), (cx + 9, cy - 10)], fill=color)
    elif shape == "circle":
        draw.ellipse([cx - 8, cy - 8, cx + 8, cy + 8], outline=color, width=3)
    elif shape == "diagonal-line":
        draw.line([(cx - 9, cy + 9), (cx + 9, cy - 9)], fill=color, width=3)
    elif shape == "bar":
        draw.rectangle([cx - 9, cy - 3, cx + 9, cy + 3], fill=color)
    elif shape == "cross":
        draw.line([(cx - 7, cy - 7), (cx + 7, cy + 7)], fill=color, width=3)
        draw.line([(cx - 7, cy + 7), (cx + 7, cy - 7)], fill=color, width=3)


def _draw_icon(draw: ImageDraw.ImageDraw, icon: str, color, offset: int):
    x, y = 18 + offset * 16, 40
    if icon == "animal":
        draw.ellipse([x, y, x + 10, y + 6], fill=color)
        draw.ellipse([x + 7, y - 4, x + 12, y + 1], fill=color)
    elif icon == "infrastructure":
        draw.rectangle([x, y - 4, x + 8, y + 6], outline=color, width=2)
    elif icon == "nature":
        draw.polygon([(x + 5, y - 5), (x + 10, y + 5), (x, y + 5)], fill=color)
    elif icon == "person":
        draw.ellipse([x + 3, y - 6, x + 7, y - 2], fill=color)
        draw.line([(x + 5, y - 2), (x + 5, y + 6)], fill=color, width=2)
    elif icon == "vehicle":
        draw.rectangle([x, y - 2, x + 10, y + 3], fill=color)
        draw.ellipse([x + 1, y + 3, x + 4, y + 6], fill=color)
        draw.ellipse([x + 6, y + 3, x + 9, y + 6], fill=color)
    else:  # other
        draw.ellipse([x + 3, y - 1, x + 8, y + 4], fill=color)


def render_prototype(sign: rso.SignPrototype, size: int = 64) -> Image.Image:
    """Deterministic synthetic prototype image. A hash strip derived from
    the sign id keeps images of distinct signs pairwise distinct."""
    image = Image.new("RGB", (size, size), (220, 222, 226))
    draw = ImageDraw.Draw(image)
    bg = _COLOR_RGB[sign.background_color]
    border = _COLOR_RGB[sign.border_color] if sign.border_color else (40, 40, 40)
    fg = _COLOR_RGB[sign.foreground_color] if sign.foreground_color else (30, 30, 30)

    if sign.plate_shape == "circle":
        draw.ellipse([4, 4, 59, 59], fill=bg, outline=border, width=3)
    else:
        draw.polygon(_plate_polygon(sign.plate_shape), fill=bg, outline=border)

    for i, printed in enumerate(sorted(sign.printed_shapes)[:2]):
        _draw_printed_shape(draw, printed, fg, i - 1)
    for i, icon in enumerate(sorted(sign.icons)[:2]):
        _draw_icon(draw, icon, fg, i)
    if sign.texts:
        draw.text((14, 16), sign.texts[0].raw[:9], fill=fg)

    digest = hashlib.sha256(sign.id.encode("utf-8")).digest()
    strip = [digest[i % len(digest)] for i in range(size * 3)]
    for x in range(size):
        image.putpixel((x, size - 1),
                       (strip[x * 3], strip[x * 3 + 1], strip[x * 3 + 2]))
    return image


# ---------------------------------------------------------------------------
# Top-level generation


def gen_fixture(
    spec: FixtureSpec, out_dir: str | Path, render_images: bool = True
) -> tuple[list[rso.SignPrototype], list[AttributeQuery]]:
    """Write ``signs.jsonl``, ``workload.txt``, and (optionally) the
    prototype images under ``out_dir``. Byte-identical for a given spec."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    signs = generate_signs(spec)

    doc = "".join(sign_to_json_line(sign) + "\n" for sign in signs)
    (out / "signs.jsonl").write_text(doc, encoding="utf-8")

    queries: list[AttributeQuery] = []
    if spec.query_count > 0:
        queries = generate_workload(spec, signs)
        workload = "".join(q.to_text() + "\n" for q in queries)
        (out / "workload.txt").write_text(workload, encoding="utf-8")

    if render_images:
        proto_dir = out / "prototypes"
        proto_dir.mkdir(exist_ok=True)
        for sign in signs:
            render_prototype(sign).save(out / sign.prototype_image_color)

    return signs, queries
