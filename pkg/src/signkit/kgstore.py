"""Road-sign knowledge graph: ingestion, validation, alignment, persistence.

The store is in-memory with file snapshots. Mutations (ingest, alignment)
need exclusive access; reads may run concurrently on a quiesced graph.

Sign document format: one JSON object per line (UTF-8), fields matching
SignPrototype field names, arrays for printed_shapes/icons/texts.

Snapshot format: magic ``RSKG``, version byte 0x01, a length-prefixed
section of canonical sign-document lines (id order), a length-prefixed
section of fact lines (sorted), then the trailer ``END0``.
"""

from __future__ import annotations

import json
import re
import shlex
import struct
from dataclasses import dataclass, field
from decimal import Decimal, InvalidOperation
from importlib import resources
from pathlib import Path
from types import MappingProxyType
from typing import IO, Iterable, Mapping

from . import rso
from .rso import (
    Convention,
    Fact,
    PropertyHierarchy,
    SignPrototype,
    TextEntry,
    UnknownValueError,
    Vocabulary,
)

PROV_INGESTED = "ingested"
PROV_DERIVED = "derived-by-rule"
PROV_MANUAL = "manual-alignment"

# Attribute keys shared with the query language.
ATTRIBUTE_KEYS = (
    "plate", "bg", "fg", "border", "printed", "icon",
    "text", "text_cat", "convention", "region", "category",
)

SNAPSHOT_MAGIC = b"RSKG"
SNAPSHOT_VERSION = 1
SNAPSHOT_TRAILER = b"END0"


class KnowledgeGraphError(Exception):
    pass


class DocumentError(KnowledgeGraphError):
    """A sign document record is invalid; ``reason`` is machine-checkable."""

    def __init__(self, reason: str):
        super().__init__(reason)
        self.reason = reason


class SnapshotError(KnowledgeGraphError):
    """Snapshot bytes are corrupt; carries the offending byte offset."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (byte {offset})")
        self.offset = offset


class RuleError(KnowledgeGraphError):
    pass


# ---------------------------------------------------------------------------
# Sign document (de)serialization


def sign_to_json(sign: SignPrototype) -> dict:
    """Canonical wire object: fixed field order, optionals omitted,
    sets sorted, plain texts as bare strings."""
    convention: str | dict = sign.convention.name
    if sign.convention.regional_variant is not None:
        convention = {"name": sign.convention.name,
                      "regional_variant": sign.convention.regional_variant}
    obj: dict = {
        "id": sign.id,
        "convention": convention,
        "region": sign.region,
        "plate_shape": sign.plate_shape,
        "background_color": sign.background_color,
    }
    if sign.foreground_color is not None:
        obj["foreground_color"] = sign.foreground_color
    if sign.border_color is not None:
        obj["border_color"] = sign.border_color
    if sign.printed_shapes:
        obj["printed_shapes"] = sorted(sign.printed_shapes)
    if sign.icons:
        obj["icons"] = sorted(sign.icons)
    if sign.texts:
        obj["texts"] = [t.to_wire() for t in sign.texts]
    if sign.variants:
        obj["variants"] = list(sign.variants)
    if sign.category is not None:
        obj["category"] = sign.category
    obj["prototype_image_color"] = sign.prototype_image_color
    if sign.prototype_image_gray is not None:
        obj["prototype_image_gray"] = sign.prototype_image_gray
    return obj


def sign_to_json_line(sign: SignPrototype) -> str:
    return json.dumps(sign_to_json(sign), ensure_ascii=False, separators=(",", ":"))


_SIGN_FIELDS = {
    "id", "convention", "region", "plate_shape", "background_color",
    "foreground_color", "border_color", "printed_shapes", "icons", "texts",
    "variants", "category", "prototype_image_color", "prototype_image_gray",
}


def _parse_color(registry, field_name: str, raw) -> str:
    return _parse_vocab(registry, "color", field_name, raw)


def _parse_vocab(registry, vocabulary: str, field_name: str, raw) -> str:
    if not isinstance(raw, str):
        raise DocumentError(f"bad-field: {field_name} must be a string")
    try:
        return registry[vocabulary].parse(raw)
    except UnknownValueError:
        raise DocumentError(
            f"unknown-value: {field_name} {raw!r} is not in the {vocabulary} vocabulary"
        ) from None


def sign_from_json(obj: dict, registry: Mapping[str, Vocabulary] | None = None) -> SignPrototype:
    """Validate and canonicalize one wire object into a SignPrototype."""
    registry = registry if registry is not None else rso.default_vocabularies()
    if not isinstance(obj, dict):
        raise DocumentError("bad-record: not an object")
    unknown = set(obj) - _SIGN_FIELDS
    if unknown:
        raise DocumentError(f"unknown-field: {sorted(unknown)}")
    for name in ("id", "convention", "region", "plate_shape",
                 "background_color", "prototype_image_color"):
        if name not in obj:
            raise DocumentError(f"missing-field: {name}")

    conv_raw = obj["convention"]
    if isinstance(conv_raw, str):
        conv_name, conv_variant = conv_raw, None
    elif isinstance(conv_raw, dict):
        conv_name = conv_raw.get("name", "")
        conv_variant = conv_raw.get("regional_variant")
    else:
        raise DocumentError("bad-field: convention must be a string or object")
    conv_name = _parse_vocab(registry, "convention", "convention", conv_name)

    texts: list[TextEntry] = []
    for i, raw_entry in enumerate(obj.get("texts", ())):
        try:
            entry = TextEntry.from_wire(raw_entry)
        except (ValueError, KeyError, TypeError) as exc:
            raise DocumentError(f"bad-field: texts[{i}]: {exc}") from None
        if entry.category is not None:
            entry = TextEntry(
                raw=entry.raw,
                category=_parse_vocab(registry, "text-category", f"texts[{i}].category",
                                      entry.category),
                numeric_value=entry.numeric_value,
                unit=entry.unit,
            )
        texts.append(entry)

    def _str_field(name: str, value) -> str:
        if not isinstance(value, str) or not value:
            raise DocumentError(f"bad-field: {name} must be a non-empty string")
        return value

    try:
        return SignPrototype(
            id=_str_field("id", obj["id"]),
            convention=Convention(conv_name, conv_variant),
            region=_str_field("region", obj["region"]),
            plate_shape=_parse_vocab(registry, "plate", "plate_shape", obj["plate_shape"]),
            background_color=_parse_color(registry, "background_color", obj["background_color"]),
            prototype_image_color=_str_field("prototype_image_color",
                                             obj["prototype_image_color"]),
            foreground_color=(None if obj.get("foreground_color") is None else
                              _parse_color(registry, "foreground_color",
                                           obj["foreground_color"])),
            border_color=(None if obj.get("border_color") is None else
                          _parse_color(registry, "border_color", obj["border_color"])),
            printed_shapes=frozenset(
                _parse_vocab(registry, "printed", "printed_shapes", s)
                for s in obj.get("printed_shapes", ())),
            icons=frozenset(
                _parse_vocab(registry, "icon", "icons", s) for s in obj.get("icons", ())),
            texts=tuple(texts),
            variants=tuple(_str_field("variants", v) for v in obj.get("variants", ())),
            category=(None if obj.get("category") is None else
                      _str_field("category", obj["category"])),
            prototype_image_gray=(None if obj.get("prototype_image_gray") is None else
                                  _str_field("prototype_image_gray",
                                             obj["prototype_image_gray"])),
        )
    except ValueError as exc:
        if isinstance(exc, DocumentError):
            raise
        raise DocumentError(f"bad-record: {exc}") from None


# ---------------------------------------------------------------------------
# The graph


class KnowledgeGraph:
    """Signs, facts with provenance, and per-attribute inverted indexes."""

    def __init__(self, registry: Mapping[str, Vocabulary] | None = None):
        self.registry = registry if registry is not None else rso.default_vocabularies()
        self._signs: dict[str, SignPrototype] = {}
        self._facts: dict[Fact, str] = {}
        self._by_subject: dict[str, list[Fact]] = {}
        self._index: dict[str, dict[str, set[str]]] = {k: {} for k in ATTRIBUTE_KEYS}
        self._properties: set[str] = set(rso.BASE_PROPERTIES)

    # -- read surface ------------------------------------------------------

    @property
    def signs(self) -> Mapping[str, SignPrototype]:
        return MappingProxyType(self._signs)

    @property
    def facts(self) -> Mapping[Fact, str]:
        """All facts mapped to their provenance tag."""
        return MappingProxyType(self._facts)

    @property
    def sign_ids(self) -> tuple[str, ...]:
        return tuple(sorted(self._signs))

    def __len__(self) -> int:
        return len(self._signs)

    def subject_facts(self, subject: str) -> tuple[Fact, ...]:
        return tuple(self._by_subject.get(subject, ()))

    def ids_with(self, key: str, value: str) -> frozenset[str]:
        """Inverted-index lookup: sign ids whose ``key`` attribute includes
        ``value`` (already case-folded)."""
        return frozenset(self._index[key].get(value, ()))

    def attribute_values(self, sign_id: str, key: str) -> frozenset[str]:
        """Comparable (case-folded) values of one attribute of one sign,
        including rule-derived categories."""
        sign = self._signs[sign_id]
        values = {v for k, v in _attribute_pairs(sign) if k == key}
        if key == "category":
            for fact in self._by_subject.get(sign_id, ()):
                if fact.predicate == rso.P_CATEGORY:
                    values.add(str(fact.object).casefold())
        return frozenset(values)

    # -- mutation ----------------------------------------------------------

    def register_property(self, name: str) -> None:
        self._properties.add(name)

    def add_sign(self, sign: SignPrototype, *, emit_facts: bool = True) -> None:
        if sign.id in self._signs:
            raise DocumentError("duplicate")
        self._signs[sign.id] = sign
        for key, value in _attribute_pairs(sign):
            self._index[key].setdefault(value, set()).add(sign.id)
        if emit_facts:
            for fact in rso.sign_to_facts(sign):
                self.add_fact(fact, PROV_INGESTED)

    def add_fact(self, fact: Fact, provenance: str) -> bool:
        """Insert a fact; returns False if it was already present (its
        original provenance is kept)."""
        if fact.predicate not in self._properties:
            raise KnowledgeGraphError(f"unknown property {fact.predicate!r}")
        if fact in self._facts:
            return False
        self._facts[fact] = provenance
        self._by_subject.setdefault(fact.subject, []).append(fact)
        if fact.predicate == rso.P_CATEGORY and fact.subject in self._signs:
            value = str(fact.object).casefold()
            self._index["category"].setdefault(value, set()).add(fact.subject)
        return True

    def same_content(self, other: "KnowledgeGraph") -> bool:
        return (self._signs == other._signs
                and self._facts == other._facts)


def _attribute_pairs(sign: SignPrototype):
    yield "plate", sign.plate_shape
    yield "bg", sign.background_color
    if sign.foreground_color is not None:
        yield "fg", sign.foreground_color
    if sign.border_color is not None:
        yield "border", sign.border_color
    for shape in sign.printed_shapes:
        yield "printed", shape
    for icon in sign.icons:
        yield "icon", icon
    for entry in sign.texts:
        yield "text", entry.raw.casefold()
        if entry.category is not None:
            yield "text_cat", entry.category
    yield "convention", sign.convention.name
    yield "region", sign.region.casefold()
    if sign.category is not None:
        yield "category", sign.category.casefold()


# ---------------------------------------------------------------------------
# Ingestion


def ingest_signs(
    kg: KnowledgeGraph, document: Iterable[str] | IO[str]
) -> tuple[int, list[tuple[int, str]]]:
    """Insert every valid line of a sign document; report invalid lines.

    A rejected record never mutates the graph. Returns (inserted count,
    [(line number, reason), ...]).
    """
    inserted = 0
    rejected: list[tuple[int, str]] = []
    for lineno, line in enumerate(document, start=1):
        line = line.strip()
        if not line:
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            rejected.append((lineno, f"invalid-json: {exc.msg}"))
            continue
        try:
            sign = sign_from_json(obj, kg.registry)
            kg.add_sign(sign)
        except DocumentError as exc:
            rejected.append((lineno, exc.reason))
            continue
        inserted += 1
    return inserted, rejected


# ---------------------------------------------------------------------------
# Crowdsourced submission screening


@dataclass(frozen=True)
class WorkerSubmission:
    """One worker's answers plus their answers for the embedded
    gold-standard sign."""

    worker_id: str
    answers: tuple[tuple[str, str, str], ...]  # (sign ref, attribute, raw value)
    gold_sign_ref: str
    gold_answers: Mapping[str, str]

    def __post_init__(self):
        if not self.gold_sign_ref:
            raise ValueError("submission must reference exactly one gold-standard sign")
        object.__setattr__(self, "answers", tuple(tuple(a) for a in self.answers))
        object.__setattr__(self, "gold_answers", dict(self.gold_answers))


@dataclass(frozen=True)
class ValidationResult:
    accepted: bool
    gold_passed: bool
    field_errors: tuple[tuple[str, str, str], ...]  # (attribute, raw value, reason)


# attribute name -> vocabulary used to screen the raw answer
_ANSWER_VOCABULARIES = {
    "plate_shape": "plate",
    "background_color": "color",
    "foreground_color": "color",
    "border_color": "color",
    "printed_shape": "printed",
    "icon": "icon",
    "text_category": "text-category",
    "convention": "convention",
}
_FREE_ANSWER_ATTRIBUTES = {"text", "variant", "unit", "region", "category"}


def validate_submission(
    sub: WorkerSubmission,
    gold: SignPrototype,
    registry: Mapping[str, Vocabulary] | None = None,
) -> ValidationResult:
    """Screen one submission: every answer must parse against its
    vocabulary, and the gold sign's plate shape and background color must
    match the ground truth."""
    registry = registry if registry is not None else rso.default_vocabularies()
    field_errors: list[tuple[str, str, str]] = []

    for _ref, attribute, raw in sub.answers:
        vocabulary = _ANSWER_VOCABULARIES.get(attribute)
        if vocabulary is None:
            if attribute not in _FREE_ANSWER_ATTRIBUTES:
                field_errors.append((attribute, raw, "unknown-attribute"))
            continue
        try:
            registry[vocabulary].parse(raw)
        except UnknownValueError:
            field_errors.append((attribute, raw, "unknown-value"))

    gold_passed = True
    for attribute, vocabulary, expected in (
        ("plate_shape", "plate", gold.plate_shape),
        ("background_color", "color", gold.background_color),
    ):
        raw = sub.gold_answers.get(attribute)
        if raw is None:
            field_errors.append((attribute, "", "gold-missing"))
            gold_passed = False
            continue
        try:
            value = registry[vocabulary].parse(raw)
        except UnknownValueError:
            field_errors.append((attribute, raw, "unknown-value"))
            gold_passed = False
            continue
        if value != expected:
            gold_passed = False

    accepted = gold_passed and not field_errors
    return ValidationResult(accepted, gold_passed, tuple(field_errors))


# ---------------------------------------------------------------------------
# Alignment rules


@dataclass(frozen=True)
class CategoryRule:
    plate_shape: str
    background_color: str
    category: str


_PLACEHOLDER_REGEX = {
    "{number}": r"(?P<number>-?\d+(?:\.\d+)?)",
    "{time-range}": (r"(?P<timerange>\d{1,2}:\d{2}\s*(?:AM|PM)?"
                     r"\s*(?:TO|-)\s*\d{1,2}:\d{2}\s*(?:AM|PM)?)"),
}


def _compile_pattern(pattern: str) -> re.Pattern:
    parts: list[str] = []
    i = 0
    while i < len(pattern):
        for placeholder, regex in _PLACEHOLDER_REGEX.items():
            if pattern.startswith(placeholder, i):
                parts.append(regex)
                i += len(placeholder)
                break
        else:
            if pattern[i] == "{":
                end = pattern.find("}", i)
                bad = pattern[i:end + 1] if end >= 0 else pattern[i:]
                raise RuleError(f"unknown placeholder {bad!r} in pattern {pattern!r}")
            parts.append(re.escape(pattern[i]))
            i += 1
    return re.compile("".join(parts), re.IGNORECASE)


@dataclass(frozen=True)
class TextRule:
    """Split a raw text into a stripped text, numeric value, unit, and
    text category. Placeholders: ``{number}``, ``{time-range}``."""

    pattern: str
    text_out: str | None = None
    value_out: str | None = None   # "{number}" or a decimal literal
    unit_out: str | None = None
    category_out: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "_regex", _compile_pattern(self.pattern))

    def apply(self, raw: str) -> dict | None:
        m = self._regex.fullmatch(raw)
        if m is None:
            return None
        captures = m.groupdict()

        def resolve(template: str | None) -> str | None:
            if template is None:
                return None
            if template == "{number}":
                return captures.get("number")
            if template == "{time-range}":
                return captures.get("timerange")
            return template

        value: Decimal | None = None
        resolved_value = resolve(self.value_out)
        if resolved_value is not None:
            value = Decimal(resolved_value)
        return {
            "text": resolve(self.text_out),
            "value": value,
            "unit": resolve(self.unit_out),
            "category": resolve(self.category_out),
        }


@dataclass(frozen=True)
class ManualLink:
    local_id: str
    kind: str  # equivalent-class | equivalent-feature
    external_id: str

    def __post_init__(self):
        if self.kind not in rso.LINK_KINDS:
            raise RuleError(f"unknown link kind {self.kind!r}")


@dataclass(frozen=True)
class AlignmentRuleSet:
    hierarchy: PropertyHierarchy = PropertyHierarchy()
    category_rules: tuple[CategoryRule, ...] = ()
    text_rules: tuple[TextRule, ...] = ()
    manual_links: tuple[ManualLink, ...] = ()


def parse_alignment_rules(
    text: str, registry: Mapping[str, Vocabulary] | None = None
) -> AlignmentRuleSet:
    """Parse the sectioned rules file: ``[hierarchy]`` (``child < parent``),
    ``[category]`` (``plate + color -> category``), ``[text]``
    (``PATTERN -> text=... value=... unit=... category=...``), and
    ``[manual]`` (``local-id link-kind external-id``)."""
    registry = registry if registry is not None else rso.default_vocabularies()
    edges: list[tuple[str, str]] = []
    category_rules: list[CategoryRule] = []
    text_rules: list[TextRule] = []
    manual_links: list[ManualLink] = []
    section: str | None = None

    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip().casefold()
            if section not in ("hierarchy", "category", "text", "manual"):
                raise RuleError(f"line {lineno}: unknown section [{section}]")
            continue
        if section is None:
            raise RuleError(f"line {lineno}: rule outside any section")

        if section == "hierarchy":
            if "<" not in line:
                raise RuleError(f"line {lineno}: expected 'child < parent'")
            child, _, parent = (part.strip() for part in line.partition("<"))
            if not child or not parent:
                raise RuleError(f"line {lineno}: expected 'child < parent'")
            edges.append((child, parent))
        elif section == "category":
            m = re.fullmatch(r"(.+?)\+(.+?)->(.+)", line)
            if m is None:
                raise RuleError(f"line {lineno}: expected 'plate + color -> category'")
            plate = registry["plate"].parse(m.group(1))
            color = registry["color"].parse(m.group(2))
            category_rules.append(CategoryRule(plate, color, m.group(3).strip()))
        elif section == "text":
            pattern, sep, rhs = line.partition("->")
            if not sep:
                raise RuleError(f"line {lineno}: expected 'PATTERN -> fields'")
            fields: dict[str, str] = {}
            try:
                tokens = shlex.split(rhs)
            except ValueError as exc:
                raise RuleError(f"line {lineno}: {exc}") from None
            for token in tokens:
                key, eq, value = token.partition("=")
                if not eq or key not in ("text", "value", "unit", "category"):
                    raise RuleError(f"line {lineno}: bad field {token!r}")
                fields[key] = value
            if "category" in fields:
                fields["category"] = registry["text-category"].parse(fields["category"])
            try:
                text_rules.append(TextRule(
                    pattern=pattern.strip(),
                    text_out=fields.get("text"),
                    value_out=fields.get("value"),
                    unit_out=fields.get("unit"),
                    category_out=fields.get("category"),
                ))
            except RuleError as exc:
                raise RuleError(f"line {lineno}: {exc}") from None
        elif section == "manual":
            parts = line.split()
            if len(parts) != 3:
                raise RuleError(f"line {lineno}: expected 'local-id link-kind external-id'")
            try:
                manual_links.append(ManualLink(parts[0], parts[1], parts[2]))
            except RuleError as exc:
                raise RuleError(f"line {lineno}: {exc}") from None

    return AlignmentRuleSet(
        hierarchy=PropertyHierarchy(frozenset(edges)),
        category_rules=tuple(category_rules),
        text_rules=tuple(text_rules),
        manual_links=tuple(manual_links),
    )


_DEFAULT_RULES: AlignmentRuleSet | None = None


def default_alignment_rules() -> AlignmentRuleSet:
    """The rule set shipped with the package (and in ``fixtures/``)."""
    global _DEFAULT_RULES
    if _DEFAULT_RULES is None:
        text = resources.files("signkit").joinpath("data/alignment_rules.txt").read_text("utf-8")
        _DEFAULT_RULES = parse_alignment_rules(text)
    return _DEFAULT_RULES


def apply_alignment(kg: KnowledgeGraph, rules: AlignmentRuleSet) -> int:
    """Derive facts: upward property-hierarchy closure, category rules,
    text splitting, and manual links. Monotone and idempotent; returns the
    number of facts added (0 on a repeat run)."""
    for prop in rules.hierarchy.properties:
        kg.register_property(prop)

    added = 0

    # Upward closure: every fact with a child property also holds for each
    # ancestor property.
    for fact in list(kg.facts):
        for parent in rules.hierarchy.ancestors(fact.predicate):
            added += kg.add_fact(Fact(fact.subject, parent, fact.object), PROV_DERIVED)

    # Category from the common attributes; first matching rule wins.
    for sign_id in kg.sign_ids:
        sign = kg.signs[sign_id]
        for rule in rules.category_rules:
            if (rule.plate_shape == sign.plate_shape
                    and rule.background_color == sign.background_color):
                added += kg.add_fact(Fact(sign_id, rso.P_CATEGORY, rule.category),
                                     PROV_DERIVED)
                break

    # Text splitting; first matching rule wins per text fact.
    for fact in [f for f in kg.facts if f.predicate == rso.P_TEXT]:
        raw = TextEntry.from_fact_object(str(fact.object)).raw
        for rule in rules.text_rules:
            derived = rule.apply(raw)
            if derived is None:
                continue
            subject = fact.subject
            if derived["text"] is not None:
                added += kg.add_fact(Fact(subject, rso.P_TEXT, derived["text"]), PROV_DERIVED)
            if derived["value"] is not None:
                added += kg.add_fact(Fact(subject, rso.P_NUMERIC_VALUE, derived["value"]),
                                     PROV_DERIVED)
            if derived["unit"] is not None:
                added += kg.add_fact(Fact(subject, rso.P_UNIT, derived["unit"]), PROV_DERIVED)
            if derived["category"] is not None:
                added += kg.add_fact(Fact(subject, rso.P_TEXT_CATEGORY, derived["category"]),
                                     PROV_DERIVED)
            break

    # Manual links; subjects that are not in this graph are skipped.
    for link in rules.manual_links:
        if link.local_id in kg.signs:
            added += kg.add_fact(Fact(link.local_id, link.kind, link.external_id),
                                 PROV_MANUAL)

    return added


# ---------------------------------------------------------------------------
# Domain sub-graphs


def domain_subgraph(kg: KnowledgeGraph, region: str) -> KnowledgeGraph:
    """A new graph holding exactly the signs of one region (case-folded
    match) and all their facts; the source graph is unchanged."""
    target = region.strip().casefold()
    sub = KnowledgeGraph(kg.registry)
    sub._properties = set(kg._properties)
    for sign_id in kg.sign_ids:
        sign = kg.signs[sign_id]
        if sign.region.casefold() == target:
            sub.add_sign(sign, emit_facts=False)
    for fact, provenance in kg.facts.items():
        if fact.subject in sub.signs:
            sub.add_fact(fact, provenance)
    return sub


# ---------------------------------------------------------------------------
# Snapshots


_FACT_TYPE_CODES = {"s": str, "n": Decimal}


def _fact_line(fact: Fact, provenance: str) -> str:
    code = "n" if isinstance(fact.object, Decimal) else "s"
    return json.dumps([provenance, fact.subject, fact.predicate, code, str(fact.object)],
                      ensure_ascii=False, separators=(",", ":"))


def snapshot_bytes(kg: KnowledgeGraph) -> bytes:
    """Byte-deterministic snapshot: signs in id order, facts sorted."""
    sign_section = "".join(
        sign_to_json_line(kg.signs[sign_id]) + "\n" for sign_id in kg.sign_ids
    ).encode("utf-8")
    fact_section = "".join(
        line + "\n" for line in sorted(_fact_line(f, p) for f, p in kg.facts.items())
    ).encode("utf-8")
    out = bytearray()
    out += SNAPSHOT_MAGIC
    out.append(SNAPSHOT_VERSION)
    out += struct.pack("<I", len(sign_section))
    out += sign_section
    out += struct.pack("<I", len(fact_section))
    out += fact_section
    out += SNAPSHOT_TRAILER
    return bytes(out)


def write_snapshot(kg: KnowledgeGraph, path: str | Path) -> None:
    Path(path).write_bytes(snapshot_bytes(kg))


def load_snapshot_bytes(
    data: bytes, registry: Mapping[str, Vocabulary] | None = None
) -> KnowledgeGraph:
    if len(data) < len(SNAPSHOT_MAGIC) + 1:
        raise SnapshotError("truncated header", len(data))
    if data[:4] != SNAPSHOT_MAGIC:
        raise SnapshotError(f"bad magic {data[:4]!r}", 0)
    if data[4] != SNAPSHOT_VERSION:
        raise SnapshotError(f"unsupported version {data[4]}", 4)

    offset = 5
    sections: list[bytes] = []
    for name in ("sign", "fact"):
        if offset + 4 > len(data):
            raise SnapshotError(f"truncated {name} section length", offset)
        (length,) = struct.unpack_from("<I", data, offset)
        offset += 4
        if offset + length > len(data):
            raise SnapshotError(f"truncated {name} section: need {length} bytes", offset)
        sections.append(data[offset:offset + length])
        offset += length
    if data[offset:] != SNAPSHOT_TRAILER:
        raise SnapshotError("bad or truncated trailer", offset)

    kg = KnowledgeGraph(registry)
    for lineno, line in enumerate(sections[0].decode("utf-8").splitlines(), start=1):
        try:
            kg.add_sign(sign_from_json(json.loads(line), kg.registry), emit_facts=False)
        except (json.JSONDecodeError, DocumentError) as exc:
            raise SnapshotError(f"corrupt sign record on line {lineno}: {exc}", offset) from None
    for lineno, line in enumerate(sections[1].decode("utf-8").splitlines(), start=1):
        try:
            provenance, subject, predicate, code, value = json.loads(line)
            obj = _FACT_TYPE_CODES[code](value)
        except (json.JSONDecodeError, ValueError, KeyError, InvalidOperation) as exc:
            raise SnapshotError(f"corrupt fact record on line {lineno}: {exc}", offset) from None
        kg.register_property(predicate)
        kg.add_fact(Fact(subject, predicate, obj), provenance)
    return kg


def load_snapshot(
    path: str | Path, registry: Mapping[str, Vocabulary] | None = None
) -> KnowledgeGraph:
    """Load a snapshot file; raises SnapshotError with a byte position on
    corruption or truncation."""
    return load_snapshot_bytes(Path(path).read_bytes(), registry)
