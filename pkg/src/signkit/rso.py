"""Road-sign domain types and controlled vocabularies.

Closed vocabularies (plate shapes, printed shapes, colors, icon categories,
text categories, conventions) are loaded from a schema file; the default
schema ships with the package and as ``fixtures/vocabularies.txt``. All types
in this module are immutable values, safe to share across threads.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from decimal import Decimal, InvalidOperation
from importlib import resources
from typing import Iterable


class VocabularyError(ValueError):
    """Malformed vocabulary schema or misuse of a vocabulary."""


class UnknownValueError(VocabularyError):
    """A raw value is not a member of the vocabulary it was parsed against."""

    def __init__(self, vocabulary: str, value: str):
        super().__init__(f"unknown value for vocabulary {vocabulary!r}: {value!r}")
        self.vocabulary = vocabulary
        self.value = value


class FactError(ValueError):
    """A fact list cannot be interpreted as a sign."""


# Vocabulary names and their fixed cardinalities. Substituted schema files
# may change the members but not the counts.
VOCABULARY_SIZES = {
    "plate": 11,
    "printed": 9,
    "color": 11,
    "icon": 6,
    "text-category": 6,
    "convention": 3,
}


@dataclass(frozen=True)
class Vocabulary:
    """A closed, ordered enumeration of canonical member names."""

    name: str
    members: tuple[str, ...]

    def __post_init__(self):
        canonical = tuple(m.strip().casefold() for m in self.members)
        if len(set(canonical)) != len(canonical):
            raise VocabularyError(f"duplicate members in vocabulary {self.name!r}")
        if any(not m for m in canonical):
            raise VocabularyError(f"empty member in vocabulary {self.name!r}")
        object.__setattr__(self, "members", canonical)

    def __contains__(self, raw: str) -> bool:
        return raw.strip().casefold() in self.members

    def __len__(self) -> int:
        return len(self.members)

    def parse(self, raw: str) -> str:
        """Return the canonical member for ``raw`` (case-folded, trimmed)."""
        value = raw.strip().casefold()
        if value not in self.members:
            raise UnknownValueError(self.name, raw)
        return value


def load_vocabularies(text: str) -> dict[str, Vocabulary]:
    """Parse a vocabulary schema file into a registry.

    Format: ``[vocabulary-name]`` headers with one member per line; blank
    lines and ``#`` comments ignored. Every vocabulary listed in
    VOCABULARY_SIZES must be present with exactly its declared cardinality.
    """
    sections: dict[str, list[str]] = {}
    current: list[str] | None = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            name = line[1:-1].strip().casefold()
            if name in sections:
                raise VocabularyError(f"line {lineno}: duplicate section {name!r}")
            current = sections.setdefault(name, [])
            continue
        if current is None:
            raise VocabularyError(f"line {lineno}: member outside any [section]")
        current.append(line)

    registry: dict[str, Vocabulary] = {}
    for name, size in VOCABULARY_SIZES.items():
        if name not in sections:
            raise VocabularyError(f"missing vocabulary section [{name}]")
        vocab = Vocabulary(name, tuple(sections[name]))
        if len(vocab) != size:
            raise VocabularyError(
                f"vocabulary {name!r} must have {size} members, got {len(vocab)}"
            )
        registry[name] = vocab
    unknown = set(sections) - set(VOCABULARY_SIZES)
    if unknown:
        raise VocabularyError(f"unknown vocabulary sections: {sorted(unknown)}")
    return registry


_DEFAULT_REGISTRY: dict[str, Vocabulary] | None = None


def default_vocabularies() -> dict[str, Vocabulary]:
    """The registry loaded from the schema file shipped with the package."""
    global _DEFAULT_REGISTRY
    if _DEFAULT_REGISTRY is None:
        text = resources.files("signkit").joinpath("data/vocabularies.txt").read_text("utf-8")
        _DEFAULT_REGISTRY = load_vocabularies(text)
    return _DEFAULT_REGISTRY


def parse_vocabulary_value(
    vocabulary: str, raw: str, registry: dict[str, Vocabulary] | None = None
) -> str:
    """Parse ``raw`` against a registered vocabulary; total over members."""
    registry = registry if registry is not None else default_vocabularies()
    try:
        vocab = registry[vocabulary]
    except KeyError:
        raise VocabularyError(f"no vocabulary registered under {vocabulary!r}") from None
    return vocab.parse(raw)


CONVENTION_NAMES = ("vienna", "mutcd", "sadc")


@dataclass(frozen=True)
class Convention:
    """A regional road-sign standard, optionally narrowed to a variant
    such as a US state code for state-specific MUTCD."""

    name: str
    regional_variant: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "name", self.name.strip().casefold())
        if self.name not in CONVENTION_NAMES:
            raise UnknownValueError("convention", self.name)


@dataclass(frozen=True)
class TextEntry:
    """One piece of printed text on a sign, optionally categorized and
    split into a numeric value with a unit."""

    raw: str
    category: str | None = None
    numeric_value: Decimal | None = None
    unit: str | None = None

    def __post_init__(self):
        if not self.raw:
            raise ValueError("text entry raw string must be non-empty")
        if self.numeric_value is not None:
            if not isinstance(self.numeric_value, Decimal):
                object.__setattr__(self, "numeric_value", Decimal(str(self.numeric_value)))
            if str(self.numeric_value) not in self.raw:
                raise ValueError(
                    f"numeric value {self.numeric_value} does not appear in {self.raw!r}"
                )

    @property
    def is_plain(self) -> bool:
        return self.category is None and self.numeric_value is None and self.unit is None

    def to_wire(self) -> str | dict:
        """Wire form: a bare string for plain entries, an object otherwise."""
        if self.is_plain:
            return self.raw
        obj: dict = {"raw": self.raw}
        if self.category is not None:
            obj["category"] = self.category
        if self.numeric_value is not None:
            obj["numeric_value"] = str(self.numeric_value)
        if self.unit is not None:
            obj["unit"] = self.unit
        return obj

    @classmethod
    def from_wire(cls, value: str | dict) -> "TextEntry":
        if isinstance(value, str):
            return cls(raw=value)
        if not isinstance(value, dict):
            raise ValueError(f"text entry must be a string or object, got {type(value).__name__}")
        numeric = value.get("numeric_value")
        if numeric is not None:
            try:
                numeric = Decimal(str(numeric))
            except InvalidOperation:
                raise ValueError(f"bad numeric_value {numeric!r}") from None
        return cls(
            raw=value["raw"],
            category=value.get("category"),
            numeric_value=numeric,
            unit=value.get("unit"),
        )

    def to_fact_object(self) -> str:
        """Render for use as a fact object. Plain entries stay bare strings;
        structured entries (or raws that would be mistaken for objects) are
        JSON-encoded so the round trip is unambiguous."""
        if self.is_plain and not self.raw.startswith("{"):
            return self.raw
        return json.dumps(self.to_wire() if not self.is_plain else {"raw": self.raw},
                          sort_keys=True, separators=(",", ":"), ensure_ascii=False)

    @classmethod
    def from_fact_object(cls, obj: str) -> "TextEntry":
        if obj.startswith("{"):
            return cls.from_wire(json.loads(obj))
        return cls(raw=obj)


@dataclass(frozen=True)
class SignPrototype:
    """One canonical road sign: its plate, colors, printed content, texts,
    convention/region, and prototype image references."""

    id: str
    convention: Convention
    region: str
    plate_shape: str
    background_color: str
    prototype_image_color: str
    foreground_color: str | None = None
    border_color: str | None = None
    printed_shapes: frozenset[str] = frozenset()
    icons: frozenset[str] = frozenset()
    texts: tuple[TextEntry, ...] = ()
    variants: tuple[str, ...] = ()
    category: str | None = None
    prototype_image_gray: str | None = None

    def __post_init__(self):
        if not self.id:
            raise ValueError("sign id must be non-empty")
        if not self.plate_shape or not self.background_color:
            raise ValueError(f"sign {self.id}: plate shape and background color are mandatory")
        if not self.prototype_image_color:
            raise ValueError(f"sign {self.id}: color prototype image reference is mandatory")
        object.__setattr__(self, "printed_shapes", frozenset(self.printed_shapes))
        object.__setattr__(self, "icons", frozenset(self.icons))
        object.__setattr__(self, "texts", tuple(self.texts))
        object.__setattr__(self, "variants", tuple(self.variants))


@dataclass(frozen=True)
class Fact:
    """A (subject, predicate, object) triple; objects are entity ids,
    literal strings, or literal numbers."""

    subject: str
    predicate: str
    object: str | Decimal

    def render_object(self) -> str:
        return str(self.object)


# Property identifiers emitted and consumed by this package.
P_CONVENTION = "has-convention"
P_CONVENTION_VARIANT = "has-convention-variant"
P_REGION = "has-region"
P_PLATE_SHAPE = "has-plate-shape"
P_BACKGROUND_COLOR = "has-background-color"
P_FOREGROUND_COLOR = "has-foreground-color"
P_BORDER_COLOR = "has-border-color"
P_PRINTED_SHAPE = "has-printed-shape"
P_ICON = "has-icon"
P_TEXT = "has-text"
P_VARIANT = "has-variant"
P_CATEGORY = "has-category"
P_PROTOTYPE_IMAGE = "has-prototype-image"
P_PROTOTYPE_IMAGE_GRAY = "has-prototype-image-gray"
P_NUMERIC_VALUE = "has-numeric-value"
P_UNIT = "has-unit"
P_TEXT_CATEGORY = "has-text-category"
P_ICON_COLOR = "has-icon-color"
P_TEXT_COLOR = "has-text-color"
P_PRINTED_SHAPE_COLOR = "has-printed-shape-color"
P_COLOR = "has-color"
P_DESCRIPTION = "has-description"
P_EQUIVALENT_CLASS = "equivalent-class"
P_EQUIVALENT_FEATURE = "equivalent-feature"

BASE_PROPERTIES = frozenset({
    P_CONVENTION, P_CONVENTION_VARIANT, P_REGION, P_PLATE_SHAPE,
    P_BACKGROUND_COLOR, P_FOREGROUND_COLOR, P_BORDER_COLOR, P_PRINTED_SHAPE,
    P_ICON, P_TEXT, P_VARIANT, P_CATEGORY, P_PROTOTYPE_IMAGE,
    P_PROTOTYPE_IMAGE_GRAY, P_NUMERIC_VALUE, P_UNIT, P_TEXT_CATEGORY,
    P_ICON_COLOR, P_TEXT_COLOR, P_PRINTED_SHAPE_COLOR, P_COLOR,
    P_DESCRIPTION, P_EQUIVALENT_CLASS, P_EQUIVALENT_FEATURE,
})

LINK_KINDS = (P_EQUIVALENT_CLASS, P_EQUIVALENT_FEATURE)


def sign_to_facts(sign: SignPrototype) -> list[Fact]:
    """Translate a sign into one fact per attribute (one per element for
    set/list attributes). ``facts_to_sign`` inverts this exactly."""
    sid = sign.id
    facts = [
        Fact(sid, P_CONVENTION, sign.convention.name),
        Fact(sid, P_REGION, sign.region),
        Fact(sid, P_PLATE_SHAPE, sign.plate_shape),
        Fact(sid, P_BACKGROUND_COLOR, sign.background_color),
        Fact(sid, P_PROTOTYPE_IMAGE, sign.prototype_image_color),
    ]
    if sign.convention.regional_variant is not None:
        facts.append(Fact(sid, P_CONVENTION_VARIANT, sign.convention.regional_variant))
    if sign.foreground_color is not None:
        facts.append(Fact(sid, P_FOREGROUND_COLOR, sign.foreground_color))
    if sign.border_color is not None:
        facts.append(Fact(sid, P_BORDER_COLOR, sign.border_color))
    for shape in sorted(sign.printed_shapes):
        facts.append(Fact(sid, P_PRINTED_SHAPE, shape))
    for icon in sorted(sign.icons):
        facts.append(Fact(sid, P_ICON, icon))
    for entry in sign.texts:
        facts.append(Fact(sid, P_TEXT, entry.to_fact_object()))
    for variant in sign.variants:
        facts.append(Fact(sid, P_VARIANT, variant))
    if sign.category is not None:
        facts.append(Fact(sid, P_CATEGORY, sign.category))
    if sign.prototype_image_gray is not None:
        facts.append(Fact(sid, P_PROTOTYPE_IMAGE_GRAY, sign.prototype_image_gray))
    return facts


def facts_to_sign(facts: Iterable[Fact]) -> SignPrototype:
    """Rebuild a sign from its attribute facts (inverse of sign_to_facts).

    List-valued attributes (texts, variants) keep the order in which their
    facts are encountered.
    """
    single: dict[str, str] = {}
    printed: set[str] = set()
    icons: set[str] = set()
    texts: list[TextEntry] = []
    variants: list[str] = []
    subject: str | None = None

    for fact in facts:
        if subject is None:
            subject = fact.subject
        elif fact.subject != subject:
            raise FactError(f"facts mix subjects {subject!r} and {fact.subject!r}")
        obj = str(fact.object)
        if fact.predicate == P_PRINTED_SHAPE:
            printed.add(obj)
        elif fact.predicate == P_ICON:
            icons.add(obj)
        elif fact.predicate == P_TEXT:
            texts.append(TextEntry.from_fact_object(obj))
        elif fact.predicate == P_VARIANT:
            variants.append(obj)
        else:
            if fact.predicate in single:
                raise FactError(f"duplicate {fact.predicate} fact for {subject!r}")
            single[fact.predicate] = obj

    if subject is None:
        raise FactError("no facts given")
    missing = [p for p in (P_CONVENTION, P_REGION, P_PLATE_SHAPE,
                           P_BACKGROUND_COLOR, P_PROTOTYPE_IMAGE) if p not in single]
    if missing:
        raise FactError(f"sign {subject!r} is missing facts: {missing}")

    return SignPrototype(
        id=subject,
        convention=Convention(single[P_CONVENTION], single.get(P_CONVENTION_VARIANT)),
        region=single[P_REGION],
        plate_shape=single[P_PLATE_SHAPE],
        background_color=single[P_BACKGROUND_COLOR],
        prototype_image_color=single[P_PROTOTYPE_IMAGE],
        foreground_color=single.get(P_FOREGROUND_COLOR),
        border_color=single.get(P_BORDER_COLOR),
        printed_shapes=frozenset(printed),
        icons=frozenset(icons),
        texts=tuple(texts),
        variants=tuple(variants),
        category=single.get(P_CATEGORY),
        prototype_image_gray=single.get(P_PROTOTYPE_IMAGE_GRAY),
    )


class CyclicHierarchyError(ValueError):
    """The property hierarchy contains a cycle."""


@dataclass(frozen=True)
class PropertyHierarchy:
    """Child-to-parent subsumption edges between property identifiers."""

    edges: frozenset[tuple[str, str]] = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "edges", frozenset(self.edges))
        self._check_acyclic()

    def _check_acyclic(self):
        parents: dict[str, set[str]] = {}
        for child, parent in self.edges:
            parents.setdefault(child, set()).add(parent)
        visiting: set[str] = set()
        done: set[str] = set()

        def visit(node: str, trail: list[str]):
            if node in done:
                return
            if node in visiting:
                raise CyclicHierarchyError(
                    f"property hierarchy cycle through {node!r}: {' -> '.join(trail + [node])}"
                )
            visiting.add(node)
            for parent in parents.get(node, ()):
                visit(parent, trail + [node])
            visiting.discard(node)
            done.add(node)

        for node in sorted(parents):
            visit(node, [])

    @property
    def properties(self) -> frozenset[str]:
        return frozenset(p for edge in self.edges for p in edge)

    def ancestors(self, prop: str) -> tuple[str, ...]:
        """All transitive parents of ``prop``, sorted for determinism."""
        parents: dict[str, set[str]] = {}
        for child, parent in self.edges:
            parents.setdefault(child, set()).add(parent)
        seen: set[str] = set()
        frontier = [prop]
        while frontier:
            node = frontier.pop()
            for parent in parents.get(node, ()):
                if parent not in seen:
                    seen.add(parent)
                    frontier.append(parent)
        return tuple(sorted(seen))
