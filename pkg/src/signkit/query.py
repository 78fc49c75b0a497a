"""Conjunctive attribute query language: parser, evaluator, statistics.

Grammar::

    query  := clause ("AND" clause)*
    clause := key "=" value
            | "text" "~" quoted-string

Keys: plate, bg, fg, border, printed, icon, text, text_cat, convention,
region, category. Keys and values are case-folded; values containing
spaces must be double-quoted. ``~`` (contains) is only valid for ``text``.

Evaluation is read-only over an immutable graph view and may run
concurrently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .kgstore import ATTRIBUTE_KEYS, KnowledgeGraph

OP_EQUALS = "equals"
OP_CONTAINS = "contains"

HISTOGRAM_BUCKETS = ((0, 5), (6, 10), (11, 15), (16, 20), (21, 25), (26, None))
HISTOGRAM_LABELS = ("1-5", "6-10", "11-15", "16-20", "21-25", ">25")


class QueryError(ValueError):
    """Query text is malformed; ``offset`` is the byte offset of the
    offending token."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (offset {offset})")
        self.offset = offset


@dataclass(frozen=True)
class Clause:
    key: str
    op: str  # equals | contains
    value: str


@dataclass(frozen=True)
class AttributeQuery:
    """A conjunction of attribute constraints. Clause order is preserved
    for rendering but evaluation is order-independent."""

    clauses: tuple[Clause, ...]

    def __post_init__(self):
        if not self.clauses:
            raise ValueError("a query needs at least one clause")
        object.__setattr__(self, "clauses", tuple(self.clauses))

    def to_text(self) -> str:
        """Canonical rendering; re-parsing yields an equal query."""
        parts = []
        for clause in self.clauses:
            if clause.op == OP_CONTAINS:
                parts.append(f'text~"{clause.value}"')
            elif _needs_quoting(clause.value):
                parts.append(f'{clause.key}="{clause.value}"')
            else:
                parts.append(f"{clause.key}={clause.value}")
        return " AND ".join(parts)


@dataclass(frozen=True)
class CandidateSet:
    """Sign ids surviving a query, sorted ascending and duplicate-free."""

    query: AttributeQuery
    sign_ids: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "sign_ids", tuple(sorted(set(self.sign_ids))))

    @property
    def size(self) -> int:
        return len(self.sign_ids)


def _needs_quoting(value: str) -> bool:
    if '"' in value:
        raise ValueError(f"value {value!r} contains a double quote and cannot be rendered")
    return (not value) or any(ch.isspace() for ch in value) \
        or any(ch in "=~" for ch in value) or value.casefold() == "and"


# ---------------------------------------------------------------------------
# Parsing


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    """Tokens: (kind, value, offset). Kinds: WORD, QUOTED, '=', '~'."""
    tokens: list[tuple[str, str, int]] = []
    i = 0
    while i < len(text):
        ch = text[i]
        if ch.isspace():
            i += 1
            continue
        if ch in "=~":
            tokens.append((ch, ch, i))
            i += 1
            continue
        if ch == '"':
            end = text.find('"', i + 1)
            if end < 0:
                raise QueryError("unterminated quoted string", i)
            tokens.append(("QUOTED", text[i + 1:end], i))
            i = end + 1
            continue
        start = i
        while i < len(text) and not text[i].isspace() and text[i] not in '=~"':
            i += 1
        tokens.append(("WORD", text[start:i], start))
    return tokens


def parse_query(text: str) -> AttributeQuery:
    """Parse query text; raises QueryError with a byte offset."""
    tokens = _tokenize(text)
    if not tokens:
        raise QueryError("empty query", 0)

    clauses: list[Clause] = []
    pos = 0

    def peek():
        return tokens[pos] if pos < len(tokens) else (None, None, len(text))

    while True:
        kind, value, offset = peek()
        if kind != "WORD":
            raise QueryError("expected an attribute key", offset)
        key = value.casefold()
        if key not in ATTRIBUTE_KEYS:
            raise QueryError(f"unknown attribute key {value!r}", offset)
        pos += 1

        kind, value, offset = peek()
        if kind == "=":
            op = OP_EQUALS
        elif kind == "~":
            if key != "text":
                raise QueryError("'~' (contains) is only valid for key 'text'", offset)
            op = OP_CONTAINS
        else:
            raise QueryError("expected '=' or '~' after the key", offset)
        pos += 1

        kind, value, offset = peek()
        if kind == "QUOTED":
            clause_value = value.casefold()
        elif kind == "WORD":
            if op == OP_CONTAINS:
                raise QueryError("'~' requires a quoted string", offset)
            if value.upper() == "AND":
                raise QueryError("missing value before 'AND'", offset)
            clause_value = value.casefold()
        else:
            raise QueryError("expected a value", offset)
        pos += 1
        clauses.append(Clause(key, op, clause_value))

        kind, value, offset = peek()
        if kind is None:
            break
        if kind == "WORD" and value.upper() == "AND":
            pos += 1
            continue
        raise QueryError("expected 'AND' between clauses", offset)

    return AttributeQuery(tuple(clauses))


# ---------------------------------------------------------------------------
# Evaluation


def _clause_matches(kg: KnowledgeGraph, sign_id: str, clause: Clause) -> bool:
    if clause.op == OP_CONTAINS:
        sign = kg.signs[sign_id]
        return any(clause.value in entry.raw.casefold() for entry in sign.texts)
    return clause.value in kg.attribute_values(sign_id, clause.key)


def evaluate(query: AttributeQuery, kg: KnowledgeGraph) -> CandidateSet:
    """Signs satisfying every clause; equals-clauses hit the inverted
    indexes, text-contains filters the survivors. Equals evaluation over an
    index equals a linear scan over all signs (tested as a property)."""
    candidates: set[str] | None = None
    contains_clauses: list[Clause] = []
    for clause in query.clauses:
        if clause.op == OP_CONTAINS:
            contains_clauses.append(clause)
            continue
        matched = kg.ids_with(clause.key, clause.value)
        candidates = matched if candidates is None else candidates & matched
        if not candidates:
            return CandidateSet(query, ())

    if candidates is None:
        candidates = set(kg.signs)
    for clause in contains_clauses:
        candidates = {sid for sid in candidates if _clause_matches(kg, sid, clause)}

    return CandidateSet(query, tuple(candidates))


def matches(kg: KnowledgeGraph, sign_id: str, query: AttributeQuery) -> bool:
    """Clause-by-clause check of one sign, independent of the indexes."""
    return all(_clause_matches(kg, sign_id, clause) for clause in query.clauses)


# ---------------------------------------------------------------------------
# Search-space statistics


@dataclass(frozen=True)
class SearchSpaceReport:
    """Distribution of candidate-set sizes for a query workload."""

    per_query_sizes: tuple[int, ...]
    mean: float
    stdev: float  # sample standard deviation; 0.0 for a single query
    histogram: tuple[int, ...]  # counts for 1-5, 6-10, 11-15, 16-20, 21-25, >25
    reduction_percent: float


def bucket_index(size: int) -> int:
    for i, (low, high) in enumerate(HISTOGRAM_BUCKETS):
        if size >= low and (high is None or size <= high):
            return i
    raise ValueError(f"negative size {size}")


def search_space_stats(
    queries: list[AttributeQuery], kg: KnowledgeGraph
) -> SearchSpaceReport:
    """Evaluate a workload and aggregate sizes into the report shape."""
    if not queries:
        raise ValueError("at least one query is required")
    sizes = tuple(evaluate(q, kg).size for q in queries)
    mean = sum(sizes) / len(sizes)
    if len(sizes) > 1:
        stdev = math.sqrt(sum((s - mean) ** 2 for s in sizes) / (len(sizes) - 1))
    else:
        stdev = 0.0
    histogram = [0] * len(HISTOGRAM_BUCKETS)
    for size in sizes:
        histogram[bucket_index(size)] += 1
    total = len(kg)
    reduction = 100.0 * (1.0 - mean / total) if total else 0.0
    return SearchSpaceReport(sizes, mean, stdev, tuple(histogram), reduction)


def load_workload(text: str) -> list[AttributeQuery]:
    """Parse a workload file: one query per line, ``#`` comments ignored."""
    queries = []
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            queries.append(parse_query(line))
    return queries
