"""Query language: parsing, evaluation, statistics."""

import math
import random

import pytest
from hypothesis import given, settings, strategies as st

import oracles as oracles_mod
from oracles import brute_force_candidates
from signkit import rso
from signkit.kgstore import ATTRIBUTE_KEYS, KnowledgeGraph
from signkit.query import (
    AttributeQuery,
    Clause,
    OP_CONTAINS,
    OP_EQUALS,
    QueryError,
    evaluate,
    load_workload,
    parse_query,
    search_space_stats,
)
from signkit.rso import Convention, SignPrototype, TextEntry

VOCAB = rso.default_vocabularies()


class TestParsing:
    def test_two_clause_query(self):
        q = parse_query("plate=diamond AND bg=yellow")
        assert q.clauses == (Clause("plate", OP_EQUALS, "diamond"),
                             Clause("bg", OP_EQUALS, "yellow"))

    def test_case_folding(self):
        q = parse_query("PLATE=Diamond and BG=YELLOW")
        assert q.clauses[0] == Clause("plate", OP_EQUALS, "diamond")
        assert q.clauses[1] == Clause("bg", OP_EQUALS, "yellow")

    def test_contains_requires_text_key(self):
        with pytest.raises(QueryError) as excinfo:
            parse_query('plate~"stop"')
        assert "only valid for key 'text'" in str(excinfo.value)
        assert excinfo.value.offset == 5

    def test_contains_clause(self):
        q = parse_query('text~"stop"')
        assert q.clauses == (Clause("text", OP_CONTAINS, "stop"),)

    def test_contains_requires_quoted_string(self):
        with pytest.raises(QueryError, match="quoted"):
            parse_query("text~stop")

    def test_unknown_key_with_offset(self):
        with pytest.raises(QueryError) as excinfo:
            parse_query("plate=diamond AND sheen=glossy")
        assert excinfo.value.offset == 18

    def test_quoted_value_with_spaces(self):
        q = parse_query('text="SPEED LIMIT 30"')
        assert q.clauses[0].value == "speed limit 30"

    def test_unterminated_quote(self):
        with pytest.raises(QueryError, match="unterminated"):
            parse_query('text~"stop')

    def test_empty_query(self):
        with pytest.raises(QueryError):
            parse_query("   ")

    def test_trailing_and(self):
        with pytest.raises(QueryError) as excinfo:
            parse_query("plate=octagon AND")
        assert excinfo.value.offset == len("plate=octagon AND")

    def test_missing_operator(self):
        with pytest.raises(QueryError, match="expected '=' or '~'"):
            parse_query("plate octagon")

    def test_canonical_round_trip_examples(self):
        for text in ("plate=diamond AND bg=yellow",
                     'text~"speed limit"',
                     'region="new mexico" AND icon=vehicle'):
            q = parse_query(text)
            assert parse_query(q.to_text()) == q


@st.composite
def _queries(draw):
    clauses = []
    for _ in range(draw(st.integers(1, 5))):
        key = draw(st.sampled_from(ATTRIBUTE_KEYS))
        if key == "text" and draw(st.booleans()):
            op = OP_CONTAINS
        else:
            op = OP_EQUALS
        value = draw(st.text(
            alphabet="abcdefghijklmnopqrstuvwxyz0123456789 -", min_size=1, max_size=12)
            .filter(lambda s: s.strip() == s))
        clauses.append(Clause(key, op, value))
    return AttributeQuery(tuple(clauses))


@settings(max_examples=200, deadline=None)
@given(_queries())
def test_parse_print_round_trip(query):
    assert parse_query(query.to_text()) == query


def _small_graph() -> KnowledgeGraph:
    kg = KnowledgeGraph()
    rows = [
        ("octagon", "red", (), (), ("STOP",)),
        ("diamond", "yellow", ("arrow-left",), ("vehicle",), ()),
        ("diamond", "yellow", (), ("person",), ("PED XING",)),
        ("rectangle", "white", ("bar",), (), ("SPEED LIMIT 30",)),
        ("rectangle", "white", (), (), ("ONE WAY",)),
    ]
    for i, (shape, color, printed, icons, texts) in enumerate(rows, start=1):
        kg.add_sign(SignPrototype(
            id=f"t-{i:04d}", convention=Convention("mutcd"), region="US",
            plate_shape=shape, background_color=color,
            prototype_image_color=f"p/{i}.png",
            printed_shapes=frozenset(printed), icons=frozenset(icons),
            texts=tuple(TextEntry(t) for t in texts)))
    return kg


class TestEvaluation:
    def test_stop_sign_query_on_fixture(self, fixture_kg):
        result = evaluate(parse_query("plate=octagon AND bg=red"), fixture_kg)
        assert result.sign_ids == ("us-0001",)
        assert fixture_kg.signs["us-0001"].texts[0].raw == "STOP"

    def test_sign_matches_its_own_attributes(self, fixture_kg):
        sign = fixture_kg.signs["us-0100"]
        clauses = [Clause("plate", OP_EQUALS, sign.plate_shape),
                   Clause("bg", OP_EQUALS, sign.background_color),
                   Clause("convention", OP_EQUALS, sign.convention.name),
                   Clause("region", OP_EQUALS, sign.region.casefold())]
        if sign.foreground_color:
            clauses.append(Clause("fg", OP_EQUALS, sign.foreground_color))
        for icon in sign.icons:
            clauses.append(Clause("icon", OP_EQUALS, icon))
        result = evaluate(AttributeQuery(tuple(clauses)), fixture_kg)
        assert "us-0100" in result.sign_ids

    def test_rectangle_white_count(self, fixture_kg):
        result = evaluate(parse_query("plate=rectangle AND bg=white"), fixture_kg)
        assert result.size == 355
        # verified by linear scan
        scan = [s for s in fixture_kg.signs.values()
                if s.plate_shape == "rectangle" and s.background_color == "white"]
        assert len(scan) == 355

    def test_unsatisfiable_query_returns_empty(self, fixture_kg):
        assert evaluate(parse_query('plate=octagon AND bg=red AND text="yield"'),
                        fixture_kg).size == 0
        assert evaluate(parse_query("region=zz"), fixture_kg).size == 0
        assert evaluate(parse_query("plate=hexagon"), fixture_kg).size == 0

    def test_clause_permutation_invariance(self, fixture_kg):
        base = parse_query("plate=rectangle AND bg=white AND icon=vehicle")
        for perm in ([0, 1, 2], [2, 1, 0], [1, 0, 2], [2, 0, 1]):
            shuffled = AttributeQuery(tuple(base.clauses[i] for i in perm))
            assert evaluate(shuffled, fixture_kg).sign_ids == \
                evaluate(base, fixture_kg).sign_ids

    def test_conjunct_monotonicity(self, fixture_kg):
        q = parse_query('plate=rectangle AND bg=white AND icon=vehicle AND text~"speed"')
        sizes = []
        for n in range(1, len(q.clauses) + 1):
            sizes.append(evaluate(AttributeQuery(q.clauses[:n]), fixture_kg).size)
        assert sizes == sorted(sizes, reverse=True)

    def test_text_contains_case_folded(self):
        kg = _small_graph()
        assert evaluate(parse_query('text~"sPeEd"'), kg).sign_ids == ("t-0004",)

    def test_text_equals_exact(self):
        kg = _small_graph()
        assert evaluate(parse_query('text="one way"'), kg).sign_ids == ("t-0005",)
        assert evaluate(parse_query('text="one"'), kg).size == 0

    def test_result_sorted_and_unique(self, fixture_kg):
        result = evaluate(parse_query("bg=yellow"), fixture_kg)
        assert list(result.sign_ids) == sorted(set(result.sign_ids))


def test_oracle_equivalence_sample():
    """Indexed evaluation equals the brute-force scan (smaller sibling of
    the acceptance run)."""
    rng = random.Random(1234)
    for _ in range(10):
        kg = oracles_mod.random_graph(rng)
        for _ in range(20):
            q = oracles_mod.random_query(rng)
            assert evaluate(q, kg).sign_ids == brute_force_candidates(kg, q)


class TestStats:
    def test_sample_stdev_estimator(self, fixture_kg):
        queries = [parse_query("plate=octagon AND bg=red"),
                   parse_query("plate=rectangle AND bg=white")]
        report = search_space_stats(queries, fixture_kg)
        sizes = report.per_query_sizes
        mean = sum(sizes) / 2
        assert report.mean == mean
        expected_stdev = math.sqrt(sum((s - mean) ** 2 for s in sizes) / 1)
        assert report.stdev == pytest.approx(expected_stdev)

    def test_spec_arithmetic_example(self):
        # sizes 4 and 6 -> mean 5, sample stdev sqrt(2), buckets {1-5:1, 6-10:1}
        kg = KnowledgeGraph()
        for i in range(10):
            kg.add_sign(SignPrototype(
                id=f"s-{i}", convention=Convention("mutcd"), region="US",
                plate_shape="square" if i < 4 else "circle",
                background_color="blue", prototype_image_color="p.png"))
        report = search_space_stats(
            [parse_query("plate=square"), parse_query("plate=circle")], kg)
        assert report.per_query_sizes == (4, 6)
        assert report.mean == 5.0
        assert report.stdev == pytest.approx(math.sqrt(2))
        assert report.histogram == (1, 1, 0, 0, 0, 0)

    def test_match_all_query_zero_reduction(self, fixture_kg):
        report = search_space_stats([parse_query("region=us")], fixture_kg)
        assert report.mean == 845
        assert report.reduction_percent == 0.0
        assert report.stdev == 0.0

    def test_empty_workload_rejected(self, fixture_kg):
        with pytest.raises(ValueError):
            search_space_stats([], fixture_kg)

    def test_histogram_totality(self, fixture_kg, workload_text):
        queries = load_workload(workload_text)
        report = search_space_stats(queries, fixture_kg)
        assert sum(report.histogram) == len(queries)

    def test_workload_comments_ignored(self):
        queries = load_workload("# header\nplate=octagon\n\nbg=red # tail\n")
        assert len(queries) == 2
