"""Fixture generator: distribution, determinism, workload calibration."""

import hashlib
from collections import Counter

import pytest

from signkit import fixture
from signkit.fixture import FixtureError, FixtureSpec
from signkit.query import load_workload, search_space_stats


def _pair_counts(signs):
    return Counter((s.plate_shape, s.background_color) for s in signs)


class TestSignGeneration:
    def test_default_distribution(self, fixture_dir):
        lines = (fixture_dir / "signs.jsonl").read_text().splitlines()
        assert len(lines) == 845

    def test_target_pair_counts(self):
        signs = fixture.generate_signs(FixtureSpec())
        pairs = _pair_counts(signs)
        assert pairs[("rectangle", "white")] == 355   # round(0.42 * 845)
        assert pairs[("diamond", "yellow")] == 118    # round(0.14 * 845)
        assert pairs[("octagon", "red")] == 1
        assert sum(pairs.values()) == 845

    def test_stop_sign_is_first(self):
        signs = fixture.generate_signs(FixtureSpec())
        stop = signs[0]
        assert stop.id == "us-0001"
        assert (stop.plate_shape, stop.background_color) == ("octagon", "red")
        assert stop.texts[0].raw == "STOP"

    def test_unique_ids(self):
        signs = fixture.generate_signs(FixtureSpec())
        assert len({s.id for s in signs}) == len(signs)

    def test_degenerate_single_pair(self):
        spec = FixtureSpec(total_signs=10,
                           distribution=(("octagon", "red", 1.0),),
                           query_count=0)
        signs = fixture.generate_signs(spec)
        assert len(signs) == 10
        assert _pair_counts(signs) == {("octagon", "red"): 10}

    def test_infeasible_proportions(self):
        with pytest.raises(FixtureError, match="exceed"):
            FixtureSpec(distribution=(("rectangle", "white", 0.8),
                                      ("diamond", "yellow", 0.4)))

    def test_duplicate_target_pair(self):
        with pytest.raises(FixtureError, match="duplicate"):
            FixtureSpec(distribution=(("rectangle", "white", 0.2),
                                      ("rectangle", "white", 0.2)))

    def test_richness_bounds(self):
        with pytest.raises(FixtureError, match="richness"):
            FixtureSpec(icon_richness=3.0)

    def test_seed_changes_output(self):
        first = fixture.generate_signs(FixtureSpec(seed=1, query_count=0))
        second = fixture.generate_signs(FixtureSpec(seed=2, query_count=0))
        assert first != second


class TestDeterminism:
    def test_same_spec_same_bytes(self, tmp_path, fixture_dir):
        # regenerate into a fresh directory and compare file for file
        regen = tmp_path / "regen"
        fixture.gen_fixture(FixtureSpec(), regen, render_images=True)
        for name in ("signs.jsonl", "workload.txt"):
            assert (regen / name).read_bytes() == (fixture_dir / name).read_bytes()
        originals = sorted((fixture_dir / "prototypes").glob("*.png"))
        copies = sorted((regen / "prototypes").glob("*.png"))
        assert [p.name for p in originals] == [p.name for p in copies]
        for a, b in zip(originals, copies):
            assert a.read_bytes() == b.read_bytes()

    def test_prototype_images_pairwise_distinct(self, fixture_dir):
        digests = {hashlib.sha256(p.read_bytes()).hexdigest()
                   for p in (fixture_dir / "prototypes").glob("*.png")}
        assert len(digests) == 845


class TestWorkload:
    def test_fifty_queries_with_three_to_five_clauses(self, workload_text):
        queries = load_workload(workload_text)
        assert len(queries) == 50
        for q in queries:
            assert 3 <= len(q.clauses) <= 5
            keys = [c.key for c in q.clauses]
            assert keys[0] == "plate" and keys[1] == "bg"

    def test_mean_in_target_window(self, fixture_kg, workload_text):
        report = search_space_stats(load_workload(workload_text), fixture_kg)
        assert fixture.MEAN_TARGET - fixture.MEAN_TOLERANCE <= report.mean \
            <= fixture.MEAN_TARGET + fixture.MEAN_TOLERANCE

    def test_no_empty_results(self, fixture_kg, workload_text):
        report = search_space_stats(load_workload(workload_text), fixture_kg)
        assert min(report.per_query_sizes) >= 1

    def test_histogram_follows_reference_shape(self, fixture_kg, workload_text):
        report = search_space_stats(load_workload(workload_text), fixture_kg)
        # quotas are rounded reference proportions of 50
        assert report.histogram == (19, 8, 10, 6, 7, 0)


class TestRendering:
    def test_render_is_deterministic(self, fixture_kg):
        sign = fixture_kg.signs["us-0002"]
        a = fixture.render_prototype(sign)
        b = fixture.render_prototype(sign)
        assert a.tobytes() == b.tobytes()

    def test_render_size(self, fixture_kg):
        image = fixture.render_prototype(fixture_kg.signs["us-0001"])
        assert image.size == (64, 64)
