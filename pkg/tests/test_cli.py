"""Operator CLI: subcommands, exit codes, report rendering."""

import json
import math
import re

import pytest
from click.testing import CliRunner

from signkit import evalreport
from signkit.cli import main
from signkit.evalreport import EvalItem, downsample_pool
from signkit.kgstore import load_snapshot


@pytest.fixture(scope="module")
def runner():
    return CliRunner()


@pytest.fixture(scope="module")
def snapshot_path(tmp_path_factory, fixture_dir, runner):
    path = tmp_path_factory.mktemp("cli") / "fixture.rskg"
    result = runner.invoke(main, ["ingest", str(fixture_dir / "signs.jsonl"),
                                  "--snapshot", str(path), "--align"])
    assert result.exit_code == 0, result.output
    return path


class TestIngest:
    def test_empty_document(self, runner, tmp_path):
        doc = tmp_path / "empty.jsonl"
        doc.write_text("")
        snap = tmp_path / "empty.rskg"
        result = runner.invoke(main, ["ingest", str(doc), "--snapshot", str(snap)])
        assert result.exit_code == 0
        assert len(load_snapshot(snap)) == 0

    def test_rejects_reported_with_nonzero_exit(self, runner, tmp_path):
        doc = tmp_path / "mixed.jsonl"
        good = json.dumps({"id": "a-1", "convention": "mutcd", "region": "US",
                           "plate_shape": "circle", "background_color": "blue",
                           "prototype_image_color": "p.png"})
        bad = good.replace("blue", "pink").replace("a-1", "a-2")
        doc.write_text(good + "\n" + bad + "\n")
        snap = tmp_path / "mixed.rskg"
        result = runner.invoke(main, ["ingest", str(doc), "--snapshot", str(snap)])
        assert result.exit_code == 3
        assert "rejected line 2" in result.stderr
        assert len(load_snapshot(snap)) == 1


class TestQuery:
    def test_stop_sign_prints_single_id(self, runner, snapshot_path):
        result = runner.invoke(main, ["query", "plate=octagon AND bg=red",
                                      "--snapshot", str(snapshot_path)])
        assert result.exit_code == 0
        stdout_ids = [l for l in result.output.splitlines() if not l.startswith("#")]
        assert stdout_ids == ["us-0001"]

    def test_syntax_error_exits_2_with_offset(self, runner, snapshot_path):
        result = runner.invoke(main, ["query", "plate=octagon AND",
                                      "--snapshot", str(snapshot_path)])
        assert result.exit_code == 2
        assert "offset 17" in result.stderr

    def test_region_filter(self, runner, snapshot_path):
        result = runner.invoke(main, ["query", "plate=octagon AND bg=red",
                                      "--snapshot", str(snapshot_path),
                                      "--region", "DE"])
        assert result.exit_code == 0
        assert "# 0 candidates" in result.stderr


class TestGenFixture:
    def test_degenerate_spec(self, runner, tmp_path):
        result = runner.invoke(main, ["gen-fixture", "--out", str(tmp_path / "g"),
                                      "--total", "12", "--queries", "0",
                                      "--no-render"])
        assert result.exit_code == 0
        lines = (tmp_path / "g" / "signs.jsonl").read_text().splitlines()
        assert len(lines) == 12

    def test_default_fixture(self, runner, tmp_path):
        result = runner.invoke(main, ["gen-fixture", "--out", str(tmp_path / "full"),
                                      "--no-render"])
        assert result.exit_code == 0
        assert "845 signs and 50 queries" in result.output


class TestEvalSearchSpace:
    def test_table_report(self, runner, snapshot_path, fixture_dir):
        result = runner.invoke(main, [
            "eval-search-space", str(fixture_dir / "workload.txt"),
            "--snapshot", str(snapshot_path)])
        assert result.exit_code == 0, result.output
        assert "reference (drive-data evaluation): mean 8.92, stdev 7.36" in result.output
        reduction = float(re.search(r"reduction\s+([0-9.]+)%", result.output).group(1))
        assert reduction >= 97.0

    def test_printed_aggregates_rederivable_from_printed_sizes(
            self, runner, snapshot_path, fixture_dir):
        result = runner.invoke(main, [
            "eval-search-space", str(fixture_dir / "workload.txt"),
            "--snapshot", str(snapshot_path)])
        sizes_line = next(l for l in result.output.splitlines()
                          if l.startswith("per-query sizes:"))
        sizes = [int(s) for s in sizes_line.split(":", 1)[1].split()]
        mean = sum(sizes) / len(sizes)
        stdev = math.sqrt(sum((s - mean) ** 2 for s in sizes) / (len(sizes) - 1))
        reduction = 100.0 * (1.0 - mean / 845)
        assert f"{'mean':<20}{mean:>12.2f}" in result.output
        assert f"{'stdev':<20}{stdev:>12.2f}" in result.output
        assert f"{'reduction':<20}{reduction:>11.2f}%" in result.output
        buckets = {"1-5": 0, "6-10": 0, "11-15": 0, "16-20": 0, "21-25": 0, ">25": 0}
        for s in sizes:
            if s <= 5:
                buckets["1-5"] += 1
            elif s <= 10:
                buckets["6-10"] += 1
            elif s <= 15:
                buckets["11-15"] += 1
            elif s <= 20:
                buckets["16-20"] += 1
            elif s <= 25:
                buckets["21-25"] += 1
            else:
                buckets[">25"] += 1
        for label, count in buckets.items():
            assert f"{label:<20}{100.0 * count / len(sizes):>11.1f}%" in result.output

    def test_records_format(self, runner, snapshot_path, fixture_dir, tmp_path):
        out = tmp_path / "report.jsonl"
        result = runner.invoke(main, [
            "eval-search-space", str(fixture_dir / "workload.txt"),
            "--snapshot", str(snapshot_path), "--format", "records",
            "--out", str(out)])
        assert result.exit_code == 0
        records = [json.loads(l) for l in out.read_text().splitlines()]
        kinds = {r["record"] for r in records}
        assert kinds == {"query", "bucket", "summary", "reference"}
        summary = next(r for r in records if r["record"] == "summary")
        assert summary["queries"] == 50

    def test_bad_workload_syntax_exits_2(self, runner, snapshot_path, tmp_path):
        bad = tmp_path / "bad.txt"
        bad.write_text("plate=octagon AND\n")
        result = runner.invoke(main, ["eval-search-space", str(bad),
                                      "--snapshot", str(snapshot_path)])
        assert result.exit_code == 2
        assert "offset" in result.stderr


@pytest.fixture(scope="module")
def manifest(tmp_path_factory, fixture_dir):
    path = tmp_path_factory.mktemp("manifest") / "eval.jsonl"
    pool = [f"us-{i:04d}" for i in range(2, 14)]
    lines = []
    for sid in pool[:6]:
        lines.append(json.dumps({
            "patch": str(fixture_dir / "prototypes" / f"{sid}.png"),
            "true_id": sid,
            "pool": pool,
        }))
    path.write_text("\n".join(lines) + "\n")
    return path


class TestEvalRanker:
    def test_self_prototype_manifest_is_perfect(
            self, runner, manifest, snapshot_path, fixture_dir):
        result = runner.invoke(main, [
            "eval-ranker", str(manifest),
            "--weights", "fixtures/vpe_fixture.vpe1",
            "--snapshot", str(snapshot_path),
            "--image-root", str(fixture_dir),
            "--sizes", "6,10", "--ks", "1,3"])
        assert result.exit_code == 0, result.output
        assert f"{6:<14}{1.0:>8.3f}{1.0:>8.3f}" in result.output
        # the published reference matrix is printed alongside
        assert f"{10:<14}{0.73:>8.3f}{0.85:>8.3f}{0.90:>8.3f}" in result.output

    def test_true_id_missing_from_pool_rejected(
            self, runner, snapshot_path, fixture_dir, tmp_path):
        manifest = tmp_path / "bad.jsonl"
        manifest.write_text(json.dumps({
            "patch": str(fixture_dir / "prototypes" / "us-0002.png"),
            "true_id": "us-9999",
            "pool": ["us-0002", "us-0003", "us-0004"],
        }) + "\n")
        result = runner.invoke(main, [
            "eval-ranker", str(manifest),
            "--weights", "fixtures/vpe_fixture.vpe1",
            "--snapshot", str(snapshot_path),
            "--image-root", str(fixture_dir),
            "--sizes", "3", "--ks", "1"])
        assert "rejected item 0" in result.stderr

    def test_records_format(self, runner, manifest, snapshot_path, fixture_dir):
        result = runner.invoke(main, [
            "eval-ranker", str(manifest),
            "--weights", "fixtures/vpe_fixture.vpe1",
            "--snapshot", str(snapshot_path),
            "--image-root", str(fixture_dir),
            "--sizes", "6", "--ks", "1", "--format", "records"])
        records = [json.loads(l) for l in result.output.splitlines()]
        mine = [r for r in records if r["record"] == "accuracy"]
        assert mine == [{"record": "accuracy", "size": 6, "k": 1, "value": 1.0}]


class TestDownsampling:
    def test_exact_size_and_true_id_retained(self):
        item = EvalItem("p.png", "true", tuple(f"d{i}" for i in range(30)) + ("true",))
        for size in (5, 10, 30):
            for index in range(10):
                pool = downsample_pool(item, size, seed=7, index=index)
                assert len(pool) == size
                assert "true" in pool

    def test_deterministic_per_seed(self):
        item = EvalItem("p.png", "true", tuple(f"d{i}" for i in range(30)) + ("true",))
        a = downsample_pool(item, 10, seed=7, index=3)
        b = downsample_pool(item, 10, seed=7, index=3)
        c = downsample_pool(item, 10, seed=8, index=3)
        assert a == b
        assert a != c

    def test_pool_too_small(self):
        item = EvalItem("p.png", "true", ("true", "d1"))
        with pytest.raises(evalreport.ManifestError, match="cannot fill"):
            downsample_pool(item, 10, seed=1, index=0)


class TestServe:
    def test_serve_builds_and_binds(self, runner, snapshot_path, fixture_dir,
                                     tmp_path, monkeypatch):
        captured = {}

        def fake_run(app, host, port):
            captured["host"], captured["port"] = host, port

        import uvicorn
        monkeypatch.setattr(uvicorn, "run", fake_run)
        result = runner.invoke(main, [
            "serve", "--snapshot", str(snapshot_path),
            "--weights", "fixtures/vpe_fixture.vpe1",
            "--k", "7", "--listen", "127.0.0.1:9101",
            "--data-dir", str(tmp_path / "data"),
            "--image-root", str(fixture_dir)])
        assert result.exit_code == 0, result.output
        assert captured == {"host": "127.0.0.1", "port": 9101}
        assert "threshold 7" in result.output
