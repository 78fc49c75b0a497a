"""Operator command line: ingest, query, fixtures, evaluation, serving.

Exit codes: 0 success, 2 query/workload syntax errors (offset printed),
3 data errors (rejected records, bad files), 1 anything else.
"""

from __future__ import annotations

import sys
from pathlib import Path

import click

from . import evalreport, fixture, ranker
from .kgstore import (
    KnowledgeGraph,
    RuleError,
    SnapshotError,
    apply_alignment,
    default_alignment_rules,
    ingest_signs,
    load_snapshot,
    parse_alignment_rules,
    write_snapshot,
)
from .query import QueryError, load_workload, parse_query, search_space_stats
from .service import AnnotationService, ServiceError, create_app, _LazyPrototypes

EXIT_SYNTAX = 2
EXIT_DATA = 3


def _fail(code: int, message: str):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _load_graph(snapshot: str) -> KnowledgeGraph:
    try:
        return load_snapshot(snapshot)
    except (SnapshotError, OSError) as exc:
        _fail(EXIT_DATA, f"cannot load snapshot {snapshot}: {exc}")


def _write_report(text: str, out: str | None):
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        click.echo(text, nl=False)


@click.group()
@click.version_option()
def main():
    """Road-sign knowledge graph and annotation tooling."""


@main.command()
@click.argument("document", type=click.Path(exists=True, dir_okay=False))
@click.option("--snapshot", required=True, type=click.Path(dir_okay=False),
              help="Snapshot file to write.")
@click.option("--rules", type=click.Path(exists=True, dir_okay=False),
              help="Alignment rules file to apply before snapshotting.")
@click.option("--align", is_flag=True, help="Apply the shipped alignment rules.")
def ingest(document, snapshot, rules, align):
    """Ingest a sign document and write a snapshot."""
    kg = KnowledgeGraph()
    with open(document, encoding="utf-8") as handle:
        count, rejected = ingest_signs(kg, handle)
    derived = 0
    if rules or align:
        try:
            rule_set = (parse_alignment_rules(Path(rules).read_text("utf-8"))
                        if rules else default_alignment_rules())
            derived = apply_alignment(kg, rule_set)
        except RuleError as exc:
            _fail(EXIT_DATA, f"bad rules file: {exc}")
    write_snapshot(kg, snapshot)
    click.echo(f"ingested {count} signs, derived {derived} facts -> {snapshot}")
    if rejected:
        for lineno, reason in rejected:
            click.echo(f"rejected line {lineno}: {reason}", err=True)
        sys.exit(EXIT_DATA)


@main.command(name="query")
@click.argument("query_text")
@click.option("--snapshot", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--region", default="", help="Evaluate against one region's sub-graph.")
def query_command(query_text, snapshot, region):
    """Evaluate one query and print the matching sign ids."""
    kg = _load_graph(snapshot)
    try:
        parsed = parse_query(query_text)
    except QueryError as exc:
        _fail(EXIT_SYNTAX, f"query syntax: {exc}")
    if region:
        from .kgstore import domain_subgraph
        kg = domain_subgraph(kg, region)
    from .query import evaluate
    result = evaluate(parsed, kg)
    for sign_id in result.sign_ids:
        click.echo(sign_id)
    click.echo(f"# {result.size} candidates", err=True)


@main.command(name="gen-fixture")
@click.option("--out", required=True, type=click.Path(file_okay=False),
              help="Output directory.")
@click.option("--seed", default=fixture.DEFAULT_SEED, show_default=True)
@click.option("--total", default=fixture.DEFAULT_TOTAL, show_default=True)
@click.option("--queries", default=50, show_default=True,
              help="Workload size; 0 skips workload generation.")
@click.option("--render/--no-render", default=True, show_default=True,
              help="Render prototype images.")
def gen_fixture_command(out, seed, total, queries, render):
    """Generate the seeded evaluation fixture (signs, workload, images)."""
    spec = fixture.FixtureSpec(total_signs=total, seed=seed, query_count=queries)
    try:
        signs, workload = fixture.gen_fixture(spec, out, render_images=render)
    except fixture.FixtureError as exc:
        _fail(EXIT_DATA, str(exc))
    click.echo(f"wrote {len(signs)} signs and {len(workload)} queries to {out}")


@main.command(name="eval-search-space")
@click.argument("workload", type=click.Path(exists=True, dir_okay=False))
@click.option("--snapshot", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--format", "fmt", type=click.Choice(["table", "records"]),
              default="table", show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), help="Write the report to a file.")
def eval_search_space(workload, snapshot, fmt, out):
    """Evaluate a query workload and report the size distribution."""
    kg = _load_graph(snapshot)
    try:
        queries = load_workload(Path(workload).read_text("utf-8"))
    except QueryError as exc:
        _fail(EXIT_SYNTAX, f"{workload}: {exc}")
    if not queries:
        _fail(EXIT_DATA, f"{workload}: empty workload")
    report = search_space_stats(queries, kg)
    if fmt == "table":
        _write_report(evalreport.render_search_space_table(report, len(kg)), out)
    else:
        _write_report(evalreport.search_space_records(report, len(kg)), out)


@main.command(name="eval-ranker")
@click.argument("manifest", type=click.Path(exists=True, dir_okay=False))
@click.option("--weights", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--snapshot", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--sizes", default="10,20,30", show_default=True)
@click.option("--ks", default="1,3,5", show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--image-root", type=click.Path(file_okay=False),
              help="Base directory for prototype image refs (default: snapshot dir).")
@click.option("--format", "fmt", type=click.Choice(["table", "records"]),
              default="table", show_default=True)
@click.option("--out", type=click.Path(dir_okay=False))
def eval_ranker(manifest, weights, snapshot, sizes, ks, seed, image_root, fmt, out):
    """Rank down-sampled candidate pools and report top-k accuracy."""
    try:
        model = ranker.load_weights(weights)
    except ranker.WeightFormatError as exc:
        _fail(EXIT_DATA, f"bad weight file {weights}: {exc}")
    kg = _load_graph(snapshot)
    size_list = [int(s) for s in sizes.split(",") if s]
    k_list = [int(k) for k in ks.split(",") if k]
    try:
        items = evalreport.load_manifest(manifest)
        prototypes = _LazyPrototypes(kg, Path(image_root or Path(snapshot).parent))
        matrix, rejected = evalreport.evaluate_ranker(
            model, items, prototypes, size_list, k_list, seed)
    except (evalreport.ManifestError, ServiceError, ranker.RankingError, OSError) as exc:
        _fail(EXIT_DATA, str(exc))
    for index, reason in rejected:
        click.echo(f"rejected item {index}: {reason}", err=True)
    if fmt == "table":
        _write_report(evalreport.render_ranker_matrix(matrix, size_list, k_list), out)
    else:
        _write_report(evalreport.ranker_records(matrix, size_list, k_list), out)


@main.command()
@click.option("--snapshot", required=True, envvar="SIGNKIT_SNAPSHOT",
              type=click.Path(exists=True, dir_okay=False))
@click.option("--weights", envvar="SIGNKIT_WEIGHTS",
              type=click.Path(exists=True, dir_okay=False))
@click.option("--k", default=10, envvar="SIGNKIT_K", show_default=True, type=int)
@click.option("--listen", default="127.0.0.1:8000", envvar="SIGNKIT_LISTEN",
              show_default=True)
@click.option("--data-dir", default="annotation-data", envvar="SIGNKIT_DATA_DIR",
              show_default=True, type=click.Path(file_okay=False))
@click.option("--image-root", envvar="SIGNKIT_IMAGE_ROOT",
              type=click.Path(file_okay=False))
@click.option("--align/--no-align", default=True, show_default=True,
              help="Apply the shipped alignment rules at startup.")
def serve(snapshot, weights, k, listen, data_dir, image_root, align):
    """Launch the annotation HTTP service."""
    import uvicorn

    kg = _load_graph(snapshot)
    if align:
        apply_alignment(kg, default_alignment_rules())
    model = None
    if weights:
        try:
            model = ranker.load_weights(weights)
        except ranker.WeightFormatError as exc:
            _fail(EXIT_DATA, f"bad weight file {weights}: {exc}")
    service = AnnotationService(
        kg, model, candidate_threshold=k, data_dir=data_dir,
        image_root=image_root or Path(snapshot).parent)
    host, _, port = listen.partition(":")
    click.echo(f"serving {len(kg)} signs on {listen} "
               f"(model {'loaded' if model else 'absent'}, threshold {k})")
    uvicorn.run(create_app(service), host=host or "127.0.0.1", port=int(port or 8000))


if __name__ == "__main__":
    main()
