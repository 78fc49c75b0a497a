"""Shared test fixtures.

Session-scoped graphs are shared read-only; tests that mutate a graph must
build their own.
"""

from pathlib import Path

import pytest

from signkit import fixture, ranker
from signkit.kgstore import (
    KnowledgeGraph,
    apply_alignment,
    default_alignment_rules,
    ingest_signs,
)

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"
WEIGHTS_FILE = FIXTURES / "vpe_fixture.vpe1"
GOLDEN_FILE = FIXTURES / "golden_embeddings.txt"


@pytest.fixture(scope="session")
def fixture_dir(tmp_path_factory) -> Path:
    """The default seeded fixture: signs.jsonl, workload.txt, prototypes/."""
    out = tmp_path_factory.mktemp("fixture")
    fixture.gen_fixture(fixture.FixtureSpec(), out, render_images=True)
    return out


@pytest.fixture(scope="session")
def fixture_kg(fixture_dir) -> KnowledgeGraph:
    """The 845-sign graph, ingested from the generated document. Read-only."""
    kg = KnowledgeGraph()
    with open(fixture_dir / "signs.jsonl", encoding="utf-8") as handle:
        count, rejected = ingest_signs(kg, handle)
    assert count == 845 and not rejected
    return kg


@pytest.fixture(scope="session")
def aligned_kg(fixture_dir) -> KnowledgeGraph:
    """A separate fixture graph with the shipped alignment rules applied."""
    kg = KnowledgeGraph()
    with open(fixture_dir / "signs.jsonl", encoding="utf-8") as handle:
        ingest_signs(kg, handle)
    apply_alignment(kg, default_alignment_rules())
    return kg


@pytest.fixture(scope="session")
def fixture_model() -> ranker.EncoderModel:
    return ranker.load_weights(WEIGHTS_FILE)


@pytest.fixture(scope="session")
def workload_text(fixture_dir) -> str:
    return (fixture_dir / "workload.txt").read_text("utf-8")
