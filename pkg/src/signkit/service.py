"""Annotation service: sessions, candidate retrieval, finalized records.

Pipeline per session: the annotator submits a bounding box plus attribute
query; the query runs against the session's region sub-graph; when the
result exceeds the candidate threshold and a patch is supplied and an
encoder model is loaded, the ranker re-orders and truncates the list.
Final selections are enriched from the sub-graph and appended to the
annotation log (missing-sign records also go to the feedback log).

The logs are the source of truth: one JSON record per line, append-only,
replayable after restart. Appends are serialized through a single lock;
candidate retrieval is read-only and may run concurrently.
"""

from __future__ import annotations

import base64
import binascii
import json
import threading
import uuid
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Iterator, Mapping

from . import ranker, rso
from .kgstore import KnowledgeGraph, domain_subgraph, sign_to_json
from .query import QueryError, evaluate, parse_query

DEFAULT_THRESHOLD = 10

SOURCE_KG_ONLY = "kg-only"
SOURCE_KG_VPE = "kg+vpe"

STATE_OPEN = "open"
STATE_ANNOTATING = "annotating"
STATE_CLOSED = "closed"


class ServiceError(Exception):
    """Domain error with a machine-readable code and an HTTP status."""

    def __init__(self, code: str, message: str, status: int = 400):
        super().__init__(message)
        self.code = code
        self.status = status


@dataclass
class Session:
    id: str
    image_ref: str
    region: str
    created_at: str
    state: str = STATE_OPEN
    last_query: str = ""

    def advance(self, target: str) -> None:
        order = (STATE_OPEN, STATE_ANNOTATING, STATE_CLOSED)
        if order.index(target) < order.index(self.state):
            raise ServiceError("bad-state", f"cannot move {self.state} -> {target}", 409)
        self.state = target

    def to_json(self) -> dict:
        return {"id": self.id, "image_ref": self.image_ref, "region": self.region,
                "created_at": self.created_at, "state": self.state}


@dataclass(frozen=True)
class CandidateResponse:
    candidates: tuple[dict, ...]  # {"sign_id", "prototype_image_ref", "score"?}
    source: str
    kg_size: int
    warning: str | None = None

    def to_json(self) -> dict:
        out = {"candidates": list(self.candidates), "source": self.source,
               "kg_size": self.kg_size}
        if self.warning is not None:
            out["warning"] = self.warning
        return out


@dataclass(frozen=True)
class AnnotationRecord:
    session_id: str
    image_ref: str
    bbox: tuple[float, float, float, float]
    sign_id: str
    attributes_provided: str  # canonical query text, "" if none submitted
    missing_sign: bool
    enrichment: dict
    created_at: str

    def to_json(self) -> dict:
        return {
            "session_id": self.session_id,
            "image_ref": self.image_ref,
            "bbox": list(self.bbox),
            "sign_id": self.sign_id,
            "attributes_provided": self.attributes_provided,
            "missing_sign": self.missing_sign,
            "enrichment": self.enrichment,
            "created_at": self.created_at,
        }

    def to_json_line(self) -> str:
        return json.dumps(self.to_json(), ensure_ascii=False, separators=(",", ":"))

    @classmethod
    def from_json(cls, obj: dict) -> "AnnotationRecord":
        return cls(
            session_id=obj["session_id"],
            image_ref=obj["image_ref"],
            bbox=tuple(obj["bbox"]),
            sign_id=obj["sign_id"],
            attributes_provided=obj["attributes_provided"],
            missing_sign=obj["missing_sign"],
            enrichment=obj["enrichment"],
            created_at=obj["created_at"],
        )


def replay_log(path: str | Path) -> tuple[list[AnnotationRecord], list[str]]:
    """Read records in append order; a torn final line is reported, not
    fatal, and all preceding records are returned."""
    path = Path(path)
    if not path.exists():
        return [], []
    records: list[AnnotationRecord] = []
    warnings: list[str] = []
    data = path.read_text("utf-8")
    lines = data.split("\n")
    trailing = lines.pop()  # text after the last newline; "" when intact
    for lineno, line in enumerate(lines, start=1):
        if not line:
            continue
        try:
            records.append(AnnotationRecord.from_json(json.loads(line)))
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            warnings.append(f"line {lineno}: corrupt record ({exc})")
    if trailing:
        warnings.append("torn final line dropped")
    return records, warnings


def _validate_bbox(bbox) -> tuple[float, float, float, float]:
    try:
        x, y, w, h = (float(v) for v in bbox)
    except (TypeError, ValueError):
        raise ServiceError("bad-bbox", "bbox must be four numbers (x, y, w, h)") from None
    if w <= 0 or h <= 0:
        raise ServiceError("bad-bbox", "bbox width and height must be positive")
    return (x, y, w, h)


class _LazyPrototypes(Mapping):
    """Loads prototype images on demand from the graph's image refs."""

    def __init__(self, kg: KnowledgeGraph, image_root: Path):
        self._kg = kg
        self._root = image_root

    def __getitem__(self, sign_id: str) -> ranker.ImagePatch:
        sign = self._kg.signs[sign_id]
        ref = Path(sign.prototype_image_color)
        path = ref if ref.is_absolute() else self._root / ref
        try:
            return ranker.ImagePatch.from_png(path)
        except OSError as exc:
            raise ServiceError("prototype-unreadable",
                               f"cannot read prototype for {sign_id}: {exc}", 500) from None

    def __contains__(self, sign_id) -> bool:
        return sign_id in self._kg.signs

    def __iter__(self) -> Iterator[str]:
        return iter(self._kg.signs)

    def __len__(self) -> int:
        return len(self._kg.signs)


class AnnotationService:
    """State and operations behind the HTTP surface; usable directly."""

    def __init__(
        self,
        kg: KnowledgeGraph,
        model: ranker.EncoderModel | None = None,
        *,
        candidate_threshold: int = DEFAULT_THRESHOLD,
        data_dir: str | Path,
        image_root: str | Path | None = None,
        now: Callable[[], datetime] | None = None,
    ):
        self.kg = kg
        self.model = model
        self.candidate_threshold = candidate_threshold
        self.data_dir = Path(data_dir)
        self.data_dir.mkdir(parents=True, exist_ok=True)
        self.image_root = Path(image_root) if image_root is not None else self.data_dir
        self.annotation_log = self.data_dir / "annotations.jsonl"
        self.feedback_log = self.data_dir / "feedback.jsonl"
        self._now = now or (lambda: datetime.now(timezone.utc))
        self._sessions: dict[str, Session] = {}
        self._subgraphs: dict[str, KnowledgeGraph] = {}
        self._idempotency: dict[tuple[str, str], AnnotationRecord] = {}
        self._lock = threading.Lock()
        self._embedding_cache = ranker.EmbeddingCache()
        self.records, self.replay_warnings = replay_log(self.annotation_log)

    # -- helpers -------------------------------------------------------

    def _timestamp(self) -> str:
        return self._now().isoformat()

    def _session(self, session_id: str) -> Session:
        try:
            return self._sessions[session_id]
        except KeyError:
            raise ServiceError("unknown-session", f"no session {session_id!r}", 404) from None

    def subgraph(self, region: str) -> KnowledgeGraph:
        """Region sub-graph, falling back to the generic graph when the
        region has no signs."""
        key = region.strip().casefold()
        with self._lock:
            cached = self._subgraphs.get(key)
        if cached is not None:
            return cached
        sub = domain_subgraph(self.kg, region)
        if len(sub) == 0:
            sub = self.kg
        with self._lock:
            return self._subgraphs.setdefault(key, sub)

    # -- operations ----------------------------------------------------

    def create_session(self, image_ref: str, region: str) -> Session:
        if not image_ref or not image_ref.strip():
            raise ServiceError("unreadable-image", "image_ref must be non-empty")
        session = Session(
            id=uuid.uuid4().hex,
            image_ref=image_ref,
            region=region,
            created_at=self._timestamp(),
        )
        self._sessions[session.id] = session
        return session

    def get_candidates(
        self,
        session_id: str,
        bbox,
        query_text: str,
        patch: ranker.ImagePatch | None = None,
    ) -> CandidateResponse:
        session = self._session(session_id)
        if session.state == STATE_CLOSED:
            raise ServiceError("session-closed", "session is closed", 409)
        _validate_bbox(bbox)
        query = parse_query(query_text)  # QueryError surfaces with offset
        sub = self.subgraph(session.region)
        result = evaluate(query, sub)
        kg_size = result.size

        warning: str | None = None
        if kg_size > self.candidate_threshold and patch is not None:
            if self.model is None:
                warning = "model-not-loaded"
                entries = tuple(self._entry(sub, sid) for sid in result.sign_ids)
                source = SOURCE_KG_ONLY
            else:
                ranked = ranker.rank(
                    self.model, patch, result.sign_ids,
                    _LazyPrototypes(sub, self.image_root),
                    k=self.candidate_threshold, cache=self._embedding_cache,
                )
                entries = tuple(
                    self._entry(sub, sid, score) for sid, score in ranked.entries)
                source = SOURCE_KG_VPE
        else:
            entries = tuple(self._entry(sub, sid) for sid in result.sign_ids)
            source = SOURCE_KG_ONLY

        session.advance(STATE_ANNOTATING)
        session.last_query = query.to_text()
        return CandidateResponse(entries, source, kg_size, warning)

    def _entry(self, sub: KnowledgeGraph, sign_id: str, score: float | None = None) -> dict:
        entry = {"sign_id": sign_id,
                 "prototype_image_ref": sub.signs[sign_id].prototype_image_color}
        if score is not None:
            entry["score"] = score
        return entry

    def finalize_annotation(
        self,
        session_id: str,
        bbox,
        sign_id: str,
        missing_sign: bool = False,
        idempotency_key: str | None = None,
    ) -> AnnotationRecord:
        session = self._session(session_id)
        if idempotency_key is not None:
            existing = self._idempotency.get((session_id, idempotency_key))
            if existing is not None:
                return existing
        if session.state == STATE_CLOSED:
            raise ServiceError("session-closed", "session is closed", 409)
        bbox = _validate_bbox(bbox)
        sub = self.subgraph(session.region)
        if sign_id not in sub.signs:
            raise ServiceError("unknown-sign", f"no sign {sign_id!r} in this sub-graph", 404)

        record = AnnotationRecord(
            session_id=session_id,
            image_ref=session.image_ref,
            bbox=bbox,
            sign_id=sign_id,
            attributes_provided=session.last_query,
            missing_sign=missing_sign,
            enrichment=self.enrichment(sub, sign_id),
            created_at=self._timestamp(),
        )
        line = record.to_json_line() + "\n"
        with self._lock:
            with open(self.annotation_log, "a", encoding="utf-8") as log:
                log.write(line)
            if missing_sign:
                with open(self.feedback_log, "a", encoding="utf-8") as log:
                    log.write(line)
            self.records.append(record)
            if idempotency_key is not None:
                self._idempotency[(session_id, idempotency_key)] = record
        session.advance(STATE_ANNOTATING)
        session.advance(STATE_CLOSED)
        return record

    def enrichment(self, sub: KnowledgeGraph, sign_id: str) -> dict:
        """Attributes of the selected sign pulled from the sub-graph:
        class name, description when present, colors, shape, text."""
        sign = sub.signs[sign_id]
        categories = sorted(
            str(f.object) for f in sub.subject_facts(sign_id)
            if f.predicate == rso.P_CATEGORY)
        descriptions = sorted(
            str(f.object) for f in sub.subject_facts(sign_id)
            if f.predicate == rso.P_DESCRIPTION)
        out: dict = {}
        if categories:
            out["class_name"] = categories[0]
        if descriptions:
            out["description"] = descriptions[0]
        out["plate_shape"] = sign.plate_shape
        out["background_color"] = sign.background_color
        if sign.foreground_color is not None:
            out["foreground_color"] = sign.foreground_color
        if sign.border_color is not None:
            out["border_color"] = sign.border_color
        out["texts"] = [t.raw for t in sign.texts]
        return out

    def sign_json(self, sign_id: str) -> dict:
        if sign_id not in self.kg.signs:
            raise ServiceError("unknown-sign", f"no sign {sign_id!r}", 404)
        return sign_to_json(self.kg.signs[sign_id])

    def prototype_path(self, sign_id: str) -> Path:
        if sign_id not in self.kg.signs:
            raise ServiceError("unknown-sign", f"no sign {sign_id!r}", 404)
        ref = Path(self.kg.signs[sign_id].prototype_image_color)
        return ref if ref.is_absolute() else self.image_root / ref

    def list_signs(self, region: str, query_text: str) -> dict:
        sub = self.subgraph(region) if region else self.kg
        if query_text:
            result = evaluate(parse_query(query_text), sub)
            ids = result.sign_ids
        else:
            ids = sub.sign_ids
        return {"sign_ids": list(ids), "size": len(ids)}

    def vocabularies(self) -> dict:
        return {name: list(vocab.members) for name, vocab in self.kg.registry.items()}


def decode_patch(encoded: str) -> ranker.ImagePatch:
    """Decode a base64 PNG patch from a request body."""
    try:
        raw = base64.b64decode(encoded, validate=True)
        return ranker.ImagePatch.from_png(raw)
    except (binascii.Error, ranker.PatchError, OSError, ValueError) as exc:
        raise ServiceError("bad-patch", f"cannot decode patch: {exc}") from None


from pydantic import BaseModel


class SessionBody(BaseModel):
    image_ref: str
    region: str = ""


class CandidatesBody(BaseModel):
    bbox: list[float]
    q: str
    patch: str | None = None  # base64 PNG


class AnnotationBody(BaseModel):
    bbox: list[float]
    sign_id: str
    missing_sign: bool = False
    idempotency_key: str | None = None


def create_app(service: AnnotationService):
    """FastAPI wiring around an AnnotationService."""
    from fastapi import FastAPI, Request
    from fastapi.middleware.cors import CORSMiddleware
    from fastapi.responses import FileResponse, JSONResponse

    app = FastAPI(title="road-sign annotation service")
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"])

    @app.exception_handler(ServiceError)
    async def _service_error(_request: Request, exc: ServiceError):
        return JSONResponse(status_code=exc.status,
                            content={"error": exc.code, "message": str(exc)})

    @app.exception_handler(QueryError)
    async def _query_error(_request: Request, exc: QueryError):
        return JSONResponse(status_code=400,
                            content={"error": "query-syntax", "message": str(exc),
                                     "offset": exc.offset})

    @app.post("/sessions", status_code=201)
    def create_session(body: SessionBody):
        return service.create_session(body.image_ref, body.region).to_json()

    @app.post("/sessions/{session_id}/candidates")
    def get_candidates(session_id: str, body: CandidatesBody):
        patch = decode_patch(body.patch) if body.patch else None
        return service.get_candidates(session_id, body.bbox, body.q, patch).to_json()

    @app.post("/sessions/{session_id}/annotations", status_code=201)
    def finalize(session_id: str, body: AnnotationBody):
        record = service.finalize_annotation(
            session_id, body.bbox, body.sign_id, body.missing_sign,
            body.idempotency_key)
        return record.to_json()

    @app.get("/signs")
    def list_signs(region: str = "", q: str = ""):
        return service.list_signs(region, q)

    @app.get("/signs/{sign_id}")
    def get_sign(sign_id: str):
        return service.sign_json(sign_id)

    @app.get("/signs/{sign_id}/prototype")
    def get_prototype(sign_id: str):
        path = service.prototype_path(sign_id)
        if not path.exists():
            raise ServiceError("prototype-unreadable", f"missing file {path}", 404)
        return FileResponse(path, media_type="image/png")

    @app.get("/vocabularies")
    def vocabularies():
        return service.vocabularies()

    @app.get("/healthz")
    def healthz():
        return {"status": "ok", "signs": len(service.kg),
                "model_loaded": service.model is not None,
                "candidate_threshold": service.candidate_threshold}

    return app
