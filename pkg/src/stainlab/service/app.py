"""FastAPI application for the blinded reader study.

Readers see adjacent/synthetic singleplex pairs side by side with the arm
assignment hidden behind a seeded left/right shuffle, score each side's
staining categories, and can only see unblinded consensus once every
contributing session is complete.
"""

from __future__ import annotations

from pathlib import Path

from fastapi import FastAPI, HTTPException, Query
from fastapi.responses import PlainTextResponse
from fastapi.staticfiles import StaticFiles

from .schemas import (
    CATEGORIES,
    DEFAULT_CATEGORY,
    ConsensusReport,
    ConsensusRow,
    Health,
    NextPair,
    PairView,
    ScoreAck,
    ScoreSubmission,
    SessionRequest,
    SessionView,
)
from .store import StudyStore


def _pair_view(entry: dict) -> PairView:
    return PairView(
        pair=entry["pair"],
        fov=entry["fov"],
        left_url=f"/{entry['left']}",
        right_url=f"/{entry['right']}",
    )


def _session_view(doc: dict) -> SessionView:
    # Blinded projection: left_arm stays server-side.
    return SessionView(
        session_id=doc["id"],
        reader=doc["reader"],
        assay=doc["assay"],
        stain=doc["stain"],
        n_pairs=len(doc["pairs"]),
        cursor=doc["cursor"],
        status=doc["status"],
        pairs=[_pair_view(p) for p in doc["pairs"]],
    )


def create_app(study_dir: str | Path, frontend_dir: str | Path | None = None) -> FastAPI:
    """Build the service over an existing study directory.

    Raises NotReadyError when the directory holds no study; the CLI maps
    that to its dedicated exit code.
    """
    store = StudyStore(study_dir)
    app = FastAPI(title="stainlab review", version="1.0")
    app.state.store = store

    @app.get("/healthz", response_model=Health)
    def healthz():
        sessions = store.list_sessions()
        return Health(
            status="ok",
            n_pairs=len(store.pairs),
            n_sessions=len(sessions),
            n_open_sessions=sum(1 for s in sessions if s["status"] == "open"),
        )

    @app.post("/sessions", response_model=SessionView, status_code=201)
    def create_session(req: SessionRequest):
        doc = store.create_session(
            req.reader, req.assay, req.stain, fovs=req.fovs, seed=req.seed
        )
        if not doc:
            raise HTTPException(
                status_code=404,
                detail=f"no pairs for assay={req.assay!r} stain={req.stain!r}",
            )
        return _session_view(doc)

    def _session_or_404(session_id: str) -> dict:
        doc = store.load_session(session_id)
        if doc is None:
            raise HTTPException(status_code=404, detail=f"no session {session_id}")
        return doc

    @app.get("/sessions/{session_id}", response_model=SessionView)
    def session_info(session_id: str):
        return _session_view(_session_or_404(session_id))

    @app.get("/sessions/{session_id}/next", response_model=NextPair)
    def next_pair(session_id: str):
        doc = _session_or_404(session_id)
        entry = store.current_pair(doc)
        if entry is None:
            return NextPair(done=True, total=len(doc["pairs"]))
        return NextPair(
            done=False,
            pair=_pair_view(entry),
            index=doc["cursor"],
            total=len(doc["pairs"]),
        )

    @app.post("/sessions/{session_id}/scores", response_model=ScoreAck)
    def submit_scores(session_id: str, submission: ScoreSubmission):
        doc = _session_or_404(session_id)

        def ack(duplicate: bool, revision: bool) -> ScoreAck:
            return ScoreAck(
                session_id=session_id,
                pair=submission.pair,
                accepted=True,
                duplicate=duplicate,
                revision=revision,
                cursor=doc["cursor"],
                n_pairs=len(doc["pairs"]),
                status=doc["status"],
            )

        # Retry with an already-recorded submission id: acknowledge
        # without storing anything twice.
        if submission.submission_id in doc["submissions"]:
            prior = doc["submissions"][submission.submission_id]
            if prior != submission.pair:
                raise HTTPException(
                    status_code=409,
                    detail=(
                        f"submission_id {submission.submission_id} already "
                        f"used for pair {prior}"
                    ),
                )
            return ack(duplicate=True, revision=False)

        known = {p["pair"] for p in doc["pairs"]}
        if submission.pair not in known:
            raise HTTPException(
                status_code=409,
                detail=f"pair {submission.pair} is not part of this session",
            )
        scored = {p["pair"] for p in doc["pairs"][: doc["cursor"]]}
        current = store.current_pair(doc)
        if submission.pair in scored:
            # Revision: a fresh submission id superseding the earlier
            # record for an already-scored pair.  Append-only log keeps
            # both; consensus reads the latest.
            store.append_score(session_id, submission.model_dump())
            doc["submissions"][submission.submission_id] = submission.pair
            store.save_session(doc)
            return ack(duplicate=False, revision=True)
        if current is None or submission.pair != current["pair"]:
            expected = None if current is None else current["pair"]
            raise HTTPException(
                status_code=409,
                detail=f"out of order: expected pair {expected}, got {submission.pair}",
            )
        store.append_score(session_id, submission.model_dump())
        doc["submissions"][submission.submission_id] = submission.pair
        doc["cursor"] += 1
        if doc["cursor"] >= len(doc["pairs"]):
            doc["status"] = "complete"
        store.save_session(doc)
        return ack(duplicate=False, revision=False)

    @app.get("/reports/consensus", response_model=ConsensusReport)
    def consensus(category: str = Query(default=DEFAULT_CATEGORY)):
        if category not in CATEGORIES:
            raise HTTPException(
                status_code=422,
                detail=f"category must be one of {list(CATEGORIES)}",
            )
        blocking = store.referenced_open_sessions()
        if blocking:
            raise HTTPException(
                status_code=409,
                detail=f"cannot unblind while scored sessions are open: {sorted(blocking)}",
            )
        complete = store.complete_sessions()
        if not complete:
            raise HTTPException(status_code=409, detail="no complete sessions yet")
        rows = store.consensus(category)
        return ConsensusReport(
            category=category,
            n_sessions=len(complete),
            n_records=len(store.read_scores()),
            rows=[ConsensusRow(**row) for row in rows],
        )

    @app.get("/export")
    def export():
        """Blinded score log as NDJSON; safe to fetch at any time."""
        if not store.scores_path.exists():
            return PlainTextResponse("", media_type="application/x-ndjson")
        return PlainTextResponse(
            store.scores_path.read_text(), media_type="application/x-ndjson"
        )

    images_dir = store.root / "images"
    if images_dir.exists():
        app.mount("/images", StaticFiles(directory=images_dir), name="images")
    if frontend_dir is not None and Path(frontend_dir).exists():
        app.mount("/", StaticFiles(directory=frontend_dir, html=True), name="frontend")
    return app
