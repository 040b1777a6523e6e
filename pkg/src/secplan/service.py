"""HTTP service exposing the engine.

Single-tenant, loopback-by-default companion to the CLI: both surfaces call
the same Engine, so artifacts are byte-identical however a pipeline is
driven. Long-running steps (policy mining, plan generation) run in a
background thread and report progress through the session status resource;
errors surface as structured ApiError bodies with stable machine codes.

Per-session mutation is serialized by an in-process lock on top of the
store's single-writer rule; read endpoints never take the lock.
"""

from __future__ import annotations

import json
import logging
import os
import threading
from dataclasses import dataclass, field
from pathlib import Path

from fastapi import FastAPI, Request, Response
from fastapi.responses import JSONResponse

from secplan import __version__
from secplan import session_store as store
from secplan.engine import Engine, EngineConfig
from secplan.errors import EngineError, UsageError
from secplan.session_store import Session
from secplan.testplan_agent import CAPABILITY_BANK
from secplan.threat_agent import THREAT_BANK, ScriptedAnswerSource, fold_bank, fold_flow1

log = logging.getLogger(__name__)

# HTTP status per error code: client mistakes 4xx, state conflicts 409,
# upstream-provider trouble 502/504, engine faults 500.
_STATUS_BY_CODE = {
    "empty_document": 422,
    "decode_failure": 422,
    "invalid_chunk_params": 422,
    "dimension_mismatch": 422,
    "duplicate_chunk": 409,
    "invalid_query": 422,
    "provider_error": 502,
    "timeout": 504,
    "missing_binding": 500,
    "unknown_placeholder": 500,
    "schema_violation": 502,
    "no_structured_content": 502,
    "unscripted_prompt": 500,
    "empty_knowledge_base": 409,
    "pending_answer": 409,
    "not_presented": 409,
    "empty_answer": 422,
    "empty_spec_index": 409,
    "empty_isa_index": 409,
    "terminal_session": 409,
    "storage_failure": 500,
    "unknown_session": 404,
    "corrupt_log": 500,
    "usage": 400,
    "missing_artifact": 404,
    "busy": 409,
    "engine_error": 500,
}


class BusyError(EngineError):
    code = "busy"


@dataclass
class JobState:
    busy: bool = False
    step: str = ""
    error: dict | None = None


@dataclass
class SessionHandle:
    session: Session
    lock: threading.Lock = field(default_factory=threading.Lock)
    job: JobState = field(default_factory=JobState)


def _query_payload(result: dict) -> dict:
    query = result.get("query")
    return {
        "bank": result.get("bank"),
        "done": query is None,
        "query": None
        if query is None
        else {"query_id": query.query_id, "text": query.text, "optional": query.optional},
    }


def create_app(root: str | Path, config: EngineConfig | None = None) -> FastAPI:
    engine = Engine(root, config)
    app = FastAPI(title="secplan", version=__version__)
    handles: dict[str, SessionHandle] = {}
    handles_lock = threading.Lock()

    def handle_for(session_id: str) -> SessionHandle:
        with handles_lock:
            handle = handles.get(session_id)
            if handle is None:
                handle = SessionHandle(session=engine.load_session(session_id))
                handles[session_id] = handle
            return handle

    @app.exception_handler(EngineError)
    async def engine_error_handler(_request: Request, err: EngineError):
        return JSONResponse(
            status_code=_STATUS_BY_CODE.get(err.code, 500),
            content={"code": err.code, "message": err.message, "details": err.details},
        )

    # -- session lifecycle -------------------------------------------------

    @app.get("/health")
    def health():
        return {"status": "ok", "version": __version__}

    @app.post("/sessions", status_code=201)
    def create_session(body: dict):
        flow = body.get("flow")
        if flow not in store.FLOWS:
            raise UsageError(f"flow must be one of {list(store.FLOWS)}")
        session = engine.create_session(flow)
        with handles_lock:
            handles[session.session_id] = SessionHandle(session=session)
        return {"session_id": session.session_id, "flow": session.flow, "phase": session.phase}

    @app.get("/sessions")
    def list_sessions():
        return {"sessions": engine.store.list_sessions()}

    def _status_body(handle: SessionHandle) -> dict:
        session = handle.session
        flow1 = fold_flow1(session) if session.flow == store.FLOW_PHYSICAL else None
        by_status: dict[str, int] = {}
        if flow1:
            for threat in flow1.threats.values():
                by_status[threat.status] = by_status.get(threat.status, 0) + 1
        pending = engine.pending(session)
        return {
            "session_id": session.session_id,
            "flow": session.flow,
            "phase": session.phase,
            "busy": handle.job.busy,
            "step": handle.job.step,
            "error": handle.job.error,
            "events": len(session.events),
            "pending": None if pending is None else _query_payload(pending),
            "threats_by_status": by_status,
            "transcript_length": len(fold_bank(session, THREAT_BANK).transcript),
            "capability_answers": len(fold_bank(session, CAPABILITY_BANK).transcript),
            "has_plan": session.read_artifact("test_plan.json") is not None
            or bool(session.events_of_kind(store.PLAN_EMITTED)),
        }

    @app.get("/sessions/{session_id}")
    def get_session(session_id: str):
        return _status_body(handle_for(session_id))

    @app.get("/sessions/{session_id}/status")
    def get_status(session_id: str):
        return _status_body(handle_for(session_id))

    # -- documents -----------------------------------------------------------

    @app.post("/sessions/{session_id}/documents", status_code=201)
    def ingest_document(session_id: str, body: dict):
        handle = handle_for(session_id)
        for name in ("kind", "title", "text"):
            if name not in body:
                raise UsageError(f"missing field {name!r}")
        with handle.lock:
            doc = engine.ingest(handle.session, body["text"], body["kind"], body["title"])
        return {
            "doc_id": doc.doc_id,
            "kind": doc.kind.value,
            "title": doc.title,
            "byte_length": doc.byte_length,
        }

    # -- interactive interview ------------------------------------------------

    @app.post("/sessions/{session_id}/flow1/start")
    def start_flow1(session_id: str):
        handle = handle_for(session_id)
        with handle.lock:
            _ensure_not_busy(handle)
            return _query_payload(engine.ask(handle.session))

    @app.post("/sessions/{session_id}/queries/next")
    def next_query(session_id: str):
        handle = handle_for(session_id)
        with handle.lock:
            _ensure_not_busy(handle)
            return _query_payload(engine.ask(handle.session))

    @app.get("/sessions/{session_id}/queries/pending")
    def pending_query(session_id: str):
        handle = handle_for(session_id)
        pending = engine.pending(handle.session)
        if pending is None:
            return {"bank": None, "done": False, "query": None}
        return _query_payload(pending)

    @app.post("/sessions/{session_id}/answers")
    def post_answer(session_id: str, body: dict):
        handle = handle_for(session_id)
        if "answer" not in body:
            raise UsageError("missing field 'answer'")
        with handle.lock:
            _ensure_not_busy(handle)
            result = engine.answer(
                handle.session, body.get("query_id", ""), body["answer"]
            )
        return {
            "bank": result["bank"],
            "recorded": result["recorded"],
            "queries_removed": result["queries_removed"],
        }

    # -- background steps -------------------------------------------------------

    def _ensure_not_busy(handle: SessionHandle):
        if handle.job.busy:
            raise BusyError(f"session {handle.session.session_id} is running step {handle.job.step}")

    def _spawn(handle: SessionHandle, step: str, work):
        _ensure_not_busy(handle)
        handle.job = JobState(busy=True, step=step)

        def runner():
            with handle.lock:
                try:
                    work()
                    handle.job = JobState(busy=False, step=step)
                except EngineError as err:
                    log.warning("background %s failed: %s", step, err.message)
                    handle.job = JobState(
                        busy=False,
                        step=step,
                        error={"code": err.code, "message": err.message},
                    )
                except Exception as err:  # pragma: no cover - defensive
                    log.exception("background %s crashed", step)
                    handle.job = JobState(
                        busy=False, step=step, error={"code": "engine_error", "message": str(err)}
                    )

        threading.Thread(target=runner, name=f"secplan-{step}", daemon=True).start()

    @app.post("/sessions/{session_id}/flow2/run", status_code=202)
    def run_flow2(session_id: str):
        handle = handle_for(session_id)
        with handle.lock:
            _spawn(handle, "flow2", lambda: engine.run_flow2(handle.session))
        return {"status": "started", "poll": f"/sessions/{session_id}/status"}

    @app.post("/sessions/{session_id}/plan/run", status_code=202)
    def run_plan(session_id: str, body: dict | None = None):
        handle = handle_for(session_id)
        records = (body or {}).get("answers", [])
        source = ScriptedAnswerSource(records)
        with handle.lock:
            _spawn(handle, "plan", lambda: engine.generate_plan(handle.session, source))
        return {"status": "started", "poll": f"/sessions/{session_id}/status"}

    # -- live views and exports ---------------------------------------------------

    @app.get("/sessions/{session_id}/threats")
    def get_threats(session_id: str):
        handle = handle_for(session_id)
        if handle.session.flow != store.FLOW_PHYSICAL:
            raise UsageError("threat list exists only for physical/supply-chain sessions")
        return json.loads(engine.export(handle.session, "threats", "json"))

    @app.get("/sessions/{session_id}/policies")
    def get_policies(session_id: str):
        handle = handle_for(session_id)
        return engine._policy_artifact(handle.session)

    @app.get("/sessions/{session_id}/plan")
    def get_plan(session_id: str):
        handle = handle_for(session_id)
        return engine._stored_plan(handle.session).to_dict()

    @app.get("/sessions/{session_id}/transcript")
    def get_transcript(session_id: str):
        handle = handle_for(session_id)
        out = {}
        for bank in (THREAT_BANK, CAPABILITY_BANK):
            out[bank] = [
                {"query_id": e.query_id, "query": e.query_text, "answer": e.answer_text}
                for e in fold_bank(handle.session, bank).transcript
            ]
        return out

    @app.get("/sessions/{session_id}/artifacts/{artifact}")
    def download_artifact(session_id: str, artifact: str, format: str = "json"):
        handle = handle_for(session_id)
        data = engine.export(handle.session, artifact, format)
        media = "text/markdown" if format in ("markdown", "markdown_report") else "application/json"
        return Response(content=data, media_type=media)

    # -- optional static UI -----------------------------------------------------

    ui_dir = Path(os.environ.get("SECPLAN_UI_DIR", "frontend"))
    if ui_dir.is_dir() and (ui_dir / "index.html").exists():
        from fastapi.staticfiles import StaticFiles

        app.mount("/ui", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app
