"""HTTP service: model upload, sessions, chat turns, trace retrieval.

Persistence is append-only newline-delimited JSON on local disk, one log per
session; a corrupt record quarantines only its own session. Model ids are
content-addressed (hash of the canonical serialization), so re-uploading the
same document reuses the cached description. Turns within a session are
strictly sequential: a second in-flight turn gets a busy error.
"""

from __future__ import annotations

import hashlib
import json
import os
import threading
import time
import uuid
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .agents import ChatPipeline, PipelineConfig
from .llm import StubLmClient
from .omif import parse_model, serialize_model
from .model import ModelIR, validate_model


@dataclass
class ServiceConfig:
    data_dir: str = "./data"
    lm_mode: str = "none"  # live | stub | none
    stub_path: Optional[str] = None
    lm_endpoint: Optional[str] = None
    lm_key: Optional[str] = None
    pipeline: PipelineConfig = field(default_factory=PipelineConfig)

    @staticmethod
    def from_env() -> "ServiceConfig":
        return ServiceConfig(
            data_dir=os.environ.get("OPTEXPLAIN_DATA_DIR", "./data"),
            lm_mode=os.environ.get("OPTEXPLAIN_LM_MODE", "none"),
            stub_path=os.environ.get("OPTEXPLAIN_STUB_PATH"),
            lm_endpoint=os.environ.get("OPTEXPLAIN_LM_ENDPOINT"),
            lm_key=os.environ.get("OPTEXPLAIN_LM_KEY"),
        )


class ServiceError(Exception):
    def __init__(self, status_code: int, message: str, detail=None):
        self.status_code = status_code
        self.message = message
        self.detail = detail
        super().__init__(message)


@dataclass
class Session:
    session_id: str
    model_id: str
    created_at: float
    turns: list[dict] = field(default_factory=list)  # {turn, user, answer, trace_id}
    quarantined: bool = False


class SessionStore:
    """Append-only session logs plus single-file traces."""

    def __init__(self, data_dir: str):
        self.root = Path(data_dir)
        (self.root / "sessions").mkdir(parents=True, exist_ok=True)
        (self.root / "traces").mkdir(parents=True, exist_ok=True)
        (self.root / "models").mkdir(parents=True, exist_ok=True)
        self._locks: dict[str, threading.Lock] = {}
        self._guard = threading.Lock()

    def _session_path(self, session_id: str) -> Path:
        return self.root / "sessions" / f"{session_id}.ndjson"

    def file_lock(self, session_id: str) -> threading.Lock:
        with self._guard:
            return self._locks.setdefault(session_id, threading.Lock())

    def create_session(self, session_id: str, model_id: str) -> Session:
        session = Session(session_id, model_id, created_at=time.time())
        record = {
            "meta": {"model_id": model_id, "created_at": session.created_at}
        }
        with self.file_lock(session_id):
            with open(self._session_path(session_id), "a", encoding="utf-8") as fh:
                fh.write(json.dumps(record, sort_keys=True) + "\n")
                fh.flush()
                os.fsync(fh.fileno())
        return session

    def append_turn(self, session_id: str, record: dict) -> None:
        with self.file_lock(session_id):
            with open(self._session_path(session_id), "a", encoding="utf-8") as fh:
                fh.write(json.dumps(record, sort_keys=True) + "\n")
                fh.flush()
                os.fsync(fh.fileno())

    def load_session(self, session_id: str) -> Optional[Session]:
        path = self._session_path(session_id)
        if not path.exists():
            return None
        session = Session(session_id, model_id="", created_at=0.0)
        try:
            with open(path, encoding="utf-8") as fh:
                for line_no, line in enumerate(fh):
                    line = line.strip()
                    if not line:
                        continue
                    record = json.loads(line)
                    if "meta" in record:
                        session.model_id = record["meta"]["model_id"]
                        session.created_at = record["meta"]["created_at"]
                    else:
                        session.turns.append(record)
        except (json.JSONDecodeError, KeyError, TypeError):
            session.quarantined = True
        return session

    def list_sessions(self) -> list[str]:
        return sorted(p.stem for p in (self.root / "sessions").glob("*.ndjson"))

    def save_trace(self, trace_id: str, payload: dict) -> None:
        path = self.root / "traces" / f"{trace_id}.json"
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, sort_keys=True)

    def load_trace(self, trace_id: str) -> Optional[dict]:
        path = self.root / "traces" / f"{trace_id}.json"
        if not path.exists():
            return None
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)

    def save_model(self, model_id: str, document: str, description: dict) -> None:
        with open(self.root / "models" / f"{model_id}.omif", "w", encoding="utf-8") as fh:
            fh.write(document)
        with open(self.root / "models" / f"{model_id}.desc.json", "w", encoding="utf-8") as fh:
            json.dump(description, fh, sort_keys=True)

    def load_model_document(self, model_id: str) -> Optional[str]:
        path = self.root / "models" / f"{model_id}.omif"
        if not path.exists():
            return None
        return path.read_text(encoding="utf-8")


def model_id_for(ir: ModelIR) -> str:
    canonical = serialize_model(ir)
    return "m" + hashlib.sha256(canonical.encode()).hexdigest()[:12]


class ExplainService:
    """Transport-independent core; the FastAPI app is a thin wrapper."""

    def __init__(self, config: ServiceConfig):
        self.config = config
        self.store = SessionStore(config.data_dir)
        self.models: dict[str, ChatPipeline] = {}
        self.sessions: dict[str, Session] = {}
        self.turn_locks: dict[str, threading.Lock] = {}
        self._guard = threading.Lock()
        self._load_existing_sessions()

    def _make_lm(self):
        if self.config.lm_mode == "stub":
            if not self.config.stub_path:
                raise ServiceError(500, "stub mode needs OPTEXPLAIN_STUB_PATH")
            return StubLmClient.from_path(self.config.stub_path)
        if self.config.lm_mode == "live":
            from .llm import LiveLmClient

            return LiveLmClient(self.config.lm_endpoint, self.config.lm_key)
        return None

    def _load_existing_sessions(self) -> None:
        for sid in self.store.list_sessions():
            session = self.store.load_session(sid)
            if session is not None:
                self.sessions[sid] = session

    # -- models ---------------------------------------------------------------

    def register_model(self, document: str) -> dict:
        result = parse_model(document)
        if not result.ok:
            raise ServiceError(
                422,
                "document did not parse",
                detail=[d.render() for d in result.diagnostics],
            )
        report = validate_model(result.model)
        if not report.ok:
            raise ServiceError(
                422,
                "model failed validation",
                detail=[f"{v.path}: {v.message}" for v in report.violations],
            )
        model_id = model_id_for(result.model)
        if model_id in self.models:
            pipeline = self.models[model_id]
        else:
            pipeline = ChatPipeline(
                result.model,
                lm=self._make_lm(),
                config=self.config.pipeline,
                model_id=model_id,
            )
            pipeline.illustrate()
            self.models[model_id] = pipeline
            description = {
                "narrative": pipeline.description.narrative,
                "troubleshooting": pipeline.description.troubleshooting,
                "component_table": pipeline.description.component_table,
            }
            self.store.save_model(model_id, serialize_model(result.model), description)
        desc = pipeline.description
        return {
            "model_id": model_id,
            "status": pipeline.baseline.status,
            "description": desc.narrative
            + (f"\n\n{desc.troubleshooting}" if desc.troubleshooting else ""),
        }

    def model_table(self, model_id: str) -> dict:
        pipeline = self.models.get(model_id)
        if pipeline is None:
            raise ServiceError(404, f"unknown model {model_id}")
        return pipeline.component_table()

    # -- sessions ---------------------------------------------------------------

    def create_session(self, model_id: str) -> dict:
        if model_id not in self.models:
            raise ServiceError(404, f"unknown model {model_id}")
        session_id = "s" + uuid.uuid4().hex[:12]
        session = self.store.create_session(session_id, model_id)
        self.sessions[session_id] = session
        return {"session_id": session_id}

    def get_session(self, session_id: str) -> dict:
        session = self.sessions.get(session_id)
        if session is None:
            raise ServiceError(404, f"unknown session {session_id}")
        if session.quarantined:
            raise ServiceError(
                409, f"session {session_id} is quarantined (corrupt log record)"
            )
        return {
            "session_id": session.session_id,
            "model_id": session.model_id,
            "turns": list(session.turns),
        }

    def handle_chat_turn(self, session_id: str, text: str) -> dict:
        session = self.sessions.get(session_id)
        if session is None:
            raise ServiceError(404, f"unknown session {session_id}")
        if session.quarantined:
            raise ServiceError(409, f"session {session_id} is quarantined")
        pipeline = self.models.get(session.model_id)
        if pipeline is None:
            # Rebuild from the stored document after a restart.
            document = self.store.load_model_document(session.model_id)
            if document is None:
                raise ServiceError(410, f"model {session.model_id} is gone")
            parsed = parse_model(document)
            validate_model(parsed.model)
            pipeline = ChatPipeline(
                parsed.model,
                lm=self._make_lm(),
                config=self.config.pipeline,
                model_id=session.model_id,
            )
            pipeline.illustrate()
            self.models[session.model_id] = pipeline

        with self._guard:
            lock = self.turn_locks.setdefault(session_id, threading.Lock())
        if not lock.acquire(blocking=False):
            raise ServiceError(
                429, "a turn is already in flight for this session; retry shortly"
            )
        try:
            turn = pipeline.run_turn(text)
            trace_id = turn.trace.trace_id
            self.store.save_trace(trace_id, turn.trace.to_json())
            record = {
                "turn": len(session.turns),
                "user": text,
                "answer": turn.answer,
                "trace_id": trace_id,
            }
            self.store.append_turn(session_id, record)
            session.turns.append(record)
            return {"answer": turn.answer, "trace_id": trace_id}
        finally:
            lock.release()

    def get_trace(self, trace_id: str) -> dict:
        trace = self.store.load_trace(trace_id)
        if trace is None:
            raise ServiceError(404, f"unknown trace {trace_id}")
        return trace


def create_app(config: Optional[ServiceConfig] = None) -> FastAPI:
    """FastAPI application exposing the HTTP API (see docs/http_api.md)."""
    service = ExplainService(config or ServiceConfig.from_env())
    app = FastAPI(title="optexplain", version="0.1.0")
    app.state.service = service

    @app.exception_handler(ServiceError)
    async def service_error_handler(request: Request, exc: ServiceError):
        return JSONResponse(
            status_code=exc.status_code,
            content={"error": exc.message, "detail": exc.detail},
        )

    @app.post("/api/models")
    async def register_model(request: Request):
        body = await request.body()
        content_type = request.headers.get("content-type", "")
        if "json" in content_type:
            try:
                payload = json.loads(body)
            except json.JSONDecodeError:
                raise ServiceError(400, "invalid JSON body")
            document = payload.get("document", "")
        else:
            document = body.decode("utf-8", errors="replace")
        if not document.strip():
            raise ServiceError(400, "empty document")
        return service.register_model(document)

    @app.get("/api/models/{model_id}")
    async def model_table(model_id: str):
        return service.model_table(model_id)

    @app.post("/api/models/{model_id}/sessions")
    async def create_session(model_id: str):
        return service.create_session(model_id)

    @app.post("/api/sessions/{session_id}/messages")
    async def post_message(session_id: str, request: Request):
        try:
            payload = json.loads(await request.body())
        except json.JSONDecodeError:
            raise ServiceError(400, "invalid JSON body")
        text = payload.get("text", "")
        if not isinstance(text, str) or not text.strip():
            raise ServiceError(400, "missing 'text'")
        return service.handle_chat_turn(session_id, text)

    @app.get("/api/sessions/{session_id}")
    async def get_session(session_id: str):
        return service.get_session(session_id)

    @app.get("/api/traces/{trace_id}")
    async def get_trace(trace_id: str):
        return service.get_trace(trace_id)

    frontend_dir = Path(__file__).resolve().parents[2] / "frontend" / "dist"
    if frontend_dir.exists():
        from starlette.responses import RedirectResponse
        from starlette.staticfiles import StaticFiles

        app.mount("/ui", StaticFiles(directory=str(frontend_dir), html=True), name="ui")

        @app.get("/")
        async def index():
            return RedirectResponse(url="/ui/")

    return app
