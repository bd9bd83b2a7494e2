"""Network session host: HTTP creation/health, one WebSocket per session.

Every session owns an append-only message log with strictly increasing
sequence numbers and a single worker that serializes advance() calls, so
rapid utterances queue instead of interleaving. The WebSocket delivers
log entries in order, exactly once across reconnects; on reconnect a
snapshot (phase_changed + display_state) is appended so the client can
rebuild its view.

Wire message: {"kind", "session_id", "seq", "payload"} as JSON text frames.
Kinds: customer_utterance (client -> server), speech_segment,
display_state, action_cue, phase_changed, session_closed, error.
"""

from __future__ import annotations

import asyncio
import contextlib
import json
import logging
import uuid
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from fastapi import FastAPI, WebSocket, WebSocketDisconnect
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

from .config import Resources, ServerConfig, load_resources
from .display import DisplayMode, DisplayState
from .knowledge import RoutePlan, Schedule
from .llm import (
    BackendError,
    BackendHandle,
    EchoMockBackend,
    LLMGateway,
    ScriptedMockBackend,
    build_backend,
    load_script_lines,
)
from .session import (
    SessionEngine,
    SessionNotActiveError,
    SessionStatus,
    TravelPlan,
    TurnResult,
)
from .transcript import write_transcript

logger = logging.getLogger(__name__)


class ServiceError(Exception):
    code = "error"


class UnknownSessionError(ServiceError):
    code = "unknown-session"


class SessionInactiveError(ServiceError):
    code = "session-not-active"


class UtteranceRejectedError(ServiceError):
    code = "utterance-rejected"


class CapacityExceededError(ServiceError):
    code = "capacity-exceeded"


@dataclass
class WireMessage:
    kind: str
    session_id: str
    seq: int
    payload: dict[str, Any]

    def to_json(self) -> str:
        return json.dumps(
            {"kind": self.kind, "session_id": self.session_id, "seq": self.seq, "payload": self.payload},
            ensure_ascii=False,
        )


# -- payload encoding ---------------------------------------------------------

def encode_display(state: DisplayState) -> dict[str, Any]:
    payload: dict[str, Any] = {
        "mode": state.mode.value,
        "turn_index": state.turn_index,
        "show_maps": state.show_maps,
        "slots": [
            {
                "name": card.spot.name,
                "furigana": card.spot.furigana,
                "image": card.spot.image_ref,
                "lat": card.spot.lat,
                "lon": card.spot.lon,
                "shown_since_turn": card.shown_since_turn,
            }
            for card in state.slots
        ],
        "course": None,
    }
    if state.mode is DisplayMode.COURSE_LIST and state.course is not None:
        payload["course"] = {
            "id": state.course.course_id,
            "title": state.course.title,
            "images": list(state.course.hero_images),
        }
    return payload


def encode_route(route: RoutePlan) -> dict[str, Any]:
    return {
        "legs": [
            {
                "from": leg.origin,
                "to": leg.destination,
                "mode": leg.mode,
                "minutes": leg.minutes,
                "line": leg.line_name,
                "fare": leg.fare_yen,
            }
            for leg in route.legs
        ],
        "total_minutes": route.total_minutes,
        "narrative": route.narrative,
        "approximate": route.approximate,
    }


def encode_schedule(schedule: Schedule) -> dict[str, Any]:
    return {
        "entries": [
            {"start": f"{e.start:%H:%M}", "end": f"{e.end:%H:%M}", "activity": e.activity}
            for e in schedule.entries
        ],
        "start": f"{schedule.start_time:%H:%M}",
        "end": f"{schedule.end_time:%H:%M}",
    }


def encode_plan(plan: TravelPlan) -> dict[str, Any]:
    return {
        "spots": [
            {"name": s.name, "furigana": s.furigana, "image": s.image_ref, "lat": s.lat, "lon": s.lon}
            for s in plan.spots
        ],
        "route": encode_route(plan.route),
        "schedule": encode_schedule(plan.schedule),
    }


# -- session runtime ----------------------------------------------------------

@dataclass
class SessionRuntime:
    engine: SessionEngine
    inbox: asyncio.Queue
    messages: list[str] = field(default_factory=list)
    delivered: int = 0
    seq: int = 0
    wakeup: asyncio.Event = field(default_factory=asyncio.Event)
    worker: asyncio.Task | None = None
    attached: bool = False

    @property
    def session_id(self) -> str:
        return self.engine.state.session_id

    def emit(self, kind: str, payload: dict[str, Any]) -> WireMessage:
        message = WireMessage(kind=kind, session_id=self.session_id, seq=self.seq, payload=payload)
        self.seq += 1
        self.messages.append(message.to_json())
        self.wakeup.set()
        return message


class SessionHost:
    """Owns all sessions. Methods run on the event-loop thread; the engine
    work itself is pushed to a worker thread per call."""

    def __init__(self, config: ServerConfig, resources: Resources | None = None) -> None:
        self.config = config
        self.resources = resources or load_resources(config)
        self.sessions: dict[str, SessionRuntime] = {}
        self._script: list[str] | None = None
        if config.backend_kind == "scripted-mock" and config.script_path:
            self._script = load_script_lines(config.script_path)

    # Each session gets its own backend instance: mocks carry replay state.
    def _make_gateway(self) -> LLMGateway:
        cfg = self.config
        if cfg.backend_kind == "scripted-mock":
            if self._script is None:
                raise ServiceError("scripted-mock backend requires script_path")
            backend = ScriptedMockBackend(list(self._script))
        elif cfg.backend_kind == "echo-mock":
            backend = EchoMockBackend()
        else:
            handle = BackendHandle(
                kind=cfg.backend_kind,
                model_id=cfg.model_id,
                timeout=cfg.backend_timeout,
                max_retries=cfg.max_retries,
            )
            backend = build_backend(handle, base_url=cfg.api_base, api_key=cfg.api_key())
        return LLMGateway(backend, punctuation=cfg.punctuation, max_retries=cfg.max_retries)

    def active_count(self) -> int:
        return sum(
            1 for s in self.sessions.values() if s.engine.state.status is SessionStatus.ACTIVE
        )

    def create_session(self) -> SessionRuntime:
        """Open a session: greeting generated, bow cued, messages buffered."""
        if self.active_count() >= self.config.max_sessions:
            raise CapacityExceededError(
                f"at capacity ({self.config.max_sessions} active sessions)"
            )
        session_id = uuid.uuid4().hex[:12]
        engine = SessionEngine(
            self._make_gateway(),
            self.resources.prompts,
            self.resources.catalog,
            self.resources.hub,
            session_id=session_id,
            phase_configs=self.config.phase_configs(),
            schedule_start=self.config.schedule_start_time(),
            day_cutoff=self.config.day_cutoff_time(),
        )
        runtime = SessionRuntime(engine=engine, inbox=asyncio.Queue())
        greeting = engine.start()
        runtime.emit(
            "phase_changed",
            {"phase": int(engine.state.current_phase), "label": engine.state.current_phase.label, "via": "open"},
        )
        self._emit_turn(runtime, greeting)
        self.sessions[session_id] = runtime
        runtime.worker = asyncio.get_running_loop().create_task(self._run_worker(runtime))
        self._persist(runtime)
        logger.info("session %s created", session_id)
        return runtime

    def post_utterance(self, session_id: str, text: str) -> None:
        """Queue one utterance; exactly one advance() will run for it."""
        runtime = self.sessions.get(session_id)
        if runtime is None:
            raise UnknownSessionError(f"no such session: {session_id}")
        if runtime.engine.state.status is not SessionStatus.ACTIVE:
            raise SessionInactiveError(f"session is {runtime.engine.state.status.value}")
        if not text or not text.strip():
            raise UtteranceRejectedError("utterance must be non-empty")
        runtime.inbox.put_nowait(text.strip())

    async def _run_worker(self, runtime: SessionRuntime) -> None:
        engine = runtime.engine
        while engine.state.status is SessionStatus.ACTIVE:
            text = await runtime.inbox.get()
            runtime.emit("customer_utterance", {"text": text})
            try:
                result = await asyncio.to_thread(engine.advance, text)
            except SessionNotActiveError as exc:
                runtime.emit("error", {"code": "session-not-active", "message": str(exc)})
                continue
            except Exception as exc:  # backend failure: state unchanged, error surfaced
                logger.warning("session %s turn failed: %s", runtime.session_id, exc)
                runtime.emit("error", {"code": "backend-failure", "message": str(exc)})
                continue
            self._emit_turn(runtime, result)
            self._persist(runtime)
        logger.info(
            "session %s worker done (%s)", runtime.session_id, engine.state.status.value
        )

    def _emit_turn(self, runtime: SessionRuntime, result: TurnResult) -> None:
        """One turn block, fixed order: segments, display, cues, transition."""
        for segment in result.segments:
            runtime.emit(
                "speech_segment",
                {"text": segment.text, "index": segment.index, "terminal": segment.terminal},
            )
        runtime.emit("display_state", encode_display(result.display))
        for cue in result.cues:
            runtime.emit("action_cue", {"kind": cue.kind.value, "timing": cue.timing.value})
        state = result.state
        if result.decision is not None and result.decision.advances:
            runtime.emit(
                "phase_changed",
                {
                    "phase": int(state.current_phase),
                    "label": state.current_phase.label,
                    "via": result.decision.value,
                },
            )
        if result.error is not None:
            runtime.emit("error", {"code": "hook-failure", "message": result.error})
        if state.status is not SessionStatus.ACTIVE:
            plan = encode_plan(state.final_plan) if state.final_plan else None
            runtime.emit("session_closed", {"status": state.status.value, "plan": plan})

    def _persist(self, runtime: SessionRuntime) -> None:
        if not self.config.log_dir:
            return
        path = self.transcript_path(runtime.session_id)
        try:
            write_transcript(path, runtime.engine.records)
        except OSError as exc:
            logger.error("could not persist transcript for %s: %s", runtime.session_id, exc)

    def transcript_path(self, session_id: str) -> Path:
        return Path(self.config.log_dir) / f"{session_id}.jsonl"

    async def shutdown(self) -> None:
        workers = [r.worker for r in self.sessions.values() if r.worker is not None]
        for worker in workers:
            worker.cancel()
        await asyncio.gather(*workers, return_exceptions=True)


# -- app ----------------------------------------------------------------------

def build_app(config: ServerConfig | None = None, resources: Resources | None = None) -> FastAPI:
    config = config or ServerConfig()
    host = SessionHost(config, resources)

    @contextlib.asynccontextmanager
    async def lifespan(_: FastAPI):
        yield
        await host.shutdown()

    app = FastAPI(title="tourguide", version="0.1.0", lifespan=lifespan)
    # The viewer is served from its own origin (static files); no credentials.
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )
    app.state.host = host

    @app.post("/sessions")
    async def create_session() -> JSONResponse:
        try:
            runtime = host.create_session()
        except CapacityExceededError as exc:
            return JSONResponse(status_code=409, content={"error": exc.code, "message": str(exc)})
        except BackendError as exc:
            # Greeting generation failed: nothing persisted, fail fast.
            return JSONResponse(
                status_code=503, content={"error": "backend-unavailable", "message": str(exc)}
            )
        return JSONResponse(
            status_code=201,
            content={"session_id": runtime.session_id, "buffered_messages": len(runtime.messages)},
        )

    @app.get("/health")
    async def health() -> dict[str, Any]:
        return {
            "status": "ok",
            "sessions": len(host.sessions),
            "active_sessions": host.active_count(),
        }

    @app.websocket("/ws/{session_id}")
    async def session_socket(websocket: WebSocket, session_id: str) -> None:
        runtime = host.sessions.get(session_id)
        if runtime is None:
            await websocket.close(code=4404, reason="unknown session")
            return
        if runtime.attached:
            await websocket.close(code=4409, reason="session already attached")
            return
        await websocket.accept()
        runtime.attached = True
        if runtime.delivered > 0:
            # Reconnect: append a view-rebuilding snapshot after any backlog.
            state = runtime.engine.state
            runtime.emit(
                "phase_changed",
                {"phase": int(state.current_phase), "label": state.current_phase.label, "via": "snapshot"},
            )
            runtime.emit("display_state", encode_display(state.display))

        async def pump() -> None:
            while True:
                if runtime.delivered < len(runtime.messages):
                    await websocket.send_text(runtime.messages[runtime.delivered])
                    runtime.delivered += 1
                else:
                    runtime.wakeup.clear()
                    await runtime.wakeup.wait()

        sender = asyncio.create_task(pump())
        try:
            while True:
                frame = await websocket.receive_text()
                try:
                    data = json.loads(frame)
                    if data.get("kind") != "customer_utterance":
                        raise UtteranceRejectedError(f"unsupported kind: {data.get('kind')!r}")
                    host.post_utterance(session_id, str(data.get("payload", {}).get("text", "")))
                except ServiceError as exc:
                    runtime.emit("error", {"code": exc.code, "message": str(exc)})
                except json.JSONDecodeError:
                    runtime.emit("error", {"code": "bad-frame", "message": "frames must be JSON"})
        except WebSocketDisconnect:
            pass
        finally:
            sender.cancel()
            runtime.attached = False

    return app
