"""HTTP session service: create simulated scenes, issue natural-language
commands, and step them through the grounding + planning pipeline.

All endpoints live under ``/v1``.  Sessions are in-memory and independent;
each session serializes its own mutations behind a lock, so concurrent
sessions never interleave state.
"""

from __future__ import annotations

import threading
import time
import uuid
from dataclasses import dataclass, field

import numpy as np
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles

from . import planners
from .corpus import EmptyCommandError, tokenize
from .grounding import (
    AmbiguousError,
    NoMatchError,
    bind,
    parse_machine_string,
)
from .world import GridEnv, env_to_dict, resolve_env


@dataclass
class Session:
    id: str
    initial_env: GridEnv
    env: GridEnv
    log: list[dict] = field(default_factory=list)
    lock: threading.Lock = field(default_factory=threading.Lock)


class SessionStore:
    def __init__(self):
        self._sessions: dict[str, Session] = {}
        self._lock = threading.Lock()

    def create(self, env: GridEnv) -> Session:
        session = Session(uuid.uuid4().hex[:12], env, env)
        with self._lock:
            self._sessions[session.id] = session
        return session

    def get(self, session_id: str) -> Session | None:
        with self._lock:
            return self._sessions.get(session_id)


def _error(status: int, code: str, message: str) -> JSONResponse:
    return JSONResponse(
        status_code=status, content={"error": {"code": code, "message": message}}
    )


def _posteriors(table, score_kind: str) -> list[float]:
    scores = np.array([row[2] for row in table], dtype=np.float64)
    if score_kind == "log":
        scores = np.exp(scores - scores.max())
    total = scores.sum()
    return (scores / total).tolist() if total > 0 else scores.tolist()


def create_app(
    default_env: GridEnv,
    grounder,
    default_planner: str = "amdp",
    ui_dir: str | None = None,
) -> FastAPI:
    """Build the service around one loaded grounding model."""
    app = FastAPI(title="langground", version="1")
    store = SessionStore()
    app.state.store = store

    @app.post("/v1/sessions")
    async def create_session(request: Request):
        body = {}
        if int(request.headers.get("content-length") or 0) > 0:
            body = await request.json()
        env = default_env
        if body.get("env"):
            try:
                env = resolve_env(body["env"])
            except (FileNotFoundError, ValueError) as exc:
                return _error(422, "BadEnvironment", str(exc))
        session = store.create(env)
        return {"id": session.id}

    @app.get("/v1/sessions/{session_id}/state")
    def get_state(session_id: str):
        session = store.get(session_id)
        if session is None:
            return _error(404, "UnknownSession", session_id)
        return env_to_dict(session.env)

    @app.post("/v1/sessions/{session_id}/reset")
    def reset(session_id: str):
        session = store.get(session_id)
        if session is None:
            return _error(404, "UnknownSession", session_id)
        with session.lock:
            session.env = session.initial_env
            session.log.append({"event": "reset", "at": time.time()})
        return {"ok": True}

    @app.get("/v1/sessions/{session_id}/log")
    def get_log(session_id: str):
        session = store.get(session_id)
        if session is None:
            return _error(404, "UnknownSession", session_id)
        return {"events": session.log}

    @app.post("/v1/sessions/{session_id}/command")
    async def command(session_id: str, request: Request):
        session = store.get(session_id)
        if session is None:
            return _error(404, "UnknownSession", session_id)
        body = await request.json()
        text = body.get("text", "")
        planner = body.get("planner") or default_planner
        if planner not in planners.PLANNER_TOKENS:
            return _error(422, "UnknownPlanner", planner)
        try:
            tokens = tokenize(text)
        except EmptyCommandError as exc:
            return _error(422, "EmptyCommand", str(exc))
        with session.lock:
            started = time.perf_counter()
            level, reward, table = grounder.infer(tokens)
            lifted = parse_machine_string(reward, level)
            try:
                grounded = bind(lifted, session.env)
            except NoMatchError as exc:
                return _error(422, "NoMatch", str(exc))
            except AmbiguousError as exc:
                return _error(422, "Ambiguous", str(exc))
            try:
                trace = planners.plan_command(session.env, grounded, planner)
            except planners.UnreachableError as exc:
                return _error(422, "Unreachable", str(exc))
            final_env, steps = planners.execute_trace(session.env, trace)
            elapsed_ms = (time.perf_counter() - started) * 1000.0
            session.env = final_env
            posteriors = _posteriors(table, getattr(grounder, "score_kind", "prob"))
            top5 = [
                {"level": row[0], "reward": row[1], "posterior": posteriors[i]}
                for i, row in enumerate(table[:5])
            ]
            low_confidence = bool(
                posteriors and posteriors[0] < 2.0 / max(len(table), 1)
            )
            event = {
                "event": "command",
                "text": text,
                "planner": planner,
                "level": level,
                "lifted": reward,
                "grounded": grounded.render(),
                "steps": list(steps),
                "planning_ms": elapsed_ms,
                "at": time.time(),
            }
            session.log.append(event)
            return {
                "level": level,
                "lifted": reward,
                "grounded": {
                    "predicate": grounded.predicate,
                    "entity": grounded.entity_id,
                    "target_region": grounded.target_region,
                },
                "plan_steps": list(steps),
                "planning_ms": elapsed_ms,
                "score_table_top5": top5,
                "low_confidence": low_confidence,
            }

    if ui_dir:
        app.mount("/", StaticFiles(directory=ui_dir, html=True), name="ui")
    return app
