"""Session-hosting HTTP API for interactive supervision.

Endpoints:
    POST /sessions                      create a session from a scenario body
    GET  /sessions/{id}/snapshot        current state (?reveal=, ?bins=)
    POST /sessions/{id}/advance         run up to n ticks, stop at requests
    GET  /sessions/{id}/pending         the open reallocation request, if any
    POST /sessions/{id}/decision        answer the open request
    GET  /sessions/{id}/events          server-sent event stream (?from=, ?follow=)

Time never advances implicitly; only advance and decision mutate.
Requests to the same session are serialized by a per-session lock, and
event streams are read-only observers over the append-only log.
"""

from __future__ import annotations

import asyncio
import json
import threading
import uuid
from dataclasses import dataclass, field
from pathlib import Path

from fastapi import FastAPI, HTTPException, Query, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import StreamingResponse
from fastapi.staticfiles import StaticFiles

from .errors import DecisionPending, NoPendingRequest, TrustAllocError
from .sim import Session
from .world import parse_scenario


@dataclass
class _Hosted:
    session: Session
    lock: threading.Lock = field(default_factory=threading.Lock)
    persist_path: Path | None = None
    persisted: int = 0

    def flush(self) -> None:
        if self.persist_path is None:
            return
        records = self.session.log.records
        if self.persisted >= len(records):
            return
        with self.persist_path.open("a") as handle:
            for record in records[self.persisted:]:
                handle.write(json.dumps(record, sort_keys=True,
                                         separators=(",", ":")) + "\n")
        self.persisted = len(records)


def snapshot_of(session: Session, reveal: bool = False, bins: bool = False) -> dict:
    """Serializable view of the session at its current clock."""
    known = sorted(set().union(*(r.known_obstacles for r in session.robots.values()))
                   if session.robots else set())
    robots = []
    for rid, state in session.robots.items():
        executor = session.executors[rid]
        assignment = None
        if executor.current is not None:
            assignment = {
                "symbol": executor.current.symbol,
                "subtask": executor.current.subtask,
                "step": executor.current.step,
            }
        plan_cells = []
        if executor.plan is not None:
            plan_cells = [list(c) for c in executor.plan.cells[executor.plan_pos:]]
        robots.append(
            {
                "id": rid,
                "cell": list(state.cell),
                "battery": round(state.battery, 9),
                "battery_low": state.battery_low,
                "assignment": assignment,
                "plan": plan_cells,
            }
        )
    beliefs = {}
    for rid, belief in session.beliefs.items():
        entry = {
            "mean": round(belief.mean, 12),
            "variance": round(belief.variance, 12),
        }
        if bins:
            entry["bins"] = [round(float(p), 12) for p in belief.probabilities]
        beliefs[rid] = entry
    grid = {
        "width": session.world.width,
        "height": session.world.height,
        "stations": {s: list(c) for s, c in sorted(session.world.stations.items())},
        "known_obstacles": [list(c) for c in known],
    }
    if reveal:
        grid["obstacles"] = [list(c) for c in sorted(session.world.obstacles)]
    return {
        "clock": session.t,
        "finished": session.finished,
        "grid": grid,
        "robots": robots,
        "beliefs": beliefs,
        "allocation": {
            "epoch": session.epoch,
            "projections": {
                rid: [[s, sym, k] for s, sym, k in proj]
                for rid, proj in sorted(session.projections.items())
            },
        },
        "pending": session.pending.to_payload() if session.pending else None,
        "events": session.log.records[-20:],
        "event_count": len(session.log.records),
    }


def create_app(persist_dir: str | None = None, max_sessions: int = 64,
               ui_dir: str | None = None) -> FastAPI:
    app = FastAPI(title="trustalloc service")
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"],
        allow_headers=["*"],
    )
    sessions: dict[str, _Hosted] = {}
    registry_lock = threading.Lock()

    def hosted(session_id: str) -> _Hosted:
        with registry_lock:
            entry = sessions.get(session_id)
        if entry is None:
            raise HTTPException(status_code=404, detail="unknown session")
        return entry

    @app.post("/sessions")
    def create_session(body: dict):
        try:
            config = parse_scenario(body)
            session = Session(config)
        except TrustAllocError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        with registry_lock:
            if len(sessions) >= max_sessions:
                raise HTTPException(status_code=429, detail="session limit reached")
            session_id = uuid.uuid4().hex
            entry = _Hosted(session=session)
            if persist_dir is not None:
                directory = Path(persist_dir)
                directory.mkdir(parents=True, exist_ok=True)
                entry.persist_path = directory / f"{session_id}.jsonl"
            sessions[session_id] = entry
        entry.flush()
        return {"session": session_id, "snapshot": snapshot_of(session)}

    @app.get("/sessions/{session_id}/snapshot")
    def get_snapshot(session_id: str, reveal: bool = False, bins: bool = False):
        entry = hosted(session_id)
        with entry.lock:
            return snapshot_of(entry.session, reveal=reveal, bins=bins)

    @app.post("/sessions/{session_id}/advance")
    def advance(session_id: str, body: dict | None = None):
        ticks = int((body or {}).get("ticks", 1))
        entry = hosted(session_id)
        with entry.lock:
            session = entry.session
            for _ in range(max(ticks, 0)):
                if session.finished or session.pending is not None:
                    break
                try:
                    session.tick()
                except DecisionPending:  # pragma: no cover - guarded above
                    break
            entry.flush()
            return snapshot_of(session)

    @app.get("/sessions/{session_id}/pending")
    def get_pending(session_id: str):
        entry = hosted(session_id)
        with entry.lock:
            session = entry.session
            return {
                "clock": session.t,
                "pending": session.pending.to_payload() if session.pending else None,
            }

    @app.post("/sessions/{session_id}/decision")
    def post_decision(session_id: str, body: dict):
        if "allow" not in body:
            raise HTTPException(status_code=422, detail="body needs an 'allow' flag")
        entry = hosted(session_id)
        with entry.lock:
            try:
                entry.session.decide(bool(body["allow"]), source="interactive")
            except NoPendingRequest as exc:
                raise HTTPException(status_code=409, detail=str(exc)) from exc
            entry.flush()
            return snapshot_of(entry.session)

    @app.get("/sessions/{session_id}/events")
    async def events(
        session_id: str,
        request: Request,
        start: int = Query(default=0, alias="from"),
        follow: bool = True,
        poll_interval: float = 0.05,
    ):
        entry = hosted(session_id)
        last_seen = request.headers.get("Last-Event-ID")
        cursor = int(last_seen) + 1 if last_seen is not None else start

        async def stream():
            index = cursor
            while True:
                records = entry.session.log.records
                while index < len(records):
                    record = records[index]
                    data = json.dumps(record, sort_keys=True, separators=(",", ":"))
                    yield f"id: {index}\nevent: {record['type']}\ndata: {data}\n\n"
                    index += 1
                if not follow:
                    return
                if await request.is_disconnected():
                    return
                await asyncio.sleep(poll_interval)

        return StreamingResponse(stream(), media_type="text/event-stream")

    if ui_dir is not None and Path(ui_dir).is_dir():
        app.mount("/ui", StaticFiles(directory=ui_dir, html=True), name="ui")

    return app


app = create_app()
