"""Live service: HTTP control API plus the WebSocket chat transport.

Each session wraps one ``SessionEngine``. Connection handlers may ingest
concurrently, but every engine call happens under the session lock, so all
state mutation is a single serialized stream per session; fan-out then
drains to per-connection queues that preserve subgroup order.

Control API:
    POST /sessions            create (config document -> {session_id})
    POST /sessions/{id}/start
    POST /sessions/{id}/end
    GET  /sessions/{id}             phase/roster summary
    GET  /sessions/{id}/report      forensic report (?format=text for prose)
    GET  /sessions/{id}/log         event log, one record per line
    GET  /sessions/{id}/ranking     live idea ranking (facilitator view)
    GET  /sessions/{id}/surveys     collected surveys as CSV
    WS   /ws                        wire-protocol connection (first record: join)
"""

from __future__ import annotations

import asyncio
import io
import logging
import time
from pathlib import Path
from typing import Optional

from fastapi import FastAPI, HTTPException, WebSocket, WebSocketDisconnect
from fastapi.responses import JSONResponse, PlainTextResponse

from swarmchat import wire
from swarmchat.engine import InvalidConfigError, SessionEngine, SessionError
from swarmchat.eventlog import config_from_dict, encode_event
from swarmchat.model import SessionConfig, validate_config
from swarmchat.surveys import SurveyResponse, write_survey_csv
from swarmchat.taxonomy import render_report_text

logger = logging.getLogger(__name__)

FACILITATOR_ROLE = "facilitator"


class SessionHandle:
    """One live session: engine + lock + subscriber queues + tick task."""

    def __init__(self, engine: SessionEngine, data_dir: Optional[Path]) -> None:
        self.engine = engine
        self.lock = asyncio.Lock()
        self.queues: dict[str, list[asyncio.Queue]] = {}
        self.facilitator_queues: list[asyncio.Queue] = []
        self.started_monotonic: Optional[float] = None
        self.tick_task: Optional[asyncio.Task] = None
        self.data_dir = data_dir
        self._persisted = 0
        self.chat_history: dict[str, list[dict]] = {}  # pid -> chat records sent

    def now_ms(self) -> int:
        if self.started_monotonic is None:
            return 0
        return int((time.monotonic() - self.started_monotonic) * 1000)

    def subscribe(self, participant_id: str) -> asyncio.Queue:
        queue: asyncio.Queue = asyncio.Queue()
        self.queues.setdefault(participant_id, []).append(queue)
        return queue

    def unsubscribe(self, participant_id: str, queue: asyncio.Queue) -> None:
        queues = self.queues.get(participant_id, [])
        if queue in queues:
            queues.remove(queue)

    def flush(self) -> None:
        """Drain engine output to subscriber queues and persist new events."""
        for pid, record in self.engine.drain_outbox():
            if record.get("type") == "chat":
                self.chat_history.setdefault(pid, []).append(record)
            for queue in self.queues.get(pid, []):
                queue.put_nowait(record)
        events = self.engine.events
        if self._persisted < len(events):
            new = events[self._persisted :]
            for queue in self.facilitator_queues:
                for ev in new:
                    queue.put_nowait(
                        {"type": "event", "kind": ev.kind, "seq": ev.sequence_no,
                         "wall_time": ev.wall_time, **dict(ev.data)}
                    )
                    if ev.kind == "session_ended":
                        queue.put_nowait(wire.ended(self.engine.report_ref))
            if self.data_dir is not None:
                path = self.data_dir / f"{self.engine.session_id}.events.jsonl"
                with open(path, "a", encoding="utf-8") as fp:
                    for ev in new:
                        fp.write(encode_event(ev) + "\n")
            self._persisted = len(events)

    def persist_report(self) -> None:
        if self.data_dir is None or self.engine.phase != "ended":
            return
        report = self.engine.get_report()
        from swarmchat.eventlog import canonical_json

        base = self.data_dir / self.engine.session_id
        (base.parent / f"{self.engine.session_id}.report.json").write_text(
            canonical_json(report) + "\n", encoding="utf-8"
        )
        (base.parent / f"{self.engine.session_id}.report.txt").write_text(
            render_report_text(report), encoding="utf-8"
        )


def create_app(
    data_dir: Optional[str | Path] = None,
    *,
    facilitator_token: str = "",
    config_defaults: Optional[dict] = None,
) -> FastAPI:
    app = FastAPI(title="swarmchat", version="0.1.0")
    sessions: dict[str, SessionHandle] = {}
    root = Path(data_dir) if data_dir else None
    if root is not None:
        root.mkdir(parents=True, exist_ok=True)
    defaults = dict(config_defaults or {})
    counter = {"n": 0}

    def handle_of(session_id: str) -> SessionHandle:
        handle = sessions.get(session_id)
        if handle is None:
            raise HTTPException(status_code=404, detail=f"unknown session {session_id}")
        return handle

    async def tick_loop(handle: SessionHandle) -> None:
        interval = handle.engine.config.tick_interval
        try:
            while True:
                await asyncio.sleep(interval)
                async with handle.lock:
                    if handle.engine.phase != "running":
                        break
                    handle.engine.tick(handle.now_ms())
                    handle.flush()
                    if handle.engine.phase == "ended":
                        handle.persist_report()
                        break
        except asyncio.CancelledError:
            pass

    def _config_template() -> dict:
        from swarmchat.eventlog import config_to_dict

        template = config_to_dict(SessionConfig())
        template.pop("session_id")
        return template

    @app.post("/sessions")
    async def create_session(body: dict) -> dict:
        known = set(SessionConfig.__dataclass_fields__)
        unknown = (set(body) | set(defaults)) - known
        if unknown:
            raise HTTPException(422, detail=f"unknown config fields: {sorted(unknown)}")
        merged = {**_config_template(), **defaults, **body}
        if not merged.get("session_id"):
            counter["n"] += 1
            merged["session_id"] = f"s{int(time.time())}-{counter['n']:03d}"
        try:
            config = config_from_dict(merged)
        except (ValueError, TypeError) as exc:
            raise HTTPException(422, detail=str(exc))
        violations = validate_config(config)
        if violations:
            return JSONResponse(status_code=422, content={"violations": violations})
        if config.session_id in sessions:
            raise HTTPException(409, detail=f"session {config.session_id} already exists")
        engine = SessionEngine(config)
        sessions[config.session_id] = SessionHandle(engine, root)
        return {"session_id": config.session_id}

    @app.post("/sessions/{session_id}/start")
    async def start_session(session_id: str) -> dict:
        handle = handle_of(session_id)
        async with handle.lock:
            try:
                handle.engine.start(0)
            except SessionError as exc:
                raise HTTPException(409, detail=str(exc))
            handle.started_monotonic = time.monotonic()
            handle.flush()
            handle.tick_task = asyncio.create_task(tick_loop(handle))
        return {"session_id": session_id, "phase": handle.engine.phase}

    @app.post("/sessions/{session_id}/end")
    async def end_session(session_id: str) -> dict:
        handle = handle_of(session_id)
        async with handle.lock:
            try:
                ref = handle.engine.end(handle.now_ms())
            except SessionError as exc:
                raise HTTPException(409, detail=str(exc))
            handle.flush()
            handle.persist_report()
        if handle.tick_task is not None:
            handle.tick_task.cancel()
        return {"session_id": session_id, "phase": handle.engine.phase, "report_ref": ref}

    @app.get("/sessions/{session_id}")
    async def session_summary(session_id: str) -> dict:
        handle = handle_of(session_id)
        engine = handle.engine
        return {
            "session_id": session_id,
            "phase": engine.phase,
            "participants": len(engine.participants),
            "subgroups": sorted(engine.subgroups),
            "events": len(engine.events),
        }

    @app.get("/sessions/{session_id}/report")
    async def get_report(session_id: str, format: str = "json"):
        handle = handle_of(session_id)
        if handle.engine.phase != "ended":
            raise HTTPException(409, detail="report is available after the session ends")
        report = handle.engine.get_report()
        if format == "text":
            return PlainTextResponse(render_report_text(report))
        return report

    @app.get("/sessions/{session_id}/log")
    async def get_log(session_id: str) -> PlainTextResponse:
        handle = handle_of(session_id)
        body = "".join(encode_event(ev) + "\n" for ev in handle.engine.events)
        return PlainTextResponse(body, media_type="application/x-ndjson")

    @app.get("/sessions/{session_id}/ranking")
    async def get_ranking(session_id: str, top: int = 10) -> dict:
        handle = handle_of(session_id)
        index = handle.engine.idea_index_view()
        totals = index.stance_totals()
        ideas = []
        for node in index.ranked_ideas()[:top]:
            t = totals[node.idea_id]
            ideas.append(
                {
                    "idea_id": node.idea_id,
                    "canonical_tokens": sorted(node.canonical_tokens),
                    "subgroups_mentioning": sorted(node.subgroups_mentioning),
                    "mention_count": len(node.mention_message_ids),
                    "support": t["support"],
                    "oppose": t["oppose"],
                    "neutral": t["neutral"],
                }
            )
        return {"session_id": session_id, "ideas": ideas}

    @app.get("/sessions/{session_id}/surveys")
    async def get_surveys(session_id: str) -> PlainTextResponse:
        handle = handle_of(session_id)
        responses = [
            SurveyResponse(pid, answers)
            for pid, answers in sorted(handle.engine.surveys.items())
        ]
        buf = io.StringIO()
        write_survey_csv(responses, buf)
        return PlainTextResponse(buf.getvalue(), media_type="text/csv")

    @app.websocket("/ws")
    async def ws_endpoint(ws: WebSocket) -> None:
        await ws.accept()
        handle: Optional[SessionHandle] = None
        participant_id: Optional[str] = None
        queue: Optional[asyncio.Queue] = None
        facilitator = False
        sender: Optional[asyncio.Task] = None
        try:
            first = wire.decode(await ws.receive_text())
            if first.get("type") != "join":
                await ws.send_text(wire.encode(wire.error("first record must be join")))
                await ws.close()
                return
            session_id = str(first.get("session_id", ""))
            if session_id not in sessions:
                await ws.send_text(wire.encode(wire.error(f"unknown session {session_id}")))
                await ws.close()
                return
            handle = sessions[session_id]
            engine = handle.engine

            if first.get("role") == FACILITATOR_ROLE:
                if facilitator_token and first.get("role_token") != facilitator_token:
                    await ws.send_text(wire.encode(wire.error("facilitator token rejected")))
                    await ws.close()
                    return
                facilitator = True
                queue = asyncio.Queue()
                handle.facilitator_queues.append(queue)
                await ws.send_text(wire.encode(wire.welcome("facilitator", "", [])))
                async with handle.lock:
                    now = handle.now_ms()
                    await ws.send_text(
                        wire.encode(engine.system_record(now))
                    )
            else:
                async with handle.lock:
                    resume_pid = first.get("participant_id")
                    if resume_pid:
                        if resume_pid not in engine.participants:
                            await ws.send_text(
                                wire.encode(wire.error(f"unknown participant {resume_pid}"))
                            )
                            await ws.close()
                            return
                        participant_id = str(resume_pid)
                    else:
                        try:
                            join = engine.join(
                                str(first.get("display_name", "anonymous")),
                                handle.now_ms(),
                            )
                        except SessionError as exc:
                            await ws.send_text(wire.encode(wire.error(str(exc))))
                            await ws.close()
                            return
                        participant_id = join.participant_id
                    queue = handle.subscribe(participant_id)
                    handle.flush()
                    if resume_pid:
                        # replay everything after the client's last seen seq
                        resume_from = int(first.get("resume_from", 0))
                        await ws.send_text(
                            wire.encode(engine.welcome_record(participant_id))
                        )
                        await ws.send_text(
                            wire.encode(engine.system_record(handle.now_ms()))
                        )
                        for record in handle.chat_history.get(participant_id, []):
                            if record["seq"] > resume_from:
                                await ws.send_text(wire.encode(record))

            async def pump() -> None:
                assert queue is not None
                while True:
                    record = await queue.get()
                    await ws.send_text(wire.encode(record))

            sender = asyncio.create_task(pump())

            while True:
                record = wire.decode(await ws.receive_text())
                rtype = record.get("type")
                if facilitator:
                    continue  # facilitator connections are read-only
                assert participant_id is not None and handle is not None
                if rtype == "chat":
                    async with handle.lock:
                        try:
                            handle.engine.post_message(
                                participant_id, str(record.get("text", "")), handle.now_ms()
                            )
                        except SessionError as exc:
                            await ws.send_text(wire.encode(wire.error(str(exc))))
                        handle.flush()
                        if handle.engine.phase == "ended":
                            handle.persist_report()
                elif rtype == "survey":
                    async with handle.lock:
                        try:
                            handle.engine.submit_survey(
                                participant_id, dict(record.get("answers", {}))
                            )
                            await ws.send_text(
                                wire.encode({"type": "survey_ack", "participant_id": participant_id})
                            )
                        except SessionError as exc:
                            await ws.send_text(wire.encode(wire.error(str(exc))))
                else:
                    await ws.send_text(wire.encode(wire.error(f"unknown record type {rtype!r}")))
        except WebSocketDisconnect:
            pass
        except Exception:  # pragma: no cover - connection teardown races
            logger.exception("websocket handler failed")
        finally:
            if sender is not None:
                sender.cancel()
            if handle is not None and queue is not None:
                if facilitator:
                    if queue in handle.facilitator_queues:
                        handle.facilitator_queues.remove(queue)
                elif participant_id is not None:
                    handle.unsubscribe(participant_id, queue)

    return app


def serve(
    port: int,
    *,
    host: str = "127.0.0.1",
    data_dir: Optional[str] = None,
    facilitator_token: str = "",
    config_defaults: Optional[dict] = None,
) -> None:
    import uvicorn

    app = create_app(
        data_dir,
        facilitator_token=facilitator_token,
        config_defaults=config_defaults,
    )
    uvicorn.run(app, host=host, port=port, log_level="warning")
