"""Long-running control plane: a loopback-only FastAPI service that steers
live operation (share, approve/deny, fetch) and streams events to the
browser panel.

Endpoints (127.0.0.1:control_port):

    GET  /api/health
    GET  /api/state
    GET  /api/peers?window_ms=
    POST /api/share              {"paths": [...]}
    POST /api/stop-share
    GET  /api/requests
    POST /api/requests/{id}/decision   {"decision": "approve"|"deny"}
    POST /api/fetch              {"peer_id": ..., "dest": ...}
    GET  /api/transfers
    GET  /api/history
    GET  /api/events             server-sent events

When PHOTON_CONTROL_TOKEN is set, every /api route requires
"Authorization: Bearer <token>". Secret transfer codes never appear on
this surface; sessions are referred to by opaque daemon-assigned ids.
"""
from __future__ import annotations

import json
import logging
import os
import queue
import secrets
import threading
import time
from pathlib import Path
from typing import Literal, Optional

from fastapi import APIRouter, Depends, FastAPI, Header, HTTPException
from fastapi.responses import HTMLResponse, StreamingResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from . import __version__, states
from .client import TransferProgress, receive_all
from .config import AppConfig, history_path, local_platform
from .discovery import DiscoveredPeer, Responder, probe_and_collect
from .errors import AlreadyDecided, NoInterface, PhotonError, PortInUse, UnknownRequest
from .events import EventBus, Throttle
from .history import HistoryRecord, HistoryStore, now_rfc3339
from .model import indexed_sources, new_peer_identity
from .server import ServerConfig, TransferServer
from .session import DEFAULT_DECISION_TIMEOUT

log = logging.getLogger(__name__)


def _session_id() -> str:
    return secrets.token_hex(4)


class _Share:
    """One sender lifecycle under daemon control."""

    def __init__(self, session_id: str, server: TransferServer, responder: Responder,
                 paths: list[str]):
        self.session_id = session_id
        self.server = server
        self.responder = responder
        self.paths = paths
        self.started_at = time.time()
        self.receiver: Optional[dict] = None
        self.granted_at: Optional[float] = None
        self.recorded = False


class _Receive:
    """One receive pipeline under daemon control."""

    def __init__(self, session_id: str, peer: DiscoveredPeer, dest: Path):
        self.session_id = session_id
        self.peer = peer
        self.dest = dest
        self.started_at = time.time()
        self.files: dict[int, dict] = {}
        self.outcome: Optional[str] = None
        self.failure: Optional[str] = None
        self.thread: Optional[threading.Thread] = None


class Daemon:
    """Owns the shared state behind the control API."""

    def __init__(self, config: AppConfig):
        config.ensure_writable_download_dir()
        self.config = config
        self.identity = new_peer_identity(config.display_name, local_platform())
        self.bus = EventBus()
        self.history = HistoryStore(history_path())
        self._lock = threading.RLock()
        self._share: Optional[_Share] = None
        self._receive: Optional[_Receive] = None

    # -- sharing --

    def start_share(self, paths: list[str],
                    decision_timeout: float = DEFAULT_DECISION_TIMEOUT) -> dict:
        with self._lock:
            if self._share is not None and self._share.server.running:
                raise HTTPException(409, "already sharing; stop-share first")
            index, sources = indexed_sources(paths)
            session_id = _session_id()

            def on_event(kind: str, data: dict):
                self._on_share_event(session_id, kind, data)

            config = ServerConfig(bind_address="0.0.0.0",
                                  transfer_port=self.config.transfer_port,
                                  chunk_size=self.config.chunk_size)
            server = TransferServer(config, self.identity, index, sources,
                                    policy="manual", decision_timeout=decision_timeout,
                                    on_event=on_event)
            responder = Responder(self.identity, self.config.transfer_port)
            # register before start() so the first request's events land
            self._share = _Share(session_id, server, responder, [str(p) for p in paths])
            try:
                server.start()
                responder.start()
            except PhotonError:
                self._share = None
                if server.running:
                    server.stop(grace=0.5)
                raise
            self.bus.publish("share_started", session_id, {
                "files": len(index.entries), "total_bytes": index.total_bytes,
            })
            return {"session": session_id, "files": len(index.entries),
                    "total_bytes": index.total_bytes}

    def _on_share_event(self, session_id: str, kind: str, data: dict):
        share = self._share
        if share is None or share.session_id != session_id:
            return
        if kind == "request_received":
            share.receiver = data.get("receiver")
        elif kind == "granted":
            share.granted_at = time.time()
        elif kind == "denied":
            self._record_share(share, "denied")
        elif kind == "completed":
            self._record_share(share, "completed")
        self.bus.publish(kind, session_id, data)

    def _record_share(self, share: _Share, outcome: str, reason: Optional[str] = None):
        if share.recorded and outcome != "denied":
            return
        index = share.server.index
        receiver = share.receiver or {}
        started = share.granted_at or share.started_at
        self.history.append_safely(HistoryRecord(
            timestamp=now_rfc3339(),
            direction="sent",
            peer_name=receiver.get("display_name", "?"),
            peer_id=receiver.get("peer_id", "?" * 32),
            files=[{"name": e.name, "size_bytes": e.size_bytes} for e in index.entries],
            total_bytes=index.total_bytes,
            duration_seconds=round(time.time() - started, 3),
            outcome=outcome,
            reason=reason,
        ))
        if outcome != "denied":
            share.recorded = True

    def stop_share(self) -> None:
        with self._lock:
            share = self._share
            if share is None:
                raise HTTPException(404, "not sharing")
            if isinstance(share.server.session.state, states.Active):
                self._record_share(share, "failed", "stopped while transferring")
            share.server.stop()
            share.responder.stop()
            self._share = None
            self.bus.publish("share_stopped", share.session_id, {})

    def pending_requests(self) -> list[dict]:
        share = self._share
        if share is None:
            return []
        pending = share.server.session.pending_request()
        if pending is None:
            return []
        return [{
            "id": pending.request_id,
            "receiver": pending.receiver.to_json_dict(),
            "received_at": pending.received_at,
        }]

    def decide(self, request_id: str, decision: str) -> None:
        share = self._share
        if share is None:
            raise HTTPException(404, "not sharing")
        try:
            share.server.session.decide_request(request_id, decision)
        except UnknownRequest:
            raise HTTPException(404, "no such request") from None
        except AlreadyDecided:
            raise HTTPException(409, "request already decided or expired") from None

    # -- discovery / receiving --

    def peers(self, window_ms: int = 2000) -> list[dict]:
        try:
            found = probe_and_collect(self.identity, window=max(window_ms, 100) / 1000.0)
        except NoInterface as exc:
            raise HTTPException(503, str(exc)) from exc
        return [{
            "peer_id": p.peer_id, "display_name": p.display_name,
            "platform": p.platform, "transfer_port": p.transfer_port, "host": p.host,
        } for p in found]

    def start_fetch(self, peer_id: str, dest: Optional[str] = None,
                    window_ms: int = 2000) -> dict:
        with self._lock:
            if self._receive is not None and self._receive.outcome is None:
                raise HTTPException(409, "a receive is already running")
        found = probe_and_collect(self.identity, window=max(window_ms, 100) / 1000.0)
        matches = [p for p in found if p.peer_id == peer_id]
        if not matches:
            raise HTTPException(404, f"peer {peer_id} not found")
        peer = matches[0]
        dest_dir = Path(dest) if dest else self.config.download_dir
        receive = _Receive(_session_id(), peer, dest_dir)
        with self._lock:
            if self._receive is not None and self._receive.outcome is None:
                raise HTTPException(409, "a receive is already running")
            self._receive = receive
        receive.thread = threading.Thread(target=self._run_receive, args=(receive,),
                                          name="photon-receive", daemon=True)
        self.bus.publish("fetch_started", receive.session_id, {
            "peer": {"peer_id": peer.peer_id, "display_name": peer.display_name},
            "dest": str(dest_dir),
        })
        receive.thread.start()
        return {"session": receive.session_id, "peer_id": peer.peer_id}

    def _run_receive(self, receive: _Receive):
        throttle = Throttle(0.1)

        def on_progress(p: TransferProgress):
            snap = receive.files.setdefault(p.ordinal, {})
            snap.update(name=p.name, bytes_done=p.bytes_done, size_bytes=p.size_bytes,
                        percent=(100.0 * p.bytes_done / p.size_bytes) if p.size_bytes else 100.0,
                        finished=p.finished)
            if throttle.ready(force=p.finished):
                self.bus.publish("transfer_progress", receive.session_id, {
                    "ordinal": p.ordinal, "name": p.name, "bytes_done": p.bytes_done,
                    "size_bytes": p.size_bytes, "percent": snap["percent"],
                    "finished": p.finished,
                })

        try:
            report = receive_all(receive.peer, self.identity, receive.dest,
                                 chunk_size=self.config.chunk_size, progress=on_progress)
        except Exception as exc:  # the pipeline reports, it should not raise
            log.exception("receive pipeline crashed")
            receive.outcome = "failed"
            receive.failure = str(exc)
            self.bus.publish("failed", receive.session_id, {"failure": str(exc)})
            return
        receive.outcome = report.outcome
        receive.failure = report.failure
        outcome = {"done": "completed", "denied": "denied"}.get(report.outcome, "failed")
        self.history.append_safely(HistoryRecord(
            timestamp=now_rfc3339(),
            direction="received",
            peer_name=receive.peer.display_name,
            peer_id=receive.peer.peer_id,
            files=[{"name": f.name, "size_bytes": f.bytes_received} for f in report.files],
            total_bytes=report.total_bytes,
            duration_seconds=round(report.wall_duration, 3),
            outcome=outcome,
            reason=report.failure,
        ))
        self.bus.publish(outcome, receive.session_id, {
            "role": "receiving",
            "total_bytes": report.total_bytes,
            "wall_duration": report.wall_duration,
            "failure": report.failure,
            "final_state": report.final_state,
        })

    # -- snapshots --

    def state(self) -> dict:
        with self._lock:
            share = self._share
            receive = self._receive
            if share is not None and share.server.running:
                summary = "serving"
            elif receive is not None and receive.outcome is None:
                summary = "receiving"
            else:
                summary = "idle"
            out = {
                "state": summary,
                "identity": self.identity.to_json_dict(),
                "transfer_port": self.config.transfer_port,
                "share": None,
                "receive": None,
            }
            if share is not None:
                index = share.server.index
                out["share"] = {
                    "session": share.session_id,
                    "session_state": states.state_name(share.server.session.state),
                    "files": [{"name": e.name, "size_bytes": e.size_bytes}
                              for e in index.entries],
                    "total_bytes": index.total_bytes,
                }
            if receive is not None:
                out["receive"] = self._receive_view(receive)
            return out

    def _receive_view(self, receive: _Receive) -> dict:
        total = sum(f.get("size_bytes", 0) for f in receive.files.values())
        done = sum(f.get("bytes_done", 0) for f in receive.files.values())
        return {
            "session": receive.session_id,
            "peer": {"peer_id": receive.peer.peer_id,
                     "display_name": receive.peer.display_name},
            "outcome": receive.outcome,
            "failure": receive.failure,
            "files": [receive.files[k] for k in sorted(receive.files)],
            "bytes_done": done,
            "total_bytes": total,
        }

    def transfers(self) -> dict:
        with self._lock:
            out = {"share": None, "receive": None}
            share = self._share
            if share is not None and share.server.running:
                session = share.server.session
                state = session.state
                bytes_served = 0
                if isinstance(state, states.Active):
                    bytes_served = session.bytes_served(state.code)
                index = share.server.index
                out["share"] = {
                    "session": share.session_id,
                    "session_state": states.state_name(state),
                    "bytes_served": bytes_served,
                    "total_bytes": index.total_bytes,
                    "percent": (100.0 * bytes_served / index.total_bytes)
                    if index.total_bytes else 0.0,
                }
            if self._receive is not None:
                out["receive"] = self._receive_view(self._receive)
            return out

    def history_records(self) -> dict:
        records, skipped = self.history.read()
        return {"records": [json.loads(r.to_json_line()) for r in reversed(records)],
                "skipped": skipped}

    def close(self):
        with self._lock:
            if self._share is not None:
                try:
                    self.stop_share()
                except HTTPException:
                    pass
            receive = self._receive
        if receive is not None and receive.thread is not None:
            receive.thread.join(timeout=2.0)


# --- the FastAPI surface ---

class ShareRequest(BaseModel):
    paths: list[str]


class DecisionRequest(BaseModel):
    decision: Literal["approve", "deny"]


class FetchRequest(BaseModel):
    peer_id: str
    dest: Optional[str] = None
    window_ms: int = 2000


class HealthResponse(BaseModel):
    status: str
    version: str


class ShareResponse(BaseModel):
    session: str
    files: int
    total_bytes: int


class FetchResponse(BaseModel):
    session: str
    peer_id: str


_FALLBACK_PAGE = """<!doctype html>
<html><head><title>photon</title></head>
<body><h1>photon daemon</h1>
<p>The control API is up. Build the browser panel (frontend/) to get the
full UI, or use the <code>photon</code> CLI.</p></body></html>
"""


def _require_token(authorization: Optional[str] = Header(default=None)):
    token = os.environ.get("PHOTON_CONTROL_TOKEN")
    if not token:
        return
    if authorization != f"Bearer {token}":
        raise HTTPException(401, "missing or bad bearer token")


def _ui_dir() -> Optional[Path]:
    env = os.environ.get("PHOTON_UI_DIR")
    candidates = [Path(env)] if env else []
    here = Path(__file__).resolve()
    candidates.append(here.parent / "webui")  # bundled into the package
    if len(here.parents) >= 3:
        candidates.append(here.parents[2] / "frontend" / "dist")  # editable checkout
    candidates.append(Path.cwd() / "frontend" / "dist")
    for c in candidates:
        if c.is_dir() and (c / "index.html").exists():
            return c
    return None


def create_app(daemon: Daemon) -> FastAPI:
    app = FastAPI(title="photon control api", version=__version__)
    api = APIRouter(prefix="/api", dependencies=[Depends(_require_token)])

    @api.get("/health", response_model=HealthResponse)
    def health():
        return HealthResponse(status="ok", version=__version__)

    @api.get("/state")
    def state():
        return daemon.state()

    @api.get("/peers")
    def peers(window_ms: int = 2000):
        return {"peers": daemon.peers(window_ms)}

    @api.post("/share", response_model=ShareResponse)
    def share(body: ShareRequest):
        try:
            return ShareResponse(**daemon.start_share(body.paths))
        except PortInUse as exc:
            raise HTTPException(409, str(exc)) from exc
        except PhotonError as exc:
            raise HTTPException(400, str(exc)) from exc

    @api.post("/stop-share")
    def stop_share():
        daemon.stop_share()
        return {"status": "stopped"}

    @api.get("/requests")
    def pending_requests():
        return {"requests": daemon.pending_requests()}

    @api.post("/requests/{request_id}/decision")
    def decide(request_id: str, body: DecisionRequest):
        daemon.decide(request_id, body.decision)
        return {"status": "ok"}

    @api.post("/fetch", response_model=FetchResponse)
    def fetch(body: FetchRequest):
        return FetchResponse(**daemon.start_fetch(body.peer_id, body.dest, body.window_ms))

    @api.get("/transfers")
    def transfers():
        return daemon.transfers()

    @api.get("/history")
    def history():
        return daemon.history_records()

    @api.get("/events")
    def events():
        q = daemon.bus.subscribe()

        def stream():
            try:
                yield ": connected\n\n"
                while True:
                    try:
                        event = q.get(timeout=0.5)
                    except queue.Empty:
                        yield ": keepalive\n\n"
                        continue
                    yield f"data: {json.dumps(event)}\n\n"
            finally:
                daemon.bus.unsubscribe(q)

        return StreamingResponse(stream(), media_type="text/event-stream",
                                 headers={"Cache-Control": "no-cache"})

    app.include_router(api)

    ui = _ui_dir()
    if ui is not None:
        app.mount("/", StaticFiles(directory=ui, html=True), name="ui")
    else:
        @app.get("/", response_class=HTMLResponse)
        def home():
            return _FALLBACK_PAGE

    return app


def run_daemon(config: AppConfig) -> None:
    """Serve the control API on loopback until signalled."""
    import uvicorn

    daemon = Daemon(config)
    app = create_app(daemon)
    try:
        uvicorn.run(app, host="127.0.0.1", port=config.control_port,
                    log_level="warning")
    finally:
        daemon.close()
