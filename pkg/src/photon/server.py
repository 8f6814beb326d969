"""The sender's local HTTP server.

Endpoint surface (HTTP/1.1 with keep-alive, default port 48852):

    GET  /photon/v1/health
    POST /photon/v1/request          body: receiver PeerIdentity JSON
    GET  /photon/v1/{code}/index
    GET  /photon/v1/{code}/file/{ordinal}    (supports Range)
    POST /photon/v1/{code}/done

The code is a URL path segment of exactly 32 lowercase hex chars; any
other shape 404s without touching the registry. Every 4xx body is empty
so the server reveals nothing about what it serves. File bodies stream in
chunk_size reads, so memory use is independent of file size.
"""
from __future__ import annotations

import errno
import json
import logging
import re
import threading
import time
from collections import deque
from contextlib import contextmanager
from dataclasses import dataclass
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from typing import Callable, Optional, Sequence

from .errors import Busy, PortInUse, UnknownCode
from .model import FileIndex, PeerIdentity
from .session import (
    DEFAULT_DECISION_TIMEOUT,
    Denied,
    Grant,
    POLICY_MANUAL,
    SessionManager,
)

log = logging.getLogger(__name__)

DEFAULT_TRANSFER_PORT = 48852
DEFAULT_CHUNK_SIZE = 65536
MIN_CHUNK_SIZE = 4096
MAX_CHUNK_SIZE = 4 * 1024 * 1024

_ROUTE_HEALTH = re.compile(r"^/photon/v1/health$")
_ROUTE_REQUEST = re.compile(r"^/photon/v1/request$")
_ROUTE_INDEX = re.compile(r"^/photon/v1/([0-9a-f]{32})/index$")
_ROUTE_FILE = re.compile(r"^/photon/v1/([0-9a-f]{32})/file/([0-9]+)$")
_ROUTE_DONE = re.compile(r"^/photon/v1/([0-9a-f]{32})/done$")

_MAX_BODY = 65536  # handshake bodies are tiny identity objects


@dataclass(frozen=True)
class ServerConfig:
    bind_address: str = "0.0.0.0"
    transfer_port: int = DEFAULT_TRANSFER_PORT
    chunk_size: int = DEFAULT_CHUNK_SIZE
    max_concurrent_streams: int = 4

    def __post_init__(self):
        if not (1 <= self.transfer_port <= 65535):
            raise ValueError(f"transfer_port out of range: {self.transfer_port}")
        if not (MIN_CHUNK_SIZE <= self.chunk_size <= MAX_CHUNK_SIZE):
            raise ValueError(f"chunk_size must be in [{MIN_CHUNK_SIZE}, {MAX_CHUNK_SIZE}]")
        if self.max_concurrent_streams < 1:
            raise ValueError("max_concurrent_streams must be >= 1")


def _parse_range(header: str, size: int):
    """Parse "bytes=a-" / "bytes=a-b" against a body of `size` bytes.

    Returns (start, end) inclusive, "unsat" for a satisfiable shape past
    EOF, or None when the header should be ignored (full response).
    """
    if not header.startswith("bytes="):
        return None
    spec = header[len("bytes="):].strip()
    m = re.fullmatch(r"(\d+)-(\d*)", spec)
    if not m:
        return None
    start = int(m.group(1))
    if start >= size:
        return "unsat"
    end = int(m.group(2)) if m.group(2) else size - 1
    if end < start:
        return None
    return start, min(end, size - 1)


class _Handler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"
    timeout = 60  # reap idle keep-alive connections eventually
    server: "_HTTPServer"

    # -- plumbing --

    def log_message(self, fmt, *args):
        log.debug("%s %s", self.address_string(), fmt % args)

    def _record(self, status: int):
        self.server.owner._log_request(self.command, self.path,
                                       self.headers.get("Range"), status)

    def _empty(self, status: int):
        self.send_response(status)
        self.send_header("Content-Length", "0")
        self.end_headers()
        self._record(status)

    def _json(self, status: int, obj: dict):
        body = json.dumps(obj).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)
        self._record(status)

    # -- routing --

    def do_GET(self):
        self.server.owner._inflight_enter()
        try:
            if _ROUTE_HEALTH.match(self.path):
                self._json(200, {"status": "serving"})
                return
            m = _ROUTE_INDEX.match(self.path)
            if m:
                self._handle_index(m.group(1))
                return
            m = _ROUTE_FILE.match(self.path)
            if m:
                self._handle_file(m.group(1), int(m.group(2)))
                return
            self._empty(404)
        finally:
            self.server.owner._inflight_exit()

    def do_POST(self):
        self.server.owner._inflight_enter()
        try:
            if _ROUTE_REQUEST.match(self.path):
                self._handle_handshake()
                return
            m = _ROUTE_DONE.match(self.path)
            if m:
                self._handle_done(m.group(1))
                return
            self._empty(404)
        finally:
            self.server.owner._inflight_exit()

    # -- endpoints --

    def _read_body(self) -> Optional[bytes]:
        try:
            length = int(self.headers.get("Content-Length", ""))
        except ValueError:
            return None
        if not (0 <= length <= _MAX_BODY):
            return None
        return self.rfile.read(length)

    def _handle_handshake(self):
        body = self._read_body()
        if body is None:
            self._empty(400)
            return
        try:
            receiver = PeerIdentity.from_json_dict(json.loads(body))
        except Exception:
            self._empty(400)
            return
        try:
            decision = self.server.owner.session.submit_request(receiver)
        except Busy:
            self._empty(409)
            return
        if isinstance(decision, Grant):
            self._json(200, {
                "status": "granted",
                "code": decision.code,
                "index_path": f"/photon/v1/{decision.code}/index",
            })
        elif isinstance(decision, Denied):
            self._json(200, {"status": "denied"})
        else:  # TimedOut
            self._empty(408)

    def _handle_index(self, code: str):
        try:
            handle = self.server.owner.session.authorize(code)
        except UnknownCode:
            self._empty(404)
            return
        body = handle.index.to_json().encode("utf-8")
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)
        self._record(200)

    def _handle_file(self, code: str, ordinal: int):
        owner = self.server.owner
        try:
            handle = owner.session.authorize(code)
        except UnknownCode:
            self._empty(404)
            return
        if ordinal >= len(handle.index.entries):
            self._empty(404)
            return
        entry = handle.index.entries[ordinal]
        source = owner.sources[ordinal]
        size = entry.size_bytes

        rng = None
        range_header = self.headers.get("Range")
        if range_header:
            rng = _parse_range(range_header, size)
            if rng == "unsat":
                self._empty(416)
                return

        if rng is None:
            start, end, status = 0, size - 1, 200
        else:
            start, end = rng
            status = 206
        length = end - start + 1 if size else 0

        self.send_response(status)
        self.send_header("Content-Type", entry.mime or "application/octet-stream")
        self.send_header("Content-Length", str(length))
        self.send_header("Accept-Ranges", "bytes")
        if status == 206:
            self.send_header("Content-Range", f"bytes {start}-{end}/{size}")
        self.end_headers()
        self._record(status)

        if length == 0:
            return
        chunk_size = owner.config.chunk_size
        with owner.stream_slot():
            try:
                with open(source, "rb") as fh:
                    fh.seek(start)
                    remaining = length
                    while remaining > 0:
                        block = fh.read(min(chunk_size, remaining))
                        if not block:
                            break  # source shrank underneath us; peer sees a short body
                        self.wfile.write(block)
                        remaining -= len(block)
                        owner.session.add_bytes_served(code, len(block))
            except (BrokenPipeError, ConnectionResetError):
                self.close_connection = True  # peer went away; stay healthy

    def _handle_done(self, code: str):
        try:
            self.server.owner.session.receiver_done(code)
        except UnknownCode:
            self._empty(404)
            return
        self._json(200, {"status": "completed"})


class _HTTPServer(ThreadingHTTPServer):
    daemon_threads = True
    block_on_close = False
    owner: "TransferServer"

    def handle_error(self, request, client_address):
        log.debug("connection error from %s", client_address, exc_info=True)


class TransferServer:
    """Server handle: owns the HTTP listener, its thread, and the session.

    stop() is callable from any thread; it terminates the session, stops
    accepting connections, and waits up to `grace` seconds for in-flight
    responses before closing the listener.
    """

    def __init__(self, config: ServerConfig, identity: PeerIdentity,
                 index: FileIndex, sources: Sequence[Path | str],
                 policy: str = POLICY_MANUAL,
                 decision_timeout: float = DEFAULT_DECISION_TIMEOUT,
                 on_event: Optional[Callable[[str, dict], None]] = None):
        if len(sources) != len(index.entries):
            raise ValueError("sources must align with index entries")
        self.config = config
        self.identity = identity
        self.index = index
        self.sources = [Path(p) for p in sources]
        self.session = SessionManager(index, policy=policy,
                                      decision_timeout=decision_timeout,
                                      on_event=on_event)
        self.request_log: deque = deque(maxlen=1000)
        self._log_lock = threading.Lock()
        self._streams = threading.BoundedSemaphore(config.max_concurrent_streams)
        self._inflight = 0
        self._inflight_lock = threading.Lock()
        self._httpd: Optional[_HTTPServer] = None
        self._thread: Optional[threading.Thread] = None

    # -- lifecycle --

    def start(self) -> "TransferServer":
        try:
            httpd = _HTTPServer((self.config.bind_address, self.config.transfer_port), _Handler)
        except OSError as exc:
            if exc.errno in (errno.EADDRINUSE, errno.EACCES):
                raise PortInUse(self.config.transfer_port) from exc
            raise
        httpd.owner = self
        self._httpd = httpd
        self.session.start_serving()
        self._thread = threading.Thread(target=httpd.serve_forever,
                                        name="photon-transfer-server", daemon=True)
        self._thread.start()
        return self

    def stop(self, grace: float = 5.0) -> None:
        if self._httpd is None:
            return
        self.session.stop()
        self._httpd.shutdown()
        deadline = time.monotonic() + grace
        while time.monotonic() < deadline:
            with self._inflight_lock:
                if self._inflight == 0:
                    break
            time.sleep(0.02)
        self._httpd.server_close()
        if self._thread is not None:
            self._thread.join(timeout=grace)
            self._thread = None
        self._httpd = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.stop()

    @property
    def port(self) -> int:
        if self._httpd is None:
            raise RuntimeError("server not started")
        return self._httpd.server_address[1]

    @property
    def running(self) -> bool:
        return self._httpd is not None

    # -- handler support --

    @contextmanager
    def stream_slot(self):
        """Bounds process-wide body buffering to streams x chunk_size."""
        self._streams.acquire()
        try:
            yield
        finally:
            self._streams.release()

    def _log_request(self, method: str, path: str, range_header: Optional[str], status: int):
        with self._log_lock:
            self.request_log.append((method, path, range_header, status))

    def _inflight_enter(self):
        with self._inflight_lock:
            self._inflight += 1

    def _inflight_exit(self):
        with self._inflight_lock:
            self._inflight -= 1


def start_server(config: ServerConfig, identity: PeerIdentity, index: FileIndex,
                 sources: Sequence[Path | str], policy: str = POLICY_MANUAL,
                 decision_timeout: float = DEFAULT_DECISION_TIMEOUT,
                 on_event: Optional[Callable[[str, dict], None]] = None) -> TransferServer:
    """Bind, start serving, and drive the sender machine Idle -> Serving."""
    return TransferServer(config, identity, index, sources, policy=policy,
                          decision_timeout=decision_timeout, on_event=on_event).start()
