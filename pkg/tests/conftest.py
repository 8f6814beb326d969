import json
import socket
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

import pytest

from photon.discovery import DiscoveredPeer
from photon.model import PeerIdentity, indexed_sources, new_peer_identity
from photon.server import ServerConfig, TransferServer


def free_port() -> int:
    """Grab an ephemeral port number; tiny race window, fine for tests."""
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        return s.getsockname()[1]


@pytest.fixture
def identity() -> PeerIdentity:
    return new_peer_identity("test-sender", "linux")


@pytest.fixture
def receiver_identity() -> PeerIdentity:
    return new_peer_identity("test-receiver", "linux")


@pytest.fixture
def photon_home(tmp_path, monkeypatch) -> Path:
    home = tmp_path / "photon-home"
    home.mkdir()
    monkeypatch.setenv("PHOTON_HOME", str(home))
    return home


def write_tree(root: Path, files: dict[str, bytes]) -> list[Path]:
    """Create files under root; keys may contain subdirectories."""
    paths = []
    for rel, content in files.items():
        p = root / rel
        p.parent.mkdir(parents=True, exist_ok=True)
        p.write_bytes(content)
        paths.append(p)
    return paths


def loopback_peer(port: int, peer_id: str = "ab" * 16, name: str = "sender") -> DiscoveredPeer:
    return DiscoveredPeer(peer_id=peer_id, display_name=name, platform="linux",
                          transfer_port=port, host="127.0.0.1", source_port=0, seen_at=0.0)


@pytest.fixture
def served(tmp_path, identity):
    """Factory: start a transfer server for the given files, auto-stopped."""
    servers = []

    def _make(files: dict[str, bytes], policy: str = "auto_approve",
              decision_timeout: float = 60.0, chunk_size: int = 65536,
              on_event=None) -> TransferServer:
        share = tmp_path / f"share{len(servers)}"
        share.mkdir()
        paths = write_tree(share, files)
        index, sources = indexed_sources(sorted(paths))
        config = ServerConfig(bind_address="127.0.0.1", transfer_port=free_port(),
                              chunk_size=chunk_size)
        server = TransferServer(config, identity, index, sources, policy=policy,
                                decision_timeout=decision_timeout, on_event=on_event)
        server.start()
        servers.append(server)
        return server

    yield _make
    for server in servers:
        server.stop(grace=1.0)


class _CannedHandler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"

    def log_message(self, fmt, *args):
        pass

    def _serve(self):
        route = self.server.routes.get((self.command, self.path))
        if route is None:
            self.send_response(404)
            self.send_header("Content-Length", "0")
            self.end_headers()
            return
        status, body = route(self) if callable(route) else route
        if isinstance(body, (dict, list)):
            body = json.dumps(body).encode()
        self.send_response(status)
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        if self.command != "HEAD":
            self.wfile.write(body)

    do_GET = _serve
    do_POST = _serve


@pytest.fixture
def canned_server():
    """Fake HTTP peer serving canned (status, body) responses per route."""
    servers = []

    def _make(routes: dict) -> int:
        httpd = ThreadingHTTPServer(("127.0.0.1", 0), _CannedHandler)
        httpd.routes = routes
        httpd.daemon_threads = True
        threading.Thread(target=httpd.serve_forever, daemon=True).start()
        servers.append(httpd)
        return httpd.server_address[1]

    yield _make
    for httpd in servers:
        httpd.shutdown()
        httpd.server_close()
