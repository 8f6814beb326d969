import hashlib
import threading
import time

import pytest
import requests

from photon.errors import PortInUse
from photon.model import FileIndex, build_file_index, new_peer_identity
from photon.server import ServerConfig, TransferServer, _parse_range
from photon import states

from conftest import free_port


def base(server) -> str:
    return f"http://127.0.0.1:{server.port}"


def grant_code(server, http=None) -> str:
    http = http or requests
    body = new_peer_identity("rx", "android").to_json_dict()
    resp = http.post(f"{base(server)}/photon/v1/request", json=body, timeout=5)
    assert resp.status_code == 200, resp.text
    return resp.json()["code"]


# --- range parsing (unit) ---

def test_parse_range_forms():
    assert _parse_range("bytes=100-", 1000) == (100, 999)
    assert _parse_range("bytes=100-199", 1000) == (100, 199)
    assert _parse_range("bytes=0-99999", 1000) == (0, 999)  # end clamped
    assert _parse_range("bytes=2000-", 1000) == "unsat"
    assert _parse_range("bytes=0-", 0) == "unsat"
    assert _parse_range("bytes=5-2", 1000) is None  # inverted: ignore
    assert _parse_range("bytes=-500", 1000) is None  # suffix form: ignore
    assert _parse_range("items=0-1", 1000) is None
    assert _parse_range("bytes=abc-", 1000) is None


# --- lifecycle ---

def test_health_and_state(served):
    server = served({"a.txt": b"hello"})
    resp = requests.get(f"{base(server)}/photon/v1/health", timeout=5)
    assert resp.status_code == 200
    assert resp.json() == {"status": "serving"}
    assert isinstance(server.session.state, states.Serving)


def test_port_in_use(tmp_path, identity):
    index = build_file_index([])
    port = free_port()
    config = ServerConfig(bind_address="127.0.0.1", transfer_port=port)
    first = TransferServer(config, identity, index, []).start()
    try:
        with pytest.raises(PortInUse):
            TransferServer(config, identity, index, []).start()
    finally:
        first.stop(grace=1.0)


def test_stop_refuses_connections(tmp_path, identity):
    config = ServerConfig(bind_address="127.0.0.1", transfer_port=free_port())
    server = TransferServer(config, identity, build_file_index([]), []).start()
    url = f"http://127.0.0.1:{config.transfer_port}/photon/v1/health"
    assert requests.get(url, timeout=5).status_code == 200
    server.stop(grace=1.0)
    with pytest.raises(requests.exceptions.ConnectionError):
        requests.get(url, timeout=2)
    assert isinstance(server.session.state, states.Terminated)


def test_serving_empty_index_is_legal(served):
    server = served({})
    code = grant_code(server)
    resp = requests.get(f"{base(server)}/photon/v1/{code}/index", timeout=5)
    assert resp.status_code == 200
    assert resp.json()["entries"] == []


def test_config_validation():
    with pytest.raises(ValueError):
        ServerConfig(chunk_size=100)
    with pytest.raises(ValueError):
        ServerConfig(chunk_size=8 * 1024 * 1024)
    with pytest.raises(ValueError):
        ServerConfig(transfer_port=0)
    with pytest.raises(ValueError):
        ServerConfig(max_concurrent_streams=0)


# --- handshake ---

def test_handshake_auto_approve(served):
    server = served({"a.txt": b"hi"})
    resp = requests.post(f"{base(server)}/photon/v1/request",
                         json=new_peer_identity("rx", "ios").to_json_dict(), timeout=5)
    assert resp.status_code == 200
    body = resp.json()
    assert body["status"] == "granted"
    assert len(body["code"]) == 32
    assert body["index_path"] == f"/photon/v1/{body['code']}/index"


def test_handshake_auto_deny(served):
    server = served({"a.txt": b"hi"}, policy="auto_deny")
    resp = requests.post(f"{base(server)}/photon/v1/request",
                         json=new_peer_identity("rx", "ios").to_json_dict(), timeout=5)
    assert resp.status_code == 200
    assert resp.json() == {"status": "denied"}
    assert "code" not in resp.json()


def test_handshake_rejects_garbage(served):
    server = served({"a.txt": b"hi"})
    resp = requests.post(f"{base(server)}/photon/v1/request", data=b"not json", timeout=5)
    assert resp.status_code == 400
    assert resp.content == b""
    resp = requests.post(f"{base(server)}/photon/v1/request",
                         json={"display_name": "x"}, timeout=5)
    assert resp.status_code == 400


def test_handshake_times_out(served):
    server = served({"a.txt": b"hi"}, policy="manual", decision_timeout=0.4)
    start = time.monotonic()
    resp = requests.post(f"{base(server)}/photon/v1/request",
                         json=new_peer_identity("rx", "ios").to_json_dict(), timeout=5)
    assert resp.status_code == 408
    assert resp.content == b""
    assert time.monotonic() - start >= 0.35
    assert isinstance(server.session.state, states.Serving)


def test_handshake_busy_while_active(served):
    server = served({"a.txt": b"hi"})
    grant_code(server)
    resp = requests.post(f"{base(server)}/photon/v1/request",
                         json=new_peer_identity("rx2", "ios").to_json_dict(), timeout=5)
    assert resp.status_code == 409
    assert resp.content == b""


def test_manual_approval_over_http(served):
    server = served({"a.txt": b"hi"}, policy="manual", decision_timeout=10.0)
    result = {}

    def ask():
        result["resp"] = requests.post(
            f"{base(server)}/photon/v1/request",
            json=new_peer_identity("rx", "windows").to_json_dict(), timeout=15)

    t = threading.Thread(target=ask, daemon=True)
    t.start()
    deadline = time.monotonic() + 5.0
    while server.session.pending_request() is None and time.monotonic() < deadline:
        time.sleep(0.01)
    pending = server.session.pending_request()
    assert pending is not None
    assert pending.receiver.display_name == "rx"
    server.session.decide_request(pending.request_id, "approve")
    t.join(timeout=5.0)
    assert result["resp"].json()["status"] == "granted"


# --- index endpoint ---

def test_index_roundtrip(served, tmp_path):
    content = {"a.txt": b"aaa", "b.bin": b"\x00" * 1000}
    server = served(content)
    code = grant_code(server)
    resp = requests.get(f"{base(server)}/photon/v1/{code}/index", timeout=5)
    assert resp.status_code == 200
    fetched = FileIndex.from_json(resp.content)
    assert fetched == server.index
    assert fetched.total_bytes == 1003


def test_index_bogus_and_revoked_codes(served):
    server = served({"a.txt": b"hi"})
    code = grant_code(server)
    bogus = "0" * 32
    resp = requests.get(f"{base(server)}/photon/v1/{bogus}/index", timeout=5)
    assert (resp.status_code, resp.content) == (404, b"")
    # revoke by finishing the session
    assert requests.post(f"{base(server)}/photon/v1/{code}/done", timeout=5).status_code == 200
    resp = requests.get(f"{base(server)}/photon/v1/{code}/index", timeout=5)
    assert (resp.status_code, resp.content) == (404, b"")


def test_malformed_code_shapes_404_without_lookup(served):
    server = served({"a.txt": b"hi"})
    for code in ("short", "Z" * 32, "AB" * 16, "0" * 31, "0" * 33, "../../etc"):
        resp = requests.get(f"{base(server)}/photon/v1/{code}/index", timeout=5)
        assert (resp.status_code, resp.content) == (404, b""), code


# --- file endpoint ---

def test_file_full_body(served, tmp_path):
    payload = bytes(range(256)) * 4  # 1024 bytes, distinctive
    server = served({"a.bin": payload[:1000]})
    code = grant_code(server)
    resp = requests.get(f"{base(server)}/photon/v1/{code}/file/0", timeout=5)
    assert resp.status_code == 200
    assert resp.headers["Content-Length"] == "1000"
    assert resp.content == payload[:1000]


def test_file_range_tail(served):
    payload = bytes(range(256)) * 4
    server = served({"a.bin": payload[:1000]})
    code = grant_code(server)
    resp = requests.get(f"{base(server)}/photon/v1/{code}/file/0",
                        headers={"Range": "bytes=100-"}, timeout=5)
    assert resp.status_code == 206
    assert resp.headers["Content-Range"] == "bytes 100-999/1000"
    assert resp.content == payload[100:1000]


def test_file_range_slice(served):
    payload = bytes(range(256)) * 4
    server = served({"a.bin": payload[:1000]})
    code = grant_code(server)
    resp = requests.get(f"{base(server)}/photon/v1/{code}/file/0",
                        headers={"Range": "bytes=10-19"}, timeout=5)
    assert resp.status_code == 206
    assert resp.content == payload[10:20]


def test_file_range_unsatisfiable(served):
    server = served({"a.bin": b"x" * 1000})
    code = grant_code(server)
    resp = requests.get(f"{base(server)}/photon/v1/{code}/file/0",
                        headers={"Range": "bytes=2000-"}, timeout=5)
    assert (resp.status_code, resp.content) == (416, b"")


def test_file_zero_bytes(served):
    server = served({"empty.bin": b""})
    code = grant_code(server)
    resp = requests.get(f"{base(server)}/photon/v1/{code}/file/0", timeout=5)
    assert resp.status_code == 200
    assert resp.headers["Content-Length"] == "0"
    assert resp.content == b""


def test_file_ordinal_out_of_range(served):
    server = served({"a.txt": b"hi"})
    code = grant_code(server)
    resp = requests.get(f"{base(server)}/photon/v1/{code}/file/5", timeout=5)
    assert (resp.status_code, resp.content) == (404, b"")
    resp = requests.get(f"{base(server)}/photon/v1/{code}/file/x", timeout=5)
    assert (resp.status_code, resp.content) == (404, b"")


def test_file_bytes_hash_to_index_digest(served):
    import os
    payload = os.urandom(300_000)
    server = served({"blob.bin": payload})
    code = grant_code(server)
    entry = server.index.entries[0]
    resp = requests.get(f"{base(server)}/photon/v1/{code}/file/0", timeout=5)
    assert hashlib.sha256(resp.content).hexdigest() == entry.sha256
    assert server.session.bytes_served(code) == entry.size_bytes


def test_concurrent_downloads_identical(served):
    import os
    payload = os.urandom(2_000_000)
    server = served({"big.bin": payload})
    code = grant_code(server)
    digests = []
    lock = threading.Lock()

    def fetch():
        resp = requests.get(f"{base(server)}/photon/v1/{code}/file/0", timeout=30)
        with lock:
            digests.append(hashlib.sha256(resp.content).hexdigest())

    threads = [threading.Thread(target=fetch) for _ in range(4)]
    for t in threads:
        t.start()
    for t in threads:
        t.join(timeout=30)
    assert len(set(digests)) == 1
    assert digests[0] == hashlib.sha256(payload).hexdigest()


# --- done endpoint ---

def test_done_flow(served):
    server = served({"a.txt": b"hi"})
    code = grant_code(server)
    resp = requests.post(f"{base(server)}/photon/v1/{code}/done", timeout=5)
    assert resp.status_code == 200
    assert resp.json() == {"status": "completed"}
    assert isinstance(server.session.state, states.Completed)
    # double done: code is gone
    resp = requests.post(f"{base(server)}/photon/v1/{code}/done", timeout=5)
    assert (resp.status_code, resp.content) == (404, b"")


def test_done_bogus_code(served):
    server = served({"a.txt": b"hi"})
    resp = requests.post(f"{base(server)}/photon/v1/{'0' * 32}/done", timeout=5)
    assert (resp.status_code, resp.content) == (404, b"")


# --- leak discipline ---

def test_every_4xx_has_empty_body(served):
    server = served({"secret-name.txt": b"secret-bytes"}, policy="manual",
                    decision_timeout=0.2)
    code_like = "f" * 32
    cases = [
        ("GET", f"/photon/v1/{code_like}/index", None),
        ("GET", f"/photon/v1/{code_like}/file/0", None),
        ("POST", f"/photon/v1/{code_like}/done", None),
        ("GET", "/photon/v1/unknown", None),
        ("GET", "/", None),
        ("POST", "/photon/v1/request", b"junk"),
    ]
    for method, path, data in cases:
        resp = requests.request(method, base(server) + path, data=data, timeout=5)
        assert 400 <= resp.status_code < 500, (method, path)
        assert resp.content == b"", (method, path)
        assert b"secret" not in resp.content


def test_request_log_records_order(served):
    server = served({"a.txt": b"one", "b.txt": b"two"})
    code = grant_code(server)
    requests.get(f"{base(server)}/photon/v1/{code}/index", timeout=5)
    requests.get(f"{base(server)}/photon/v1/{code}/file/0", timeout=5)
    requests.get(f"{base(server)}/photon/v1/{code}/file/1", timeout=5)
    paths = [p for (_, p, _, _) in server.request_log]
    idx_pos = paths.index(f"/photon/v1/{code}/index")
    f0_pos = paths.index(f"/photon/v1/{code}/file/0")
    f1_pos = paths.index(f"/photon/v1/{code}/file/1")
    assert idx_pos < f0_pos < f1_pos
