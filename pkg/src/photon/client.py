"""Receiver side: permission request, index fetch, verified downloads.

Downloads stream to `<name>.part` in bounded chunks, verify sha256, then
atomically rename into place; an interrupted .part resumes via a Range
request. The receiver state machine is driven through every pipeline so
illegal orderings fail loudly.
"""
from __future__ import annotations

import hashlib
import logging
import os
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Union

import requests

from .errors import (
    AuthError,
    ChecksumMismatch,
    ConnectError,
    ProtocolError,
    TransferIOError,
)
from .model import FileEntry, FileIndex, PeerIdentity
from . import states
from .states import ReceiverState, receiver_transition

log = logging.getLogger(__name__)

DEFAULT_CHUNK_SIZE = 65536
_CODE_LEN = 32


@dataclass(frozen=True)
class TransferProgress:
    """One progress tick, emitted per received chunk and at file completion."""

    ordinal: int
    name: str
    bytes_done: int
    size_bytes: int
    finished: bool = False


ProgressFn = Callable[[TransferProgress], None]


@dataclass
class GrantedOutcome:
    code: str
    index_path: str


@dataclass
class DeniedOutcome:
    pass


@dataclass
class TimedOutOutcome:
    pass


PermissionOutcome = Union[GrantedOutcome, DeniedOutcome, TimedOutOutcome]


@dataclass
class FileReport:
    ordinal: int
    name: str
    bytes_received: int
    duration: float
    sha256_ok: bool
    resumed: bool
    error: Optional[str] = None


@dataclass
class TransferReport:
    files: list[FileReport] = field(default_factory=list)
    total_bytes: int = 0
    wall_duration: float = 0.0
    mean_throughput: float = 0.0
    outcome: str = "failed"  # done | denied | failed | timed_out
    failure: Optional[str] = None
    final_state: str = "Discovering"

    def finalize(self, wall: float) -> None:
        self.total_bytes = sum(f.bytes_received for f in self.files)
        self.wall_duration = wall
        self.mean_throughput = self.total_bytes / wall if wall > 0 else 0.0


def _base_url(peer) -> str:
    return f"http://{peer.host}:{peer.transfer_port}"


def request_permission(peer, self_identity: PeerIdentity, timeout: float = 65.0,
                       http: Optional[requests.Session] = None) -> PermissionOutcome:
    """POST our identity to the peer and wait for the human (or policy)."""
    http = http or requests.Session()
    url = f"{_base_url(peer)}/photon/v1/request"
    try:
        resp = http.post(url, json=self_identity.to_json_dict(), timeout=(10, timeout))
    except requests.exceptions.ConnectTimeout as exc:
        raise ConnectError(str(exc)) from exc
    except requests.exceptions.ConnectionError as exc:
        raise ConnectError(str(exc)) from exc
    except requests.exceptions.Timeout:
        return TimedOutOutcome()
    if resp.status_code == 408:
        return TimedOutOutcome()
    if resp.status_code == 409:
        raise ProtocolError("sender is busy with another session")
    if resp.status_code != 200:
        raise ProtocolError(f"unexpected handshake status {resp.status_code}")
    try:
        obj = resp.json()
        status = obj["status"]
    except Exception as exc:
        raise ProtocolError(f"unparseable handshake response: {exc}") from exc
    if status == "denied":
        return DeniedOutcome()
    if status == "granted":
        code = obj.get("code", "")
        if not isinstance(code, str) or len(code) != _CODE_LEN:
            raise ProtocolError("grant carried a malformed code")
        return GrantedOutcome(code=code, index_path=obj.get("index_path", f"/photon/v1/{code}/index"))
    raise ProtocolError(f"unknown handshake status {status!r}")


def fetch_index(peer, code: str, http: Optional[requests.Session] = None) -> FileIndex:
    """GET and validate the shared file index."""
    http = http or requests.Session()
    url = f"{_base_url(peer)}/photon/v1/{code}/index"
    try:
        resp = http.get(url, timeout=(10, 30))
    except requests.exceptions.ConnectionError as exc:
        raise ConnectError(str(exc)) from exc
    if resp.status_code == 404:
        raise AuthError("index fetch rejected; code revoked or never granted")
    if resp.status_code != 200:
        raise ProtocolError(f"unexpected index status {resp.status_code}")
    try:
        return FileIndex.from_json(resp.content)
    except ValueError as exc:
        raise ProtocolError(f"index violates invariants: {exc}") from exc


def _unique_destination(dest_dir: Path, name: str) -> Path:
    """First free name: `name`, then `stem (1).ext`, `stem (2).ext`, ..."""
    candidate = dest_dir / name
    if not candidate.exists():
        return candidate
    stem, dot, ext = name.partition(".")
    if not stem:  # dotfile like ".profile": treat the whole name as the stem
        stem, dot, ext = name, "", ""
    n = 1
    while True:
        alt = dest_dir / (f"{stem} ({n}).{ext}" if dot else f"{stem} ({n})")
        if not alt.exists():
            return alt
        n += 1


def _hash_existing(path: Path, hasher) -> int:
    size = 0
    with open(path, "rb") as fh:
        while True:
            block = fh.read(1 << 20)
            if not block:
                break
            hasher.update(block)
            size += len(block)
    return size


def _open_stream(http: requests.Session, url: str, offset: int):
    """Open the body stream, negotiating resume.

    Returns (response, effective_offset): a 206 keeps the requested offset;
    a 200 against a ranged request means the server ignored the Range and
    the body is the whole file (offset 0); a 416 retries without a range.
    """
    headers = {"Range": f"bytes={offset}-"} if offset else {}
    try:
        resp = http.get(url, headers=headers, stream=True, timeout=(10, 60))
    except requests.exceptions.ConnectionError as exc:
        raise ConnectError(str(exc)) from exc
    if resp.status_code == 404:
        resp.close()
        raise AuthError("file fetch rejected; code revoked or bad ordinal")
    if offset:
        if resp.status_code == 206:
            return resp, offset
        if resp.status_code == 200:
            return resp, 0
        resp.close()
        if resp.status_code == 416:
            return _open_stream(http, url, 0)
        raise ProtocolError(f"unexpected ranged status {resp.status_code}")
    if resp.status_code != 200:
        resp.close()
        raise ProtocolError(f"unexpected file status {resp.status_code}")
    return resp, 0


def download_file(peer, code: str, entry: FileEntry, dest_dir: Path | str,
                  resume: bool = False, *, chunk_size: int = DEFAULT_CHUNK_SIZE,
                  progress: Optional[ProgressFn] = None,
                  http: Optional[requests.Session] = None) -> FileReport:
    """Stream one file to dest_dir, verify its digest, rename into place.

    With resume=True an existing .part is continued with "Range: bytes=k-";
    a server that ignores the range falls back to a full re-download. On
    checksum mismatch the .part is kept for inspection and never renamed.
    """
    http = http or requests.Session()
    dest_dir = Path(dest_dir)
    dest_dir.mkdir(parents=True, exist_ok=True)
    part = dest_dir / (entry.name + ".part")
    started = time.monotonic()

    hasher = hashlib.sha256()
    offset = 0
    resumed = False
    if resume and part.exists():
        existing = part.stat().st_size
        if 0 < existing <= entry.size_bytes:
            offset = _hash_existing(part, hasher)
            resumed = True
        elif existing > entry.size_bytes:
            part.unlink()  # bigger than the source can be: start over

    bytes_received = 0
    if offset < entry.size_bytes or (entry.size_bytes == 0 and not part.exists()):
        url = f"{_base_url(peer)}/photon/v1/{code}/file/{entry.index}"
        resp, offset = _open_stream(http, url, offset)
        if offset == 0 and resumed:
            # Range was rejected; fall back to a full re-download.
            log.debug("resume rejected for %s; restarting from zero", entry.name)
            resumed = False
            hasher = hashlib.sha256()
        try:
            mode = "ab" if offset else "wb"
            with open(part, mode) as out:
                for block in resp.iter_content(chunk_size=chunk_size):
                    if not block:
                        continue
                    out.write(block)
                    hasher.update(block)
                    bytes_received += len(block)
                    if progress is not None:
                        progress(TransferProgress(
                            ordinal=entry.index, name=entry.name,
                            bytes_done=offset + bytes_received,
                            size_bytes=entry.size_bytes,
                        ))
        except OSError as exc:
            raise TransferIOError(f"writing {part}: {exc}") from exc
        except requests.exceptions.RequestException as exc:
            raise TransferIOError(f"stream from {url} broke: {exc}") from exc
        finally:
            resp.close()
    elif entry.size_bytes == 0:
        part.touch()

    total_on_disk = part.stat().st_size if part.exists() else 0
    if total_on_disk != entry.size_bytes:
        raise TransferIOError(
            f"{entry.name}: got {total_on_disk} bytes, expected {entry.size_bytes}")

    digest = hasher.hexdigest()
    if digest != entry.sha256:
        raise ChecksumMismatch(entry.name, entry.sha256, digest)

    final = _unique_destination(dest_dir, entry.name)
    os.replace(part, final)
    duration = time.monotonic() - started
    if progress is not None:
        progress(TransferProgress(ordinal=entry.index, name=entry.name,
                                  bytes_done=entry.size_bytes,
                                  size_bytes=entry.size_bytes, finished=True))
    return FileReport(ordinal=entry.index, name=final.name,
                      bytes_received=bytes_received, duration=duration,
                      sha256_ok=True, resumed=resumed)


def post_done(peer, code: str, http: Optional[requests.Session] = None) -> bool:
    http = http or requests.Session()
    try:
        resp = http.post(f"{_base_url(peer)}/photon/v1/{code}/done", timeout=(10, 30))
    except requests.exceptions.ConnectionError:
        return False
    return resp.status_code == 200


def receive_all(peer, self_identity: PeerIdentity, dest_dir: Path | str,
                *, decision_timeout: float = 65.0, resume: bool = True,
                chunk_size: int = DEFAULT_CHUNK_SIZE,
                progress: Optional[ProgressFn] = None) -> TransferReport:
    """Full receive pipeline against one discovered peer.

    Permission -> index -> every file in ordinal order -> done. A denial is
    a non-error terminal outcome; per-file failures are recorded and the
    remaining files still download.
    """
    report = TransferReport()
    state: ReceiverState = states.Discovering()
    started = time.monotonic()
    http = requests.Session()

    def finish(outcome: str, failure: Optional[str] = None) -> TransferReport:
        report.outcome = outcome
        report.failure = failure
        report.final_state = states.state_name(state)
        report.finalize(time.monotonic() - started)
        http.close()
        return report

    state = receiver_transition(state, states.PeerChosen())
    try:
        decision = request_permission(peer, self_identity, timeout=decision_timeout, http=http)
    except (ConnectError, ProtocolError) as exc:
        # No table edge for "sender vanished mid-request"; drop to terminal.
        state = states.Failed(str(exc))
        return finish("failed", str(exc))

    if isinstance(decision, DeniedOutcome):
        state = receiver_transition(state, states.DeniedByPeer())
        return finish("denied")
    if isinstance(decision, TimedOutOutcome):
        state = receiver_transition(state, states.Timeout())
        return finish("timed_out", "permission request timed out")

    code = decision.code
    state = receiver_transition(state, states.Granted(code))

    try:
        index = fetch_index(peer, code, http=http)
    except Exception as exc:
        state = receiver_transition(state, states.TransferError(str(exc)))
        return finish("failed", str(exc))

    failures = []
    for entry in index.entries:
        file_started = time.monotonic()
        try:
            file_report = download_file(peer, code, entry, dest_dir, resume=resume,
                                        chunk_size=chunk_size, progress=progress, http=http)
        except (ChecksumMismatch, TransferIOError, AuthError, ConnectError, ProtocolError) as exc:
            failures.append(f"{entry.name}: {exc}")
            report.files.append(FileReport(
                ordinal=entry.index, name=entry.name, bytes_received=0,
                duration=time.monotonic() - file_started, sha256_ok=False,
                resumed=False, error=str(exc)))
            if isinstance(exc, (AuthError, ConnectError)):
                break  # the session is gone; no point trying the rest
            continue
        report.files.append(file_report)

    post_done(peer, code, http=http)

    if failures:
        state = receiver_transition(state, states.TransferError("; ".join(failures)))
        return finish("failed", "; ".join(failures))
    state = receiver_transition(state, states.AllFilesVerified())
    return finish("done")
