"""Receiver-initiated LAN discovery over UDP port 48851.

The receiver broadcasts a probe datagram; every serving sender replies
with a unicast announce carrying its transfer port. Datagrams are UTF-8
JSON, at most 1024 bytes, one message per datagram.
"""
from __future__ import annotations

import errno
import json
import socket
import threading
import time
from dataclasses import dataclass
from typing import Optional, Union

import psutil

from .errors import BadMagic, Malformed, NoInterface, Oversize, PortInUse, UnknownType
from .model import PLATFORMS, PeerIdentity

DISCOVERY_PORT = 48851
MAGIC = "PHOTON/1"
MAX_DATAGRAM = 1024

_RECV_BUF = 2048


@dataclass(frozen=True)
class ProbeMessage:
    peer_id: str
    display_name: str


@dataclass(frozen=True)
class AnnounceMessage:
    peer_id: str
    display_name: str
    platform: str
    transfer_port: int


Message = Union[ProbeMessage, AnnounceMessage]


@dataclass(frozen=True)
class DiscoveredPeer:
    """An announce plus where it actually came from.

    `host` is the datagram's source address, never a payload field, so a
    forged announce cannot redirect transfers to a third-party host.
    """

    peer_id: str
    display_name: str
    platform: str
    transfer_port: int
    host: str
    source_port: int
    seen_at: float


def encode_message(msg: Message) -> bytes:
    """Serialize to a compact JSON datagram with a stable key order."""
    if isinstance(msg, ProbeMessage):
        obj = {
            "magic": MAGIC,
            "type": "probe",
            "peer_id": msg.peer_id,
            "display_name": msg.display_name,
        }
    elif isinstance(msg, AnnounceMessage):
        if not (1 <= msg.transfer_port <= 65535):
            raise ValueError(f"transfer_port out of range: {msg.transfer_port}")
        obj = {
            "magic": MAGIC,
            "type": "announce",
            "peer_id": msg.peer_id,
            "display_name": msg.display_name,
            "platform": msg.platform,
            "transfer_port": msg.transfer_port,
        }
    else:
        raise TypeError(f"not a discovery message: {msg!r}")
    data = json.dumps(obj, separators=(",", ":"), ensure_ascii=False).encode("utf-8")
    if len(data) > MAX_DATAGRAM:
        raise Oversize(f"datagram would be {len(data)} bytes (limit {MAX_DATAGRAM})")
    return data


def decode_message(datagram: bytes) -> Message:
    """Parse a datagram; unknown JSON keys are ignored.

    Raises BadMagic for foreign traffic (safe to drop silently), Malformed
    for broken payloads, UnknownType for ours-but-unrecognized messages.
    """
    try:
        obj = json.loads(datagram.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise Malformed(f"not a JSON datagram: {exc}") from exc
    if not isinstance(obj, dict):
        raise Malformed("datagram is not a JSON object")
    if obj.get("magic") != MAGIC:
        raise BadMagic(f"magic {obj.get('magic')!r}")
    kind = obj.get("type")
    if kind == "probe":
        try:
            msg = ProbeMessage(peer_id=obj["peer_id"], display_name=obj["display_name"])
        except KeyError as exc:
            raise Malformed(f"probe missing field {exc}") from exc
        if not isinstance(msg.peer_id, str) or not isinstance(msg.display_name, str):
            raise Malformed("probe field has wrong type")
        return msg
    if kind == "announce":
        try:
            msg = AnnounceMessage(
                peer_id=obj["peer_id"],
                display_name=obj["display_name"],
                platform=obj["platform"],
                transfer_port=obj["transfer_port"],
            )
        except KeyError as exc:
            raise Malformed(f"announce missing field {exc}") from exc
        if (
            not isinstance(msg.peer_id, str)
            or not isinstance(msg.display_name, str)
            or not isinstance(msg.platform, str)
            or not isinstance(msg.transfer_port, int)
            or isinstance(msg.transfer_port, bool)
            or not 1 <= msg.transfer_port <= 65535
        ):
            raise Malformed("announce field has wrong type or range")
        return msg
    raise UnknownType(f"type {kind!r}")


class Responder:
    """Answers probes with unicast announces while a sender is serving.

    Owns its socket exclusively; start() binds (raising PortInUse
    synchronously), stop() unblocks the loop by closing the socket, so
    shutdown completes well inside the 500 ms budget.
    """

    def __init__(self, identity: PeerIdentity, transfer_port: int, *, port: int = DISCOVERY_PORT):
        self.identity = identity
        self.transfer_port = transfer_port
        self.port = port
        self._sock: Optional[socket.socket] = None
        self._thread: Optional[threading.Thread] = None
        self._stop = threading.Event()

    def start(self) -> "Responder":
        sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
        try:
            sock.bind(("0.0.0.0", self.port))
        except OSError as exc:
            sock.close()
            if exc.errno in (errno.EADDRINUSE, errno.EACCES):
                raise PortInUse(self.port) from exc
            raise
        # Fallback poll interval: a thread blocked in recvfrom keeps the
        # kernel socket (and the port) alive even after close().
        sock.settimeout(0.25)
        self._sock = sock
        self._stop.clear()
        self._thread = threading.Thread(target=self._run, name="photon-responder", daemon=True)
        self._thread.start()
        return self

    def stop(self) -> None:
        self._stop.set()
        # Nudge the blocked recvfrom so shutdown is immediate.
        try:
            with socket.socket(socket.AF_INET, socket.SOCK_DGRAM) as wake:
                wake.sendto(b"", ("127.0.0.1", self.port))
        except OSError:
            pass
        if self._thread is not None:
            self._thread.join(timeout=1.0)
            self._thread = None
        if self._sock is not None:
            self._sock.close()
            self._sock = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.stop()

    def _run(self) -> None:
        announce = encode_message(
            AnnounceMessage(
                peer_id=self.identity.peer_id,
                display_name=self.identity.display_name,
                platform=self.identity.platform,
                transfer_port=self.transfer_port,
            )
        )
        sock = self._sock
        while not self._stop.is_set():
            try:
                datagram, addr = sock.recvfrom(_RECV_BUF)
            except socket.timeout:
                continue
            except OSError:
                break  # socket closed underneath us
            if self._stop.is_set():
                break
            try:
                msg = decode_message(datagram)
            except (BadMagic, Malformed, UnknownType):
                continue
            if not isinstance(msg, ProbeMessage):
                continue
            if msg.peer_id == self.identity.peer_id:
                continue  # never answer our own probe
            try:
                sock.sendto(announce, addr)  # exactly one reply per probe
            except OSError:
                continue


def run_responder(identity: PeerIdentity, transfer_port: int, stop: threading.Event,
                  *, port: int = DISCOVERY_PORT) -> None:
    """Blocking variant: answer probes until `stop` is set."""
    responder = Responder(identity, transfer_port, port=port)
    responder.start()
    try:
        stop.wait()
    finally:
        responder.stop()


def _probe_destinations() -> list[str]:
    """Everywhere a probe goes: limited broadcast, per-interface subnet
    broadcasts, and loopback (some hosts have no broadcast-capable iface)."""
    dests = ["255.255.255.255"]
    has_ipv4 = False
    for addrs in psutil.net_if_addrs().values():
        for addr in addrs:
            if addr.family == socket.AF_INET:
                has_ipv4 = True
                if addr.broadcast and addr.broadcast not in dests:
                    dests.append(addr.broadcast)
    if not has_ipv4:
        raise NoInterface("no IPv4 interface available")
    if "127.0.0.1" not in dests:
        dests.append("127.0.0.1")
    return dests


def probe_and_collect(identity: PeerIdentity, window: float = 2.0,
                      *, port: int = DISCOVERY_PORT) -> list[DiscoveredPeer]:
    """Broadcast one probe and collect announces for `window` seconds.

    Deduplicates by peer_id keeping the latest announce, excludes our own
    peer_id, and returns peers sorted by display_name then peer_id.
    """
    if window <= 0:
        raise ValueError("window must be > 0")
    probe = encode_message(ProbeMessage(peer_id=identity.peer_id, display_name=identity.display_name))
    sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
    try:
        sock.setsockopt(socket.SOL_SOCKET, socket.SO_BROADCAST, 1)
        sock.bind(("", 0))
        sent = 0
        for dest in _probe_destinations():
            try:
                sock.sendto(probe, (dest, port))
                sent += 1
            except OSError:
                continue  # interface may reject broadcast; others can still work
        if sent == 0:
            raise NoInterface("could not send a probe on any interface")

        peers: dict[str, DiscoveredPeer] = {}
        deadline = time.monotonic() + window
        while True:
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                break
            sock.settimeout(remaining)
            try:
                datagram, addr = sock.recvfrom(_RECV_BUF)
            except socket.timeout:
                break
            except OSError:
                break
            try:
                msg = decode_message(datagram)
            except (BadMagic, Malformed, UnknownType):
                continue
            if not isinstance(msg, AnnounceMessage):
                continue
            if msg.peer_id == identity.peer_id:
                continue  # self-exclusion
            peers[msg.peer_id] = DiscoveredPeer(
                peer_id=msg.peer_id,
                display_name=msg.display_name,
                platform=msg.platform if msg.platform in PLATFORMS else "other",
                transfer_port=msg.transfer_port,
                host=addr[0],
                source_port=addr[1],
                seen_at=time.monotonic(),
            )
    finally:
        sock.close()
    return sorted(peers.values(), key=lambda p: (p.display_name, p.peer_id))
