"""One-shot CLI: send, receive, peers, bench, daemon, history.

Exit codes are stable: 0 success, 1 error, 2 denied, 3 no peers found.
"""
from __future__ import annotations

import argparse
import queue
import socket
import sys
import time
from pathlib import Path

from . import __version__, states
from .bench import format_report, run_benchmark
from .client import TransferProgress, receive_all
from .config import (
    AppConfig,
    DEFAULT_CONTROL_PORT,
    default_download_dir,
    history_path,
    local_platform,
)
from .discovery import Responder, probe_and_collect
from .errors import PhotonError
from .history import HistoryRecord, HistoryStore, now_rfc3339
from .model import indexed_sources, new_peer_identity
from .server import DEFAULT_CHUNK_SIZE, DEFAULT_TRANSFER_PORT, ServerConfig, TransferServer

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_DENIED = 2
EXIT_NO_PEERS = 3


def _default_name() -> str:
    name = socket.gethostname() or "photon"
    return name.encode("utf-8")[:64].decode("utf-8", errors="ignore") or "photon"


def _identity(args):
    return new_peer_identity(getattr(args, "name", None) or _default_name(),
                             local_platform())


def _human_bytes(n: int) -> str:
    value = float(n)
    for unit in ("B", "KiB", "MiB", "GiB", "TiB"):
        if value < 1024 or unit == "TiB":
            return f"{value:.1f} {unit}" if unit != "B" else f"{int(value)} B"
        value /= 1024
    return f"{n} B"


# --- send ---

def cmd_send(args) -> int:
    try:
        identity = _identity(args)
        index, sources = indexed_sources(args.paths)
    except (PhotonError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR

    events: queue.Queue = queue.Queue()
    policy = "auto_approve" if args.auto_approve else "manual"
    config = ServerConfig(transfer_port=args.port, chunk_size=args.chunk_size)
    server = TransferServer(config, identity, index, sources, policy=policy,
                            decision_timeout=args.decision_timeout,
                            on_event=lambda kind, data: events.put((kind, data)))
    history = HistoryStore(history_path())

    try:
        server.start()
    except PhotonError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    responder = Responder(identity, server.port)
    try:
        responder.start()
    except PhotonError as exc:
        print(f"error: {exc}", file=sys.stderr)
        server.stop(grace=1.0)
        return EXIT_ERROR

    print(f"serving {len(index.entries)} files ({index.total_bytes} bytes) "
          f"as {identity.display_name}")
    receiver: dict = {}
    granted_at = time.time()
    exit_code = EXIT_ERROR

    def record(outcome: str, reason=None):
        history.append_safely(HistoryRecord(
            timestamp=now_rfc3339(), direction="sent",
            peer_name=receiver.get("display_name", "?"),
            peer_id=receiver.get("peer_id", "?" * 32),
            files=[{"name": e.name, "size_bytes": e.size_bytes} for e in index.entries],
            total_bytes=index.total_bytes,
            duration_seconds=round(time.time() - granted_at, 3),
            outcome=outcome, reason=reason))

    try:
        while True:
            try:
                kind, data = events.get(timeout=0.5)
            except queue.Empty:
                continue
            if kind == "request_received":
                receiver.clear()
                receiver.update(data.get("receiver", {}))
                print(f"incoming request from {receiver.get('display_name')} "
                      f"({receiver.get('platform')})")
                if policy == "manual":
                    answer = input("accept? [y/N] ").strip().lower()
                    try:
                        server.session.decide_request(
                            data["request_id"],
                            "approve" if answer in ("y", "yes") else "deny")
                    except PhotonError:
                        print("request already expired")
            elif kind == "granted":
                granted_at = time.time()
                print("granted; transferring...")
            elif kind == "denied":
                record("denied")
                exit_code = EXIT_DENIED
                break
            elif kind == "expired":
                print("request timed out; still serving")
            elif kind == "completed":
                record("completed")
                print(f"completed: {len(index.entries)} files "
                      f"({_human_bytes(index.total_bytes)}) sent")
                exit_code = EXIT_OK
                break
    except KeyboardInterrupt:
        print("\ninterrupted", file=sys.stderr)
        if isinstance(server.session.state, states.Active):
            record("failed", "interrupted")
        exit_code = EXIT_ERROR
    finally:
        responder.stop()
        server.stop()
    return exit_code


# --- receive ---

def _choose_peer(peers, args):
    if args.from_peer:
        matches = [p for p in peers if p.peer_id == args.from_peer]
        return matches[0] if matches else None
    if len(peers) == 1 or args.auto:
        return peers[0]
    print("discovered peers:")
    for i, p in enumerate(peers, start=1):
        print(f"  {i}. {p.display_name} ({p.platform}) at {p.host}:{p.transfer_port}")
    while True:
        answer = input(f"receive from [1-{len(peers)}]: ").strip()
        if answer.isdigit() and 1 <= int(answer) <= len(peers):
            return peers[int(answer) - 1]
        print("pick a number from the list")


class _ProgressPrinter:
    """One line per file, updated in place, at most every 100 ms."""

    def __init__(self, out=sys.stdout):
        self.out = out
        self._last = 0.0
        self._started = {}

    def __call__(self, p: TransferProgress):
        now = time.monotonic()
        self._started.setdefault(p.ordinal, now)
        if not p.finished and now - self._last < 0.1:
            return
        self._last = now
        pct = 100.0 * p.bytes_done / p.size_bytes if p.size_bytes else 100.0
        elapsed = max(now - self._started[p.ordinal], 1e-9)
        rate = p.bytes_done / elapsed / (1 << 20)
        end = "\n" if p.finished else ""
        print(f"\r{p.name}: {pct:5.1f}%  {rate:7.2f} MB/s", end=end,
              file=self.out, flush=True)


def cmd_receive(args) -> int:
    try:
        identity = _identity(args)
        peers = probe_and_collect(identity, window=args.timeout)
    except (PhotonError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    if not peers:
        print("no peers found")
        return EXIT_NO_PEERS
    peer = _choose_peer(peers, args)
    if peer is None:
        print("no peers found")
        return EXIT_NO_PEERS

    dest = Path(args.dest) if args.dest else default_download_dir()
    print(f"receiving from {peer.display_name} ({peer.host}:{peer.transfer_port}) "
          f"into {dest}")
    report = receive_all(peer, identity, dest, progress=_ProgressPrinter(),
                         chunk_size=args.chunk_size)

    history = HistoryStore(history_path())
    outcome = {"done": "completed", "denied": "denied"}.get(report.outcome, "failed")
    history.append_safely(HistoryRecord(
        timestamp=now_rfc3339(), direction="received",
        peer_name=peer.display_name, peer_id=peer.peer_id,
        files=[{"name": f.name, "size_bytes": f.bytes_received} for f in report.files],
        total_bytes=report.total_bytes,
        duration_seconds=round(report.wall_duration, 3),
        outcome=outcome, reason=report.failure))

    if report.outcome == "done":
        print(f"done: {len(report.files)} files ({_human_bytes(report.total_bytes)}) "
              f"at {report.mean_throughput / (1 << 20):.1f} MB/s")
        return EXIT_OK
    if report.outcome == "denied":
        print("sender denied the request")
        return EXIT_DENIED
    print(f"transfer {report.outcome}: {report.failure}", file=sys.stderr)
    return EXIT_ERROR


# --- peers ---

def cmd_peers(args) -> int:
    try:
        identity = _identity(args)
        peers = probe_and_collect(identity, window=args.timeout)
    except (PhotonError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    if not peers:
        print("no peers found")
        return EXIT_OK
    for p in peers:
        print(f"{p.peer_id}  {p.display_name:<20} {p.platform:<8} "
              f"{p.host}:{p.transfer_port}")
    return EXIT_OK


# --- bench ---

def cmd_bench(args) -> int:
    try:
        sizes = [int(s) for s in args.sizes.split(",") if s.strip()]
    except ValueError:
        print(f"error: --sizes must be a comma list of integers, got {args.sizes!r}",
              file=sys.stderr)
        return EXIT_ERROR
    try:
        report = run_benchmark(sizes, target=args.target, repetitions=args.reps)
    except (PhotonError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    text = format_report(report, args.format)
    print(text, end="" if text.endswith("\n") else "\n")
    if args.out:
        Path(args.out).write_text(text)
        print(f"report written to {args.out}", file=sys.stderr)
    return EXIT_OK


# --- daemon ---

def cmd_daemon(args) -> int:
    from .daemon import run_daemon

    try:
        config = AppConfig(
            display_name=args.name or _default_name(),
            transfer_port=args.port,
            control_port=args.control_port,
            download_dir=Path(args.dest) if args.dest else default_download_dir(),
            chunk_size=args.chunk_size,
        )
        run_daemon(config)
    except PhotonError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    return EXIT_OK


# --- history ---

def cmd_history(args) -> int:
    records, skipped = HistoryStore(history_path()).read()
    if skipped:
        print(f"warning: skipped {skipped} corrupt history line(s)", file=sys.stderr)
    records.reverse()  # newest first
    if args.json:
        import json as _json
        print(_json.dumps([_json.loads(r.to_json_line()) for r in records], indent=2))
        return EXIT_OK
    if not records:
        print("no transfers yet")
        return EXIT_OK
    for r in records:
        files = f"{len(r.files)} file{'s' if len(r.files) != 1 else ''}"
        line = (f"{r.timestamp}  {r.direction:<8} {files} "
                f"({_human_bytes(r.total_bytes)}) peer={r.peer_name} "
                f"{r.outcome} in {r.duration_seconds}s")
        if r.reason:
            line += f" ({r.reason})"
        print(line)
    return EXIT_OK


# --- parser ---

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="photon",
        description="LAN peer-to-peer file transfer: discover, approve, stream.")
    parser.add_argument("--version", action="version", version=f"photon {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    send = sub.add_parser("send", help="share files and wait for a receiver")
    send.add_argument("paths", nargs="+", help="files or directories to share")
    send.add_argument("--name", help="display name announced to peers")
    send.add_argument("--port", type=int, default=DEFAULT_TRANSFER_PORT)
    send.add_argument("--auto-approve", action="store_true",
                      help="grant the first request without prompting")
    send.add_argument("--chunk-size", type=int, default=DEFAULT_CHUNK_SIZE)
    send.add_argument("--decision-timeout", type=float, default=60.0,
                      help="seconds before an unanswered request expires")
    send.set_defaults(func=cmd_send)

    receive = sub.add_parser("receive", help="discover a sender and download")
    receive.add_argument("--from", dest="from_peer", metavar="PEER_ID",
                         help="only accept this peer id")
    receive.add_argument("--dest", help="download directory")
    receive.add_argument("--timeout", type=float, default=2.0,
                         help="discovery window in seconds")
    receive.add_argument("--auto", action="store_true",
                         help="never prompt; take the first discovered peer")
    receive.add_argument("--name", help="display name sent to the peer")
    receive.add_argument("--chunk-size", type=int, default=DEFAULT_CHUNK_SIZE)
    receive.set_defaults(func=cmd_receive)

    peers = sub.add_parser("peers", help="list discoverable senders")
    peers.add_argument("--timeout", type=float, default=2.0)
    peers.add_argument("--name", help="display name used while probing")
    peers.set_defaults(func=cmd_peers)

    bench = sub.add_parser("bench", help="size-vs-time transfer benchmark")
    bench.add_argument("--sizes", default="1,10,100",
                       help="comma list of sizes in MB")
    bench.add_argument("--target", default="loopback",
                       help='"loopback" or HOST:PORT of a serving peer')
    bench.add_argument("--reps", type=int, default=3)
    bench.add_argument("--out", help="also write the report to this path")
    bench.add_argument("--format", choices=("table", "csv", "json"), default="table")
    bench.set_defaults(func=cmd_bench)

    daemon = sub.add_parser("daemon", help="run the control daemon for the web panel")
    daemon.add_argument("--control-port", type=int, default=DEFAULT_CONTROL_PORT)
    daemon.add_argument("--port", type=int, default=DEFAULT_TRANSFER_PORT,
                        help="transfer port used when sharing")
    daemon.add_argument("--name", help="display name announced to peers")
    daemon.add_argument("--dest", help="default download directory")
    daemon.add_argument("--chunk-size", type=int, default=DEFAULT_CHUNK_SIZE)
    daemon.set_defaults(func=cmd_daemon)

    history = sub.add_parser("history", help="show past transfers")
    history.add_argument("--json", action="store_true", help="emit raw records")
    history.set_defaults(func=cmd_history)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except KeyboardInterrupt:
        print("\ninterrupted", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
