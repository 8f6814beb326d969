"""Size-vs-time benchmark harness.

Runs full sender+receiver pipelines over loopback (or against a remote
peer), times each transfer end to end, and fits time against size. The
report prints published Wi-Fi reference timings alongside local rows for
context; those references are environment-bound and never asserted.
"""
from __future__ import annotations

import errno
import json
import platform
import random
import socket
import statistics
import sys
import tempfile
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import psutil

from .client import receive_all
from .discovery import DiscoveredPeer
from .errors import DiskFull, EmptySizes, PhotonError, TargetUnreachable
from .model import PeerIdentity, indexed_sources, new_peer_identity
from .server import ServerConfig, TransferServer

MIB = 1 << 20

# Reference Wi-Fi timings measured between macOS Ventura and Android 13
# (size_mb, seconds). Printed in report footers for comparison only.
WIFI_REFERENCE_ROWS = (
    (1, 0.039),
    (10, 0.4),
    (20, 1.0),
    (50, 2.0),
    (100, 5.0),
    (1000, 62.0),
    (5000, 314.0),
)


@dataclass(frozen=True)
class BenchRow:
    size_mb: float
    seconds: float
    throughput_mb_s: float


@dataclass(frozen=True)
class LinearFit:
    slope: float  # seconds per MB
    intercept: float
    r_squared: float


@dataclass
class BenchReport:
    rows: list[BenchRow]
    fit: LinearFit
    peak_client_mem: int
    peak_server_mem: int
    environment: str

    def __post_init__(self):
        sizes = [r.size_mb for r in self.rows]
        if sizes != sorted(sizes):
            raise ValueError("rows must be sorted ascending by size_mb")
        if not (0.0 <= self.fit.r_squared <= 1.0):
            raise ValueError("r_squared must lie in [0, 1]")

    def to_json(self) -> str:
        return json.dumps({
            "rows": [{"size_mb": r.size_mb, "seconds": r.seconds,
                      "throughput_mb_s": r.throughput_mb_s} for r in self.rows],
            "linear_fit": {"slope": self.fit.slope, "intercept": self.fit.intercept,
                           "r_squared": self.fit.r_squared},
            "peak_client_mem": self.peak_client_mem,
            "peak_server_mem": self.peak_server_mem,
            "environment": self.environment,
        })

    @classmethod
    def from_json(cls, text: str | bytes) -> "BenchReport":
        obj = json.loads(text)
        return cls(
            rows=[BenchRow(r["size_mb"], r["seconds"], r["throughput_mb_s"])
                  for r in obj["rows"]],
            fit=LinearFit(obj["linear_fit"]["slope"], obj["linear_fit"]["intercept"],
                          obj["linear_fit"]["r_squared"]),
            peak_client_mem=obj["peak_client_mem"],
            peak_server_mem=obj["peak_server_mem"],
            environment=obj["environment"],
        )


class MemorySampler:
    """Samples this process's RSS on a short interval; keeps the peak."""

    def __init__(self, interval: float = 0.02):
        self._proc = psutil.Process()
        self._interval = interval
        self._stop = threading.Event()
        self._thread: Optional[threading.Thread] = None
        self.baseline = 0
        self.peak = 0

    def __enter__(self) -> "MemorySampler":
        self.baseline = self.peak = self._proc.memory_info().rss
        self._stop.clear()
        self._thread = threading.Thread(target=self._run, daemon=True)
        self._thread.start()
        return self

    def __exit__(self, *exc):
        self._stop.set()
        if self._thread:
            self._thread.join(timeout=1.0)

    def _run(self):
        while not self._stop.wait(self._interval):
            rss = self._proc.memory_info().rss
            if rss > self.peak:
                self.peak = rss

    @property
    def growth(self) -> int:
        return max(0, self.peak - self.baseline)


def generate_payload(size_mb: int, seed: int, dest_dir: Path | str) -> Path:
    """Deterministic pseudo-random file of exactly size_mb * 2**20 bytes.

    Same (size, seed) always hashes identically; an existing file of the
    right size is reused.
    """
    if size_mb < 0:
        raise ValueError("size_mb must be >= 0")
    dest_dir = Path(dest_dir)
    dest_dir.mkdir(parents=True, exist_ok=True)
    path = dest_dir / f"payload-{size_mb}mb-seed{seed}.bin"
    total = size_mb * MIB
    if path.exists() and path.stat().st_size == total:
        return path
    rng = random.Random(seed)
    try:
        with open(path, "wb") as fh:
            remaining = total
            while remaining > 0:
                block = rng.randbytes(min(MIB, remaining))
                fh.write(block)
                remaining -= len(block)
    except OSError as exc:
        if exc.errno == errno.ENOSPC:
            raise DiskFull(str(path)) from exc
        raise
    return path


def _free_port() -> int:
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        return s.getsockname()[1]


def _fit(sizes: Sequence[float], seconds: Sequence[float]) -> LinearFit:
    if len(sizes) < 2:
        size, secs = sizes[0], seconds[0]
        return LinearFit(slope=secs / size if size else 0.0, intercept=0.0, r_squared=1.0)
    reg = statistics.linear_regression(sizes, seconds)
    try:
        r2 = statistics.correlation(sizes, seconds) ** 2
    except statistics.StatisticsError:
        r2 = 0.0
    return LinearFit(slope=reg.slope, intercept=reg.intercept, r_squared=r2)


def _environment(note: str = "") -> str:
    desc = f"{platform.platform()} python-{platform.python_version()} cpus={psutil.cpu_count()}"
    return f"{desc}; {note}" if note else desc


def _time_loopback_transfer(payload: Path, identity: PeerIdentity,
                            receiver: PeerIdentity, workdir: Path, rep: int,
                            chunk_size: int) -> float:
    """One full receive_all against a fresh single-file server lifecycle."""
    index, sources = indexed_sources([payload])
    config = ServerConfig(bind_address="127.0.0.1", transfer_port=_free_port(),
                          chunk_size=chunk_size)
    server = TransferServer(config, identity, index, sources, policy="auto_approve")
    server.start()
    dest = workdir / f"dest-{payload.stem}-r{rep}"
    try:
        peer = DiscoveredPeer(peer_id=identity.peer_id, display_name=identity.display_name,
                              platform=identity.platform, transfer_port=server.port,
                              host="127.0.0.1", source_port=0, seen_at=0.0)
        report = receive_all(peer, receiver, dest, chunk_size=chunk_size)
        if report.outcome != "done":
            raise PhotonError(f"benchmark transfer failed: {report.failure}")
        return report.wall_duration
    finally:
        server.stop(grace=1.0)
        if dest.exists():
            for leftover in dest.glob("*"):
                leftover.unlink()
            dest.rmdir()


def _time_remote_transfer(target: str, receiver: PeerIdentity, workdir: Path,
                          rep: int) -> tuple[float, int]:
    host, _, port_text = target.partition(":")
    try:
        port = int(port_text)
    except ValueError:
        raise TargetUnreachable(target) from None
    peer = DiscoveredPeer(peer_id="0" * 32, display_name=target, platform="other",
                          transfer_port=port, host=host, source_port=0, seen_at=0.0)
    dest = workdir / f"dest-remote-r{rep}"
    try:
        report = receive_all(peer, receiver, dest)
        if report.outcome != "done":
            raise TargetUnreachable(f"{target}: {report.failure or report.outcome}")
        return report.wall_duration, report.total_bytes
    finally:
        if dest.exists():
            for leftover in dest.glob("*"):
                leftover.unlink()
            dest.rmdir()


def run_benchmark(sizes_mb: Sequence[int], target: str = "loopback",
                  repetitions: int = 3, *, workdir: Optional[Path | str] = None,
                  seed: int = 1234, chunk_size: int = 65536) -> BenchReport:
    """Median-of-N timings per size, linear fit, memory high-water marks.

    Loopback mode generates payloads and runs sender+receiver in-process;
    "HOST:PORT" mode times downloads of whatever index the peer serves
    (one row sized by the remote total).
    """
    if not sizes_mb:
        raise EmptySizes("no sizes given")
    if any(s < 1 for s in sizes_mb):
        raise ValueError("benchmark sizes must be >= 1 MB")
    if repetitions < 1:
        raise ValueError("repetitions must be >= 1")

    own_tmp = None
    if workdir is None:
        own_tmp = tempfile.TemporaryDirectory(prefix="photon-bench-")
        workdir = own_tmp.name
    workdir = Path(workdir)

    identity = new_peer_identity("bench-sender", _local_platform())
    receiver = new_peer_identity("bench-receiver", _local_platform())

    rows: list[BenchRow] = []
    try:
        with MemorySampler() as mem:
            if target == "loopback":
                for size in sorted(sizes_mb):
                    payload = generate_payload(size, seed, workdir / "payloads")
                    times = [
                        _time_loopback_transfer(payload, identity, receiver, workdir,
                                                rep, chunk_size)
                        for rep in range(repetitions)
                    ]
                    median = statistics.median(times)
                    rows.append(BenchRow(size_mb=float(size), seconds=median,
                                         throughput_mb_s=size / median))
                note = "loopback, sender+receiver in one process (memory peaks are process-wide)"
            else:
                samples = [_time_remote_transfer(target, receiver, workdir, rep)
                           for rep in range(repetitions)]
                median = statistics.median(t for t, _ in samples)
                size = samples[0][1] / MIB
                rows.append(BenchRow(size_mb=size, seconds=median,
                                     throughput_mb_s=size / median if median else 0.0))
                note = f"remote target {target}; size taken from the peer's index"
    finally:
        if own_tmp is not None:
            own_tmp.cleanup()

    fit = _fit([r.size_mb for r in rows], [r.seconds for r in rows])
    return BenchReport(rows=rows, fit=fit, peak_client_mem=mem.peak,
                       peak_server_mem=mem.peak, environment=_environment(note))


def _local_platform() -> str:
    if sys.platform.startswith("linux"):
        return "linux"
    if sys.platform == "darwin":
        return "macos"
    if sys.platform in ("win32", "cygwin"):
        return "windows"
    return "other"


def format_report(report: BenchReport, fmt: str = "table") -> str:
    """Render a report as an aligned table, csv, or json. Deterministic."""
    if fmt == "json":
        return report.to_json()
    if fmt == "csv":
        lines = ["size_mb,seconds,throughput_mb_s"]
        lines += [f"{r.size_mb!r},{r.seconds!r},{r.throughput_mb_s!r}" for r in report.rows]
        return "\n".join(lines) + "\n"
    if fmt != "table":
        raise ValueError(f"unknown format {fmt!r}")

    lines = [f"{'size (MB)':>10}  {'time (s)':>10}  {'MB/s':>10}"]
    for r in report.rows:
        lines.append(f"{r.size_mb:>10.1f}  {r.seconds:>10.3f}  {r.throughput_mb_s:>10.1f}")
    lines.append("")
    lines.append(f"linear fit: seconds = {report.fit.slope:.5f} * size_mb + "
                 f"{report.fit.intercept:.5f}   (r^2 = {report.fit.r_squared:.4f})")
    lines.append(f"peak rss: client={report.peak_client_mem // MIB} MiB "
                 f"server={report.peak_server_mem // MIB} MiB")
    lines.append(f"environment: {report.environment}")
    lines.append("")
    lines.append("reference Wi-Fi timings (macOS Ventura <-> Android 13), for context:")
    for size, secs in WIFI_REFERENCE_ROWS:
        lines.append(f"{size:>10.1f}  {secs:>10.3f}  {size / secs:>10.1f}")
    return "\n".join(lines) + "\n"
