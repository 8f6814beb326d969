"""Append-only transfer history as JSON Lines.

One record per terminated session, flushed durably before the append
returns. Corrupt lines are skipped on read (with a count), never fatal.
"""
from __future__ import annotations

import json
import logging
import os
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional

log = logging.getLogger(__name__)


def now_rfc3339() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds").replace("+00:00", "Z")


@dataclass
class HistoryRecord:
    timestamp: str  # RFC 3339 UTC
    direction: str  # sent | received
    peer_name: str
    peer_id: str
    files: list[dict]  # [{"name": ..., "size_bytes": ...}]
    total_bytes: int
    duration_seconds: float
    outcome: str  # completed | denied | failed
    reason: Optional[str] = None  # set when outcome == failed

    def to_json_line(self) -> str:
        obj = {
            "timestamp": self.timestamp,
            "direction": self.direction,
            "peer_name": self.peer_name,
            "peer_id": self.peer_id,
            "files": self.files,
            "total_bytes": self.total_bytes,
            "duration_seconds": self.duration_seconds,
            "outcome": self.outcome,
        }
        if self.reason is not None:
            obj["reason"] = self.reason
        return json.dumps(obj)

    @classmethod
    def from_json_line(cls, line: str) -> "HistoryRecord":
        obj = json.loads(line)
        if not isinstance(obj, dict):
            raise ValueError("history line is not an object")
        try:
            record = cls(
                timestamp=obj["timestamp"],
                direction=obj["direction"],
                peer_name=obj["peer_name"],
                peer_id=obj["peer_id"],
                files=list(obj["files"]),
                total_bytes=int(obj["total_bytes"]),
                duration_seconds=float(obj["duration_seconds"]),
                outcome=obj["outcome"],
                reason=obj.get("reason"),
            )
        except (KeyError, TypeError) as exc:
            raise ValueError(f"bad history line: {exc}") from exc
        if record.direction not in ("sent", "received"):
            raise ValueError(f"bad direction {record.direction!r}")
        if record.outcome not in ("completed", "denied", "failed"):
            raise ValueError(f"bad outcome {record.outcome!r}")
        return record


class HistoryStore:
    def __init__(self, path: Path | str):
        self.path = Path(path)

    def append(self, record: HistoryRecord) -> None:
        """One line, one write syscall, fsynced before returning."""
        line = record.to_json_line() + "\n"
        self.path.parent.mkdir(parents=True, exist_ok=True)
        with open(self.path, "a", encoding="utf-8") as fh:
            fh.write(line)
            fh.flush()
            os.fsync(fh.fileno())

    def append_safely(self, record: HistoryRecord) -> None:
        """History must never fail a transfer; log and move on."""
        try:
            self.append(record)
        except OSError as exc:
            log.warning("could not append history record: %s", exc)

    def read(self) -> tuple[list[HistoryRecord], int]:
        """All records in file order plus the count of skipped bad lines."""
        if not self.path.exists():
            return [], 0
        records: list[HistoryRecord] = []
        skipped = 0
        with open(self.path, "r", encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                try:
                    records.append(HistoryRecord.from_json_line(line))
                except (ValueError, json.JSONDecodeError):
                    skipped += 1
        return records, skipped
