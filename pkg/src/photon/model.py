"""Domain types shared by every other module: peers, file entries, the file index.

All types here are immutable values; they validate their invariants at
construction time and are safe to share across threads.
"""
from __future__ import annotations

import hashlib
import json
import re
import secrets
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional

from .errors import DuplicateName, EmptyName, PathNotFound, Unreadable

PROTOCOL_VERSION = 1
PLATFORMS = ("android", "ios", "windows", "linux", "macos", "other")

_HEX32 = re.compile(r"^[0-9a-f]{32}$")
_HEX64 = re.compile(r"^[0-9a-f]{64}$")

# Read granularity for hashing; keeps index construction memory-bounded.
_HASH_CHUNK = 1 << 20


@dataclass(frozen=True)
class PeerIdentity:
    """Who a node is on the LAN."""

    peer_id: str
    display_name: str
    platform: str = "other"
    protocol_version: int = PROTOCOL_VERSION

    def __post_init__(self):
        if not _HEX32.match(self.peer_id):
            raise ValueError(f"peer_id must be 32 lowercase hex chars, got {self.peer_id!r}")
        if not self.display_name.strip():
            raise EmptyName("display_name is empty")
        if len(self.display_name.encode("utf-8")) > 64:
            raise ValueError("display_name exceeds 64 UTF-8 bytes")
        if self.platform not in PLATFORMS:
            raise ValueError(f"unknown platform {self.platform!r}")
        if self.protocol_version < 1:
            raise ValueError("protocol_version must be positive")

    def to_json_dict(self) -> dict:
        return {
            "peer_id": self.peer_id,
            "display_name": self.display_name,
            "platform": self.platform,
            "protocol_version": self.protocol_version,
        }

    @classmethod
    def from_json_dict(cls, obj: dict) -> "PeerIdentity":
        if not isinstance(obj, dict):
            raise ValueError("identity payload must be a JSON object")
        try:
            return cls(
                peer_id=obj["peer_id"],
                display_name=obj["display_name"],
                platform=obj.get("platform", "other"),
                protocol_version=int(obj.get("protocol_version", PROTOCOL_VERSION)),
            )
        except (KeyError, TypeError) as exc:
            raise ValueError(f"bad identity payload: {exc}") from exc


def new_peer_identity(display_name: str, platform: str = "other", rng=None) -> PeerIdentity:
    """Mint an identity with a fresh 128-bit peer id.

    `rng` takes a `random.Random`-like object for deterministic tests;
    the default is the OS secure source.
    """
    if not display_name.strip():
        raise EmptyName("display_name is empty")
    if rng is None:
        peer_id = secrets.token_hex(16)
    else:
        peer_id = f"{rng.getrandbits(128):032x}"
    return PeerIdentity(peer_id=peer_id, display_name=display_name, platform=platform)


def _check_relative_name(name: str) -> None:
    if not name or name in (".", ".."):
        raise ValueError(f"illegal file name {name!r}")
    if "/" in name or "\\" in name or "\x00" in name:
        raise ValueError(f"file name must not contain path separators: {name!r}")


@dataclass(frozen=True)
class FileEntry:
    """One shared file: position in the index, flat name, size, digest."""

    index: int
    name: str
    size_bytes: int
    sha256: str
    mime: Optional[str] = None

    def __post_init__(self):
        if self.index < 0:
            raise ValueError("index must be >= 0")
        _check_relative_name(self.name)
        if self.size_bytes < 0:
            raise ValueError("size_bytes must be >= 0")
        if not _HEX64.match(self.sha256):
            raise ValueError(f"sha256 must be 64 lowercase hex chars, got {self.sha256!r}")
        if self.mime is not None and not isinstance(self.mime, str):
            raise ValueError("mime must be a string when present")

    def to_json_dict(self) -> dict:
        obj = {
            "index": self.index,
            "name": self.name,
            "size_bytes": self.size_bytes,
            "sha256": self.sha256,
        }
        if self.mime is not None:
            obj["mime"] = self.mime
        return obj

    @classmethod
    def from_json_dict(cls, obj: dict) -> "FileEntry":
        if not isinstance(obj, dict):
            raise ValueError("file entry must be a JSON object")
        try:
            return cls(
                index=int(obj["index"]),
                name=obj["name"],
                size_bytes=int(obj["size_bytes"]),
                sha256=obj["sha256"],
                mime=obj.get("mime"),
            )
        except (KeyError, TypeError) as exc:
            raise ValueError(f"bad file entry: {exc}") from exc


@dataclass(frozen=True)
class FileIndex:
    """Ordered manifest of shared files; the receiver fetches this first."""

    entries: tuple[FileEntry, ...]
    total_bytes: int = field(default=-1)

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple(self.entries))
        total = sum(e.size_bytes for e in self.entries)
        if self.total_bytes == -1:
            object.__setattr__(self, "total_bytes", total)
        elif self.total_bytes != total:
            raise ValueError(f"total_bytes {self.total_bytes} != sum of entry sizes {total}")
        for i, entry in enumerate(self.entries):
            if entry.index != i:
                raise ValueError(f"entry ordinal {entry.index} at position {i}: must be gapless 0..n-1")

    def __len__(self) -> int:
        return len(self.entries)

    def to_json(self) -> str:
        return json.dumps(
            {
                "version": 1,
                "total_bytes": self.total_bytes,
                "entries": [e.to_json_dict() for e in self.entries],
            }
        )

    @classmethod
    def from_json(cls, text: str | bytes) -> "FileIndex":
        try:
            obj = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ValueError(f"index is not valid JSON: {exc}") from exc
        if not isinstance(obj, dict) or not isinstance(obj.get("entries"), list):
            raise ValueError("index must be an object with an entries list")
        entries = tuple(FileEntry.from_json_dict(e) for e in obj["entries"])
        total = obj.get("total_bytes")
        if not isinstance(total, int):
            raise ValueError("index is missing total_bytes")
        return cls(entries=entries, total_bytes=total)


def hash_file(path: Path | str) -> str:
    """Streaming sha256 of a file's full contents."""
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        while True:
            block = fh.read(_HASH_CHUNK)
            if not block:
                break
            digest.update(block)
    return digest.hexdigest()


def _expand(paths: Iterable[Path | str]) -> list[Path]:
    """Expand arguments in order; directories recurse in lexicographic order."""
    out: list[Path] = []
    for raw in paths:
        path = Path(raw)
        if not path.exists():
            raise PathNotFound(path)
        if path.is_dir():
            inner = [p for p in sorted(path.rglob("*"), key=lambda p: str(p.relative_to(path)))
                     if p.is_file()]
            out.extend(inner)
        elif path.is_file():
            out.append(path)
        else:
            raise Unreadable(path)  # sockets, fifos, devices
    return out


def indexed_sources(paths: Iterable[Path | str]) -> tuple[FileIndex, tuple[Path, ...]]:
    """Like build_file_index, but also return the on-disk source path for
    each entry, ordinal-aligned, for the serving side."""
    files = _expand(paths)
    seen: set[str] = set()
    entries = []
    for i, path in enumerate(files):
        name = path.name
        _check_relative_name(name)
        if name in seen:
            raise DuplicateName(name)
        seen.add(name)
        try:
            size = path.stat().st_size
            digest = hash_file(path)
        except PermissionError as exc:
            raise Unreadable(path) from exc
        entries.append(FileEntry(index=i, name=name, size_bytes=size, sha256=digest))
    return FileIndex(entries=tuple(entries)), tuple(files)


def build_file_index(paths: Iterable[Path | str]) -> FileIndex:
    """Index the given files/directories: flat names, sizes, sha256 digests.

    Deterministic: same inputs yield a byte-identical serialized index.
    Relative-name collisions are a hard error, never auto-renamed.
    """
    index, _ = indexed_sources(paths)
    return index
