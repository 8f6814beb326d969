"""App configuration and on-disk locations."""
from __future__ import annotations

import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

from .server import DEFAULT_CHUNK_SIZE, DEFAULT_TRANSFER_PORT

DEFAULT_CONTROL_PORT = 48853


def photon_home() -> Path:
    """State directory: $PHOTON_HOME, else the platform app-data dir."""
    env = os.environ.get("PHOTON_HOME")
    if env:
        home = Path(env)
    elif sys.platform == "darwin":
        home = Path.home() / "Library" / "Application Support" / "photon"
    elif sys.platform in ("win32", "cygwin"):
        home = Path(os.environ.get("APPDATA", Path.home())) / "photon"
    else:
        xdg = os.environ.get("XDG_DATA_HOME")
        base = Path(xdg) if xdg else Path.home() / ".local" / "share"
        home = base / "photon"
    home.mkdir(parents=True, exist_ok=True)
    return home


def history_path() -> Path:
    return photon_home() / "history.jsonl"


def default_download_dir() -> Path:
    downloads = Path.home() / "Downloads"
    return downloads if downloads.is_dir() else Path.cwd()


def local_platform() -> str:
    if sys.platform.startswith("linux"):
        return "linux"
    if sys.platform == "darwin":
        return "macos"
    if sys.platform in ("win32", "cygwin"):
        return "windows"
    return "other"


@dataclass
class AppConfig:
    display_name: str
    transfer_port: int = DEFAULT_TRANSFER_PORT
    control_port: int = DEFAULT_CONTROL_PORT
    download_dir: Path = field(default_factory=default_download_dir)
    approval_policy: str = "manual"
    chunk_size: int = DEFAULT_CHUNK_SIZE

    def __post_init__(self):
        self.download_dir = Path(self.download_dir)
        if self.transfer_port == self.control_port:
            raise ValueError("transfer_port and control_port must differ")
        if self.approval_policy not in ("manual", "auto_approve", "auto_deny"):
            raise ValueError(f"unknown approval policy {self.approval_policy!r}")

    def ensure_writable_download_dir(self) -> None:
        self.download_dir.mkdir(parents=True, exist_ok=True)
        probe = self.download_dir / ".photon-write-test"
        try:
            probe.touch()
            probe.unlink()
        except OSError as exc:
            raise ValueError(f"download dir not writable: {self.download_dir}") from exc
