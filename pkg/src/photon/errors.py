"""Exception hierarchy shared across the photon package."""


class PhotonError(Exception):
    """Base class for every error raised by this package."""


# --- identity / file index ---

class EmptyName(PhotonError):
    """Display name is empty after trimming whitespace."""


class PathNotFound(PhotonError):
    def __init__(self, path):
        super().__init__(f"path not found: {path}")
        self.path = path


class Unreadable(PhotonError):
    def __init__(self, path):
        super().__init__(f"path not readable: {path}")
        self.path = path


class DuplicateName(PhotonError):
    def __init__(self, name):
        super().__init__(f"duplicate relative file name: {name}")
        self.name = name


class InvalidTransition(PhotonError):
    def __init__(self, state, event):
        super().__init__(f"no transition from {state!r} on {event!r}")
        self.state = state
        self.event = event


# --- discovery ---

class Oversize(PhotonError):
    """Encoded datagram would exceed the 1024-byte limit."""


class BadMagic(PhotonError):
    """Datagram is not ours; silently droppable."""


class Malformed(PhotonError):
    """Datagram is truncated, not valid JSON, or missing required fields."""


class UnknownType(PhotonError):
    """Datagram carries our magic but an unrecognized message type."""


class PortInUse(PhotonError):
    def __init__(self, port):
        super().__init__(f"port already in use: {port}")
        self.port = port


class NoInterface(PhotonError):
    """No usable IPv4 interface for probing."""


# --- session ---

class RngUnavailable(PhotonError):
    """The OS secure randomness source failed."""


class Busy(PhotonError):
    """A request is already pending or a session is already active."""


class UnknownRequest(PhotonError):
    """No permission request with that id."""


class AlreadyDecided(PhotonError):
    """The permission request was already approved, denied, or expired."""


class UnknownCode(PhotonError):
    """Code was never granted, or has been revoked."""


# --- transfer client ---

class ConnectError(PhotonError):
    """Peer unreachable."""


class ProtocolError(PhotonError):
    """Peer responded in a way the transfer protocol does not allow."""


class AuthError(PhotonError):
    """Server answered 404 for a code we thought was live."""


class ChecksumMismatch(PhotonError):
    def __init__(self, name, expected, actual):
        super().__init__(f"checksum mismatch for {name}: expected {expected}, got {actual}")
        self.name = name
        self.expected = expected
        self.actual = actual


class RangeNotSupported(PhotonError):
    """Server ignored our Range header; caller falls back to a full download."""


class TransferIOError(PhotonError):
    """Disk or network I/O failed mid-download."""


# --- bench ---

class DiskFull(PhotonError):
    """Payload generation ran out of disk."""


class EmptySizes(PhotonError):
    """Benchmark needs at least one size."""


class TargetUnreachable(PhotonError):
    def __init__(self, target):
        super().__init__(f"benchmark target unreachable: {target}")
        self.target = target
