"""Permission handshake and secret-code authority.

A SessionManager owns one sender lifecycle: the sender state machine, the
single pending permission request, and the registry mapping the active
secret code to the served file index. All access goes through one lock;
submit_request blocks its caller (the handshake handler thread) without
blocking decide_request or authorize.

Codes are 128-bit values from the OS secure source, embedded in transfer
URLs, regenerated for every session and never reused.
"""
from __future__ import annotations

import hmac
import secrets
import threading
import time
from dataclasses import dataclass
from typing import Callable, Optional, Union

from .errors import AlreadyDecided, Busy, RngUnavailable, UnknownCode, UnknownRequest
from .model import FileIndex, PeerIdentity
from . import states
from .states import SenderState, sender_transition

DEFAULT_DECISION_TIMEOUT = 60.0

# How a sender answers permission requests.
POLICY_MANUAL = "manual"
POLICY_AUTO_APPROVE = "auto_approve"
POLICY_AUTO_DENY = "auto_deny"
POLICIES = (POLICY_MANUAL, POLICY_AUTO_APPROVE, POLICY_AUTO_DENY)


def generate_secret_code(rng=None) -> str:
    """128 secure random bits as 32 lowercase hex chars."""
    try:
        if rng is None:
            return secrets.token_hex(16)
        return f"{rng.getrandbits(128):032x}"
    except (OSError, NotImplementedError) as exc:
        raise RngUnavailable(str(exc)) from exc


@dataclass
class Grant:
    code: str


@dataclass
class Denied:
    pass


@dataclass
class TimedOut:
    pass


Decision = Union[Grant, Denied, TimedOut]


@dataclass
class PermissionRequest:
    request_id: str
    receiver: PeerIdentity
    received_at: float  # wall clock
    state: str = "pending"  # pending -> approved | denied | expired, exactly once
    decision: Optional[Decision] = None


@dataclass
class _Session:
    """Registry entry for one active code."""

    index: FileIndex
    created_at: float
    bytes_served: int = 0


@dataclass(frozen=True)
class SessionHandle:
    """What authorize() hands back: the live session bound to a code."""

    code: str
    index: FileIndex


class SessionManager:
    """Synchronized facade over the sender lifecycle and code registry.

    `on_event(type, data)` fires under the lock, so delivery order is the
    causal order: request_received precedes granted/denied/expired
    precedes completed/stopped. Callbacks must not call back into the
    manager and must return quickly.
    """

    def __init__(self, index: FileIndex,
                 policy: str = POLICY_MANUAL,
                 decision_timeout: float = DEFAULT_DECISION_TIMEOUT,
                 on_event: Optional[Callable[[str, dict], None]] = None):
        if policy not in POLICIES:
            raise ValueError(f"unknown policy {policy!r}")
        self._index = index
        self._policy = policy
        self._decision_timeout = decision_timeout
        self._on_event = on_event
        self._cond = threading.Condition()
        self._state: SenderState = states.Idle()
        self._pending: Optional[PermissionRequest] = None
        self._requests: dict[str, PermissionRequest] = {}
        self._active: dict[str, _Session] = {}
        self._issued: set[str] = set()

    # -- lifecycle --

    @property
    def state(self) -> SenderState:
        with self._cond:
            return self._state

    @property
    def index(self) -> FileIndex:
        return self._index

    def start_serving(self) -> None:
        with self._cond:
            self._state = sender_transition(self._state, states.StartServing())

    def stop(self) -> None:
        """Terminate the lifecycle; denies any pending request first.

        In-flight downloads may finish their current response, but every
        authorize() call after this raises UnknownCode.
        """
        with self._cond:
            if self._pending is not None:
                self._finish_locked(self._pending, "denied")
            self._active.clear()
            if not isinstance(self._state, (states.Idle, states.Terminated)):
                self._state = sender_transition(self._state, states.StopServer())
            self._emit("stopped", {})

    # -- handshake --

    def submit_request(self, receiver: PeerIdentity,
                       timeout: Optional[float] = None) -> Decision:
        """Register a permission request and block until it is decided.

        Under manual policy the caller (a handshake handler thread) waits
        for decide_request or the decision timeout; auto policies resolve
        immediately. Raises Busy unless the sender is exactly Serving.
        """
        timeout = self._decision_timeout if timeout is None else timeout
        with self._cond:
            if not isinstance(self._state, states.Serving):
                raise Busy(f"sender is {states.state_name(self._state)}, not Serving")
            request = PermissionRequest(
                request_id=secrets.token_hex(16),
                receiver=receiver,
                received_at=time.time(),
            )
            self._pending = request
            self._requests[request.request_id] = request
            self._state = sender_transition(self._state, states.RequestReceived(request.request_id))
            self._emit("request_received", {
                "request_id": request.request_id,
                "receiver": receiver.to_json_dict(),
            })

            if self._policy == POLICY_AUTO_APPROVE:
                self._finish_locked(request, "approved")
            elif self._policy == POLICY_AUTO_DENY:
                self._finish_locked(request, "denied")
            else:
                deadline = time.monotonic() + timeout
                while request.decision is None:
                    remaining = deadline - time.monotonic()
                    if remaining <= 0:
                        self._finish_locked(request, "expired")
                        break
                    self._cond.wait(remaining)
            return request.decision

    def _finish_locked(self, request: PermissionRequest, outcome: str) -> None:
        """Settle a pending request: drive the machine, install the code.

        Runs in whichever thread decides (decide_request, the timeout path
        inside submit_request, or stop), so the sender state is already
        settled when any waiter wakes.
        """
        assert request.state == "pending"
        request.state = outcome
        self._pending = None
        if outcome == "approved":
            code = generate_secret_code()
            while code in self._issued:  # 128-bit collision: essentially unreachable
                code = generate_secret_code()
            self._issued.add(code)
            self._active[code] = _Session(index=self._index, created_at=time.time())
            self._state = sender_transition(self._state, states.Approve(code))
            request.decision = Grant(code=code)
            self._emit("granted", {"request_id": request.request_id})
        else:
            self._state = sender_transition(self._state, states.Deny())
            if outcome == "expired":
                request.decision = TimedOut()
                self._emit("expired", {"request_id": request.request_id})
            else:
                request.decision = Denied()
                self._emit("denied", {"request_id": request.request_id})
        self._cond.notify_all()

    def decide_request(self, request_id: str, decision: str) -> None:
        """Resolve a pending request; the blocked submit_request returns."""
        if decision not in ("approve", "deny"):
            raise ValueError(f"decision must be approve or deny, got {decision!r}")
        with self._cond:
            request = self._requests.get(request_id)
            if request is None:
                raise UnknownRequest(request_id)
            if request.state != "pending":
                raise AlreadyDecided(f"request {request_id} is {request.state}")
            self._finish_locked(request, "approved" if decision == "approve" else "denied")

    def pending_request(self) -> Optional[PermissionRequest]:
        with self._cond:
            return self._pending

    # -- code registry --

    def authorize(self, code: str) -> SessionHandle:
        """Return the live session bound to `code`, or raise UnknownCode.

        Comparison is constant-time per registered code so lookups leak
        nothing about issued values.
        """
        with self._cond:
            for active_code, session in self._active.items():
                if hmac.compare_digest(active_code, code):
                    return SessionHandle(code=active_code, index=session.index)
        raise UnknownCode("code not active")

    def revoke_session(self, code: str) -> None:
        with self._cond:
            if code not in self._active:
                raise UnknownCode("code not active")
            del self._active[code]

    def receiver_done(self, code: str) -> None:
        """Receiver ended the session: revoke the code, mark Completed."""
        with self._cond:
            if code not in self._active:
                raise UnknownCode("code not active")
            del self._active[code]
            self._state = sender_transition(self._state, states.ReceiverDone())
            self._emit("completed", {})

    def add_bytes_served(self, code: str, n: int) -> None:
        with self._cond:
            session = self._active.get(code)
            if session is not None:
                session.bytes_served += n

    def bytes_served(self, code: str) -> int:
        with self._cond:
            session = self._active.get(code)
            return session.bytes_served if session else 0

    def _emit(self, kind: str, data: dict) -> None:
        if self._on_event is not None:
            try:
                self._on_event(kind, data)
            except Exception:
                pass  # observers must never break the handshake
