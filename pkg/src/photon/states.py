"""Sender and receiver lifecycles as explicit, exhaustively testable tables.

States and events are frozen dataclasses so instances compare by value;
the transition functions are pure. Anything not spelled out below raises
InvalidTransition.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Union

from .errors import InvalidTransition


# --- sender side ---

@dataclass(frozen=True)
class Idle:
    pass


@dataclass(frozen=True)
class Serving:
    pass


@dataclass(frozen=True)
class PendingApproval:
    request_id: str


@dataclass(frozen=True)
class Active:
    code: str


@dataclass(frozen=True)
class Completed:
    pass


@dataclass(frozen=True)
class Terminated:
    pass


SenderState = Union[Idle, Serving, PendingApproval, Active, Completed, Terminated]


@dataclass(frozen=True)
class StartServing:
    pass


@dataclass(frozen=True)
class RequestReceived:
    request_id: str


@dataclass(frozen=True)
class Approve:
    code: str


@dataclass(frozen=True)
class Deny:
    pass


@dataclass(frozen=True)
class ReceiverDone:
    pass


@dataclass(frozen=True)
class StopServer:
    pass


SenderEvent = Union[StartServing, RequestReceived, Approve, Deny, ReceiverDone, StopServer]


def sender_transition(state: SenderState, event: SenderEvent) -> SenderState:
    match (state, event):
        case (Idle(), StartServing()):
            return Serving()
        case (Serving(), RequestReceived(request_id=rid)):
            return PendingApproval(request_id=rid)
        case (PendingApproval(), Approve(code=code)):
            return Active(code=code)
        case (PendingApproval(), Deny()):
            return Serving()
        case (Active(), ReceiverDone()):
            return Completed()
        case (Active(), StopServer()) | (Serving(), StopServer()) | (Completed(), StopServer()):
            return Terminated()
        case _:
            raise InvalidTransition(state, event)


# --- receiver side ---

@dataclass(frozen=True)
class Discovering:
    pass


@dataclass(frozen=True)
class Requesting:
    pass


@dataclass(frozen=True)
class Denied:
    pass


@dataclass(frozen=True)
class Fetching:
    code: str


@dataclass(frozen=True)
class Done:
    pass


@dataclass(frozen=True)
class Failed:
    reason: str


ReceiverState = Union[Discovering, Requesting, Denied, Fetching, Done, Failed]


@dataclass(frozen=True)
class PeerChosen:
    pass


@dataclass(frozen=True)
class Granted:
    code: str


@dataclass(frozen=True)
class DeniedByPeer:
    pass


@dataclass(frozen=True)
class AllFilesVerified:
    pass


@dataclass(frozen=True)
class TransferError:
    reason: str


@dataclass(frozen=True)
class Timeout:
    pass


ReceiverEvent = Union[PeerChosen, Granted, DeniedByPeer, AllFilesVerified, TransferError, Timeout]


def receiver_transition(state: ReceiverState, event: ReceiverEvent) -> ReceiverState:
    match (state, event):
        case (Discovering(), PeerChosen()):
            return Requesting()
        case (Requesting(), Granted(code=code)):
            return Fetching(code=code)
        case (Requesting(), DeniedByPeer()):
            return Denied()
        case (Fetching(), AllFilesVerified()):
            return Done()
        case (Fetching(), TransferError(reason=reason)):
            return Failed(reason=reason)
        case (Requesting(), Timeout()):
            return Failed(reason="timeout")
        case _:
            raise InvalidTransition(state, event)


def state_name(state: SenderState | ReceiverState) -> str:
    """The state's enum name as rendered to UIs ("Serving", "Fetching", ...)."""
    return type(state).__name__
