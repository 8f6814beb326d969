"""In-process fan-out of daemon events to SSE subscribers."""
from __future__ import annotations

import queue
import threading
import time
from typing import Optional


class EventBus:
    """Publish once, deliver to every subscriber in publish order.

    Each subscriber owns an unbounded queue; publishing never blocks.
    Events are dicts: {"type", "session", "data", "seq"}.
    """

    def __init__(self):
        self._lock = threading.Lock()
        self._subscribers: list[queue.SimpleQueue] = []
        self._seq = 0

    def subscribe(self) -> queue.SimpleQueue:
        q: queue.SimpleQueue = queue.SimpleQueue()
        with self._lock:
            self._subscribers.append(q)
        return q

    def unsubscribe(self, q: queue.SimpleQueue) -> None:
        with self._lock:
            try:
                self._subscribers.remove(q)
            except ValueError:
                pass

    def publish(self, type_: str, session: Optional[str], data: dict) -> dict:
        with self._lock:
            self._seq += 1
            event = {"type": type_, "session": session, "data": data, "seq": self._seq}
            for q in self._subscribers:
                q.put(event)
        return event


class Throttle:
    """Rate-limits bursty events (progress ticks) to one per interval."""

    def __init__(self, interval: float = 0.1):
        self.interval = interval
        self._last = 0.0
        self._lock = threading.Lock()

    def ready(self, force: bool = False) -> bool:
        with self._lock:
            now = time.monotonic()
            if force or now - self._last >= self.interval:
                self._last = now
                return True
            return False
