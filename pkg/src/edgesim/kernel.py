"""Discrete-event kernel: integer microsecond clock, (time, seq) ordered queue, named RNG streams."""

from __future__ import annotations

import enum
import hashlib
import heapq
import random
from typing import Callable, NamedTuple

US_PER_MS = 1000
US_PER_S = 1_000_000


class EventKind(enum.IntEnum):
    MESSAGE_ARRIVAL = 0
    SERVICE_COMPLETE = 1
    AUTOSCALER_TICK = 2
    REPLICA_READY = 3
    REQUEST_TIMEOUT = 4
    USER_ISSUE = 5
    RUN_END = 6
    INGRESS_DONE = 7


KIND_NAMES = {k.value: k.name.lower() for k in EventKind}


class SchedulingError(RuntimeError):
    """Raised when an event is scheduled before the current clock."""


class Event(NamedTuple):
    fire_at: int
    seq: int
    kind: int
    payload: int
    aux: int = 0


Handler = Callable[[int, int], None]


class Kernel:
    """Single-threaded event loop.

    Events fire in ``(fire_at, seq)`` order, ``seq`` being the insertion
    counter, so simultaneous events keep their scheduling order.
    """

    def __init__(self, trace: bool = False):
        self.now = 0
        self.processed = 0
        self.handlers: dict[int, Handler] = {}
        self.trace: list[tuple[int, int, int]] | None = [] if trace else None
        self._queue: list[tuple[int, int, int, int, int]] = []
        self._seq = 0
        self._cancelled: set[int] = set()

    def on(self, kind: int, handler: Handler) -> None:
        self.handlers[kind] = handler

    def schedule(self, fire_at: int, kind: int, payload: int = 0, aux: int = 0) -> int:
        """Enqueue an event; the returned handle can be passed to :meth:`cancel`."""
        if fire_at < self.now:
            raise SchedulingError(f"event {KIND_NAMES.get(kind, kind)} at {fire_at} "
                                  f"is before now={self.now}")
        seq = self._seq
        self._seq += 1
        heapq.heappush(self._queue, (fire_at, seq, kind, payload, aux))
        return seq

    def cancel(self, handle: int) -> None:
        self._cancelled.add(handle)

    def peek_time(self) -> int | None:
        while self._queue and self._queue[0][1] in self._cancelled:
            self._cancelled.discard(heapq.heappop(self._queue)[1])
        return self._queue[0][0] if self._queue else None

    def run_until(self, t_end: int) -> int:
        """Process every event with ``fire_at <= t_end``; return how many fired."""
        if t_end < self.now:
            raise SchedulingError(f"run_until({t_end}) is before now={self.now}")
        queue = self._queue
        cancelled = self._cancelled
        handlers = self.handlers
        trace = self.trace
        pop = heapq.heappop
        count = 0
        while queue and queue[0][0] <= t_end:
            fire_at, seq, kind, payload, aux = pop(queue)
            if cancelled and seq in cancelled:
                cancelled.discard(seq)
                continue
            self.now = fire_at
            count += 1
            if trace is not None:
                trace.append((fire_at, kind, payload))
            handler = handlers.get(kind)
            if handler is not None:
                handler(payload, aux)
        self.now = t_end
        self.processed += count
        return count


def stream_seed(seed: int, name: str) -> int:
    digest = hashlib.blake2b(f"{seed}/{name}".encode(), digest_size=8).digest()
    return int.from_bytes(digest, "little")


class RandomStreams:
    """Independent named sub-streams derived from one run seed.

    Each consumer gets its own ``random.Random`` seeded from a hash of
    ``(seed, name)``, so adding a consumer never shifts anyone else's draws.
    """

    def __init__(self, seed: int):
        self.seed = seed
        self._streams: dict[str, random.Random] = {}

    def stream(self, name: str) -> random.Random:
        rng = self._streams.get(name)
        if rng is None:
            rng = self._streams[name] = random.Random(stream_seed(self.seed, name))
        return rng


def next_random(stream: random.Random) -> float:
    """One uniform draw in [0, 1)."""
    return stream.random()


def format_trace(trace) -> str:
    return "".join(f"{t},{KIND_NAMES[k]},{p}\n" for t, k, p in trace)


def trace_digest(trace) -> str:
    return hashlib.sha256(format_trace(trace).encode()).hexdigest()
