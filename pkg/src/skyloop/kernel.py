"""Deterministic discrete-event core: clock, scheduler, seeded random streams.

All simulation time is integer milliseconds since run start so that latency
arithmetic downstream is exact. The event loop is single-writer: every state
mutation happens inside a dispatched handler, and external inputs enter via
the thread-safe command queue drained between dispatches.
"""

from __future__ import annotations

import hashlib
import heapq
import math
import queue
import threading
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Optional


class ClockMode(Enum):
    FAST_TIME = "fast_time"
    REAL_TIME = "real_time"


class SchedulingError(Exception):
    """Raised when an event is scheduled in the past (a programming error)."""


class SimulationError(Exception):
    """Raised when an event handler fails; aborts the run with a diagnostic."""


@dataclass
class SimClock:
    """Monotonic simulation clock.

    In fast_time the clock advances only when the event queue advances it;
    in real_time dispatches are paced against wall time by ``pace``.
    """

    now_ms: int = 0
    mode: ClockMode = ClockMode.FAST_TIME
    pace: float = 1.0


@dataclass
class SimEvent:
    fire_at_ms: int
    seq: int
    kind: str
    payload: Any = None
    handler: Optional[Callable[["SimEvent"], None]] = None

    def sort_key(self) -> tuple[int, int]:
        return (self.fire_at_ms, self.seq)


class RandomStream:
    """Counter-based deterministic random stream.

    Values are a pure function of (seed, stream_id, draw index): replays and
    partial reruns agree, and draws on one stream never perturb another.
    """

    __slots__ = ("stream_id", "seed", "draw_count", "_key")

    def __init__(self, seed: int, stream_id: str):
        self.stream_id = stream_id
        self.seed = seed
        self.draw_count = 0
        self._key = hashlib.blake2b(
            f"{seed}:{stream_id}".encode("utf-8"), digest_size=16
        ).digest()

    def _raw64(self) -> int:
        h = hashlib.blake2b(
            self._key + self.draw_count.to_bytes(8, "little"), digest_size=8
        )
        self.draw_count += 1
        return int.from_bytes(h.digest(), "little")

    def random(self) -> float:
        """Uniform float in [0, 1)."""
        return self._raw64() / 2**64

    def uniform(self, low: float, high: float) -> float:
        return low + (high - low) * self.random()

    def randint(self, low: int, high: int) -> int:
        """Integer in [low, high] inclusive."""
        if high < low:
            raise ValueError("empty range")
        return low + self._raw64() % (high - low + 1)

    def choice(self, seq):
        if not seq:
            raise ValueError("empty sequence")
        return seq[self.randint(0, len(seq) - 1)]

    def normal(self, mu: float = 0.0, sigma: float = 1.0) -> float:
        # Box-Muller; consumes exactly two draws so the counter stays aligned.
        u1 = self.random()
        u2 = self.random()
        if u1 <= 0.0:
            u1 = 2**-64
        return mu + sigma * math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)


def derive_stream(root_seed: int, stream_id: str) -> RandomStream:
    """Derive an independent named stream from the run's root seed."""
    return RandomStream(root_seed, stream_id)


class Simulator:
    """Single-writer event loop with deterministic (fire_at_ms, seq) ordering.

    Commands posted from other threads (gateway requests, console messages)
    are drained between dispatches, so all mutation happens on the loop.
    """

    def __init__(self, mode: ClockMode = ClockMode.FAST_TIME, pace: float = 1.0):
        if pace <= 0:
            raise ValueError("pace must be > 0")
        self.clock = SimClock(now_ms=0, mode=mode, pace=pace)
        self._heap: list[tuple[tuple[int, int], SimEvent]] = []
        self._seq = 0
        self._commands: "queue.Queue[Callable[[], None]]" = queue.Queue()
        self._stop_requested = threading.Event()
        self.dispatched_count = 0

    # -- scheduling ------------------------------------------------------

    def schedule(
        self,
        fire_at_ms: int,
        kind: str,
        handler: Callable[[SimEvent], None],
        payload: Any = None,
    ) -> int:
        """Enqueue an event; returns its id (stable and unique within the run)."""
        if fire_at_ms < self.clock.now_ms:
            raise SchedulingError(
                f"event {kind!r} scheduled at {fire_at_ms} ms, before now={self.clock.now_ms} ms"
            )
        event = SimEvent(
            fire_at_ms=int(fire_at_ms),
            seq=self._seq,
            kind=kind,
            payload=payload,
            handler=handler,
        )
        self._seq += 1
        heapq.heappush(self._heap, (event.sort_key(), event))
        return event.seq

    def schedule_in(
        self,
        delay_ms: int,
        kind: str,
        handler: Callable[[SimEvent], None],
        payload: Any = None,
    ) -> int:
        return self.schedule(self.clock.now_ms + delay_ms, kind, handler, payload)

    def post_command(self, fn: Callable[[], None]) -> None:
        """Thread-safe: queue a callable to run on the loop between dispatches."""
        self._commands.put(fn)

    def request_stop(self) -> None:
        self._stop_requested.set()

    # -- running ---------------------------------------------------------

    def _drain_commands(self) -> None:
        while True:
            try:
                fn = self._commands.get_nowait()
            except queue.Empty:
                return
            fn()

    def run_until(self, t_end_ms: int) -> int:
        """Dispatch all events with fire_at_ms <= t_end_ms in (fire_at, seq) order.

        On return the clock reads exactly t_end_ms. Handler exceptions abort
        the run wrapped in SimulationError.
        """
        if t_end_ms < self.clock.now_ms:
            raise SchedulingError(
                f"run_until({t_end_ms}) is before now={self.clock.now_ms}"
            )
        dispatched = 0
        real_time = self.clock.mode is ClockMode.REAL_TIME
        anchor_wall = time.monotonic()
        anchor_sim = self.clock.now_ms

        self._drain_commands()
        while self._heap and self._heap[0][1].fire_at_ms <= t_end_ms:
            if self._stop_requested.is_set():
                break
            _, event = heapq.heappop(self._heap)

            if real_time:
                target_wall = anchor_wall + (event.fire_at_ms - anchor_sim) / 1000.0 / self.clock.pace
                while True:
                    remaining = target_wall - time.monotonic()
                    if remaining <= 0:
                        break
                    # Wake periodically so posted commands are not starved.
                    time.sleep(min(remaining, 0.02))
                    self._drain_commands()

            assert event.fire_at_ms >= self.clock.now_ms
            self.clock.now_ms = event.fire_at_ms
            try:
                if event.handler is not None:
                    event.handler(event)
            except Exception as exc:  # noqa: BLE001 - rewrap with diagnostics
                raise SimulationError(
                    f"handler for event kind={event.kind!r} seq={event.seq} "
                    f"at t={event.fire_at_ms} ms failed: {exc}"
                ) from exc
            dispatched += 1
            self.dispatched_count += 1
            self._drain_commands()

        if not self._stop_requested.is_set():
            self.clock.now_ms = t_end_ms
        self._drain_commands()
        return dispatched

    def pending_count(self) -> int:
        return len(self._heap)
