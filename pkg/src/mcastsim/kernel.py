"""Deterministic discrete-event kernel.

Time is kept internally as integer microseconds so that ties are exact;
public accessors expose seconds as floats.  Events with equal fire time
dispatch in ascending sequence number, which makes a run a pure function
of (scenario, seed).
"""

import hashlib
import heapq
import random
from typing import Callable, Optional, TextIO

US_PER_S = 1_000_000

# event kinds, also used as the ``kind`` column of the event log
PACKET_ARRIVAL = "PacketArrival"
TIMER_FIRE = "TimerFire"
TRAFFIC_TICK = "TrafficTick"
LINK_BREAK = "LinkBreak"
METRICS_SAMPLE = "MetricsSample"
SIM_END = "SimEnd"


class SchedulingInPast(ValueError):
    pass


def to_us(seconds: float) -> int:
    if seconds != seconds or seconds < 0:
        raise ValueError(f"invalid simulation time {seconds!r}")
    return int(round(seconds * US_PER_S))


def to_s(us: int) -> float:
    return us / US_PER_S


def derive_seed(master: int, label: str) -> int:
    """Derive a 64-bit stream seed from the master seed and a fixed label."""
    digest = hashlib.sha256(f"{int(master)}/{label}".encode()).digest()
    return int.from_bytes(digest[:8], "big")


def make_rng(master: int, label: str) -> random.Random:
    """Independent Mersenne Twister stream for one concern (mobility, traffic, ...)."""
    return random.Random(derive_seed(master, label))


class Simulator:
    """Single global event queue keyed by (fire time, sequence number).

    A scheduled event is a small list ``[t_us, seq, kind, node, fn, args]``;
    the list itself is the handle returned to callers.  Cancelling blanks
    ``fn`` so the heap never has to be searched.
    """

    def __init__(self, event_log: Optional[TextIO] = None):
        self._heap: list = []
        self._seq = 0
        self.now_us = 0
        self.now = 0.0
        self.scheduled = 0
        self.dispatched = 0
        self.cancelled = 0
        self.event_log = event_log
        self.detail_fn: Callable = _default_detail

    @property
    def pending(self) -> int:
        return self.scheduled - self.dispatched - self.cancelled

    def push_raw(self, t_us: int, kind: str, node: int, fn: Callable, args: tuple):
        """Unchecked fast path for the radio layer (caller guarantees t_us >= now)."""
        entry = [t_us, self._seq, kind, node, fn, args]
        self._seq += 1
        self.scheduled += 1
        heapq.heappush(self._heap, entry)

    def schedule_us(self, t_us: int, fn: Callable, *args, kind: str = TIMER_FIRE, node: int = -1):
        if t_us < self.now_us:
            raise SchedulingInPast(f"event at {t_us}us scheduled while clock is {self.now_us}us")
        entry = [t_us, self._seq, kind, node, fn, args]
        self._seq += 1
        self.scheduled += 1
        heapq.heappush(self._heap, entry)
        return entry

    def schedule(self, at: float, fn: Callable, *args, kind: str = TIMER_FIRE, node: int = -1):
        """Schedule ``fn(*args)`` at absolute time ``at`` (seconds)."""
        if at != at:
            raise SchedulingInPast("NaN fire time")
        t_us = int(round(at * US_PER_S))
        if t_us < self.now_us:
            raise SchedulingInPast(f"event at t={at} scheduled while clock is {self.now}")
        return self.schedule_us(t_us, fn, *args, kind=kind, node=node)

    def schedule_in(self, delay: float, fn: Callable, *args, kind: str = TIMER_FIRE, node: int = -1):
        if delay < 0:
            raise SchedulingInPast(f"negative delay {delay}")
        return self.schedule_us(self.now_us + int(round(delay * US_PER_S)), fn, *args, kind=kind, node=node)

    def cancel(self, handle) -> bool:
        if handle is None or handle[4] is None:
            return False
        handle[4] = None
        self.cancelled += 1
        return True

    def run(self, until: float) -> int:
        """Dispatch every event with fire time <= ``until``; return how many ran."""
        end_us = int(round(until * US_PER_S))
        heap = self._heap
        pop = heapq.heappop
        log = self.event_log
        count = 0
        while heap and heap[0][0] <= end_us:
            entry = pop(heap)
            fn = entry[4]
            if fn is None:
                continue
            entry[4] = None
            self.now_us = entry[0]
            self.now = entry[0] / US_PER_S
            self.dispatched += 1
            count += 1
            if log is not None:
                log.write(f"{entry[0] / US_PER_S:.6f}\t{entry[3]}\t{entry[2]}\t{self.detail_fn(fn, entry[5])}\n")
            fn(*entry[5])
        if end_us > self.now_us:
            self.now_us = end_us
            self.now = end_us / US_PER_S
        return count


def _default_detail(fn, args) -> str:
    name = getattr(fn, "__name__", "event")
    return name + "".join(f" {a}" for a in args if isinstance(a, (int, float, str)))
