"""Unit-disk wireless medium.

Connectivity is decided once, at send time: a node that drifts out of
range while a frame is in flight still receives it.  There is no MAC
contention model; ``loss_prob`` is the only impairment.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from .kernel import LINK_BREAK, PACKET_ARRIVAL, US_PER_S
from .mobility import PositionTable


class UnknownNode(KeyError):
    pass


class InvalidRadioParams(ValueError):
    pass


@dataclass(frozen=True)
class RadioParams:
    range: float = 150.0
    hop_delay_base: float = 0.002
    hop_delay_jitter: float = 0.001
    loss_prob: float = 0.0

    def validate(self):
        if not self.range > 0:
            raise InvalidRadioParams("range must be > 0")
        if self.hop_delay_base < 0 or self.hop_delay_jitter < 0:
            raise InvalidRadioParams("hop delays must be >= 0")
        if not 0.0 <= self.loss_prob <= 1.0:
            raise InvalidRadioParams("loss_prob must lie in [0, 1]")


def unit_disk_neighbors(x: np.ndarray, y: np.ndarray, node: int, range_m: float) -> np.ndarray:
    dx = x - x[node]
    dy = y - y[node]
    nb = np.flatnonzero(dx * dx + dy * dy <= range_m * range_m)
    return nb[nb != node]


def components(x: np.ndarray, y: np.ndarray, range_m: float, nodes=None) -> dict[int, int]:
    """Label connected components of the unit-disk graph; labels are the smallest member id.

    Components are computed over all nodes; ``nodes`` only filters which
    labels are returned.
    """
    n = len(x)
    dx = x[:, None] - x[None, :]
    dy = y[:, None] - y[None, :]
    adj = (dx * dx + dy * dy) <= range_m * range_m
    label = [-1] * n
    for s in range(n):
        if label[s] >= 0:
            continue
        label[s] = s
        queue = deque([s])
        while queue:
            u = queue.popleft()
            for v in np.flatnonzero(adj[u]).tolist():
                if label[v] < 0:
                    label[v] = s
                    queue.append(v)
    keep = range(n) if nodes is None else nodes
    return {i: label[i] for i in keep}


class Medium:
    """Decides who hears each transmission and schedules the arrivals.

    ``receivers[j]`` must expose ``on_packet(packet, from_)`` and
    ``on_link_break(next_hop, packet)``.  Every transmit call is charged to
    the ledger exactly once, as control or data by packet kind.
    """

    def __init__(self, sim, table: PositionTable, params: RadioParams, rng, ledger):
        params.validate()
        self.sim = sim
        self.table = table
        self.params = params
        self.rng = rng
        self.ledger = ledger
        self.receivers: list = []
        self.transmissions = 0
        self._r2 = params.range * params.range
        self._base_us = int(round(params.hop_delay_base * US_PER_S))
        self._jitter_us = params.hop_delay_jitter * US_PER_S
        # neighbour lists stay valid until some pair could have crossed the range edge
        self._closing_speed = 2.0 * table.max_speed
        self._nb_cache: list = [None] * table.n

    @property
    def n(self) -> int:
        return self.table.n

    def _check(self, node: int):
        if not 0 <= node < self.table.n:
            raise UnknownNode(node)

    def positions(self, t: float | None = None):
        return self.table.snapshot_xy(self.sim.now if t is None else t)

    def neighbors(self, node: int, t: float | None = None) -> set[int]:
        self._check(node)
        x, y = self.positions(t)
        return set(unit_disk_neighbors(x, y, node, self.params.range).tolist())

    def connected_component(self, group_members=None, t: float | None = None) -> dict[int, int]:
        x, y = self.positions(t)
        return components(x, y, self.params.range, group_members)

    def _delay_us(self) -> int:
        if self._jitter_us > 0.0:
            return self._base_us + int(self.rng.random() * self._jitter_us)
        return self._base_us

    def _current_neighbors(self, sender: int, now_us: int) -> list[int]:
        cached = self._nb_cache[sender]
        if cached is not None and now_us < cached[0]:
            return cached[1]
        x, y = self.table.snapshot_xy(now_us / US_PER_S)
        dx = x - x[sender]
        dy = y - y[sender]
        d2 = dx * dx + dy * dy
        nb = np.flatnonzero(d2 <= self._r2).tolist()
        nb.remove(sender)
        if self._closing_speed <= 0.0:
            until = float("inf")
        else:
            d2[sender] = np.inf
            margin = float(np.min(np.abs(np.sqrt(d2) - self.params.range)))
            until = now_us + int(margin / self._closing_speed * US_PER_S)
        self._nb_cache[sender] = (until, nb)
        return nb

    def transmit(self, sender: int, packet, next_hop: int | None = None) -> int:
        """Send ``packet``; broadcast when ``next_hop`` is None.  Returns arrivals scheduled."""
        self._check(sender)
        self.transmissions += 1
        self.ledger.count_transmission(packet)
        sim = self.sim
        now_us = sim.now_us
        nb = self._current_neighbors(sender, now_us)
        loss = self.params.loss_prob
        rng = self.rng
        jit = self._jitter_us
        if next_hop is None:
            push = sim.push_raw
            base = now_us + self._base_us
            receivers = self.receivers
            scheduled = 0
            for j in nb:
                if loss > 0.0 and rng.random() < loss:
                    continue
                t = base + int(rng.random() * jit) if jit > 0.0 else base
                push(t, PACKET_ARRIVAL, j, receivers[j].on_packet, (packet, sender))
                scheduled += 1
            return scheduled
        self._check(next_hop)
        if next_hop not in nb:
            sim.schedule_us(now_us + self._base_us, self.receivers[sender].on_link_break, next_hop, packet,
                            kind=LINK_BREAK, node=sender)
            return 0
        if loss > 0.0 and rng.random() < loss:
            return 0
        sim.schedule_us(now_us + self._delay_us(), self.receivers[next_hop].on_packet, packet, sender,
                        kind=PACKET_ARRIVAL, node=next_hop)
        return 1
