"""Wires kernel, mobility, radio, protocol nodes, traffic and ledger into one run."""

from __future__ import annotations

from typing import Sequence

from .kernel import SIM_END, TRAFFIC_TICK, Simulator, make_rng
from .metrics import MetricsLedger
from .mobility import MobilityPath, PositionTable, WaypointSegment
from .protocols.core import DATA, DEFAULT_TTL, NodePort, Packet, register_protocol
from .radio import Medium, RadioParams
from .traffic import CbrFlow, GroupPlan


def static_paths(coords: Sequence[tuple[float, float]], duration: float) -> list[MobilityPath]:
    """Stationary nodes at ``coords`` for the whole run."""
    return [MobilityPath(i, [WaypointSegment(0.0, tuple(map(float, c)), tuple(map(float, c)), 0.0, duration)],
                         duration) for i, c in enumerate(coords)]


class World:
    """One simulation run.

    ``join_times`` maps node -> time of joining its groups; nodes absent
    from the map join at t=0.
    """

    def __init__(self, paths: Sequence[MobilityPath], protocol, radio: RadioParams | None = None,
                 plan: GroupPlan | None = None, flows: Sequence[CbrFlow] = (), seed: int = 0,
                 protocol_config: dict | None = None, join_times: dict[int, float] | None = None,
                 event_log=None):
        self.sim = Simulator(event_log)
        self.sim.detail_fn = _detail
        self.table = PositionTable(paths)
        self.plan = plan or GroupPlan()
        self.flows = list(flows)
        self.ledger = MetricsLedger(self.plan, self.flows)
        self.medium = Medium(self.sim, self.table, radio or RadioParams(), make_rng(seed, "radio"), self.ledger)
        cls = register_protocol(protocol) if isinstance(protocol, str) else protocol
        self.protocol = cls.name
        prng = make_rng(seed, f"protocol/{cls.name}")
        self.nodes = [cls(NodePort(i, self, prng), protocol_config) for i in range(self.table.n)]
        self.medium.receivers = self.nodes
        self._uid = 0
        self._seq: dict[tuple[int, int], int] = {}

        for node in self.nodes:
            self.sim.schedule(0.0, node.start, node=node.id)
        join_times = join_times or {}
        for node, groups in sorted(self.plan.memberships().items()):
            for g in groups:
                self.sim.schedule(join_times.get(node, 0.0), self.nodes[node].join, g, node=node)
        for flow in self.flows:
            self.sim.schedule(flow.start_at, self._tick, flow, 0, kind=TRAFFIC_TICK, node=flow.source)

    def new_uid(self) -> int:
        self._uid += 1
        return self._uid

    def originate(self, source: int, group: int, size: int = 512) -> Packet:
        """Hand one application data packet to ``source``'s protocol now."""
        seq = self._seq.get((source, group), 0)
        self._seq[(source, group)] = seq + 1
        pkt = Packet(self.new_uid(), DATA, "DATA", source, group, seq, DEFAULT_TTL, size)
        self.ledger.record_origination(pkt, self.sim.now)
        self.nodes[source].on_app_data(group, pkt)
        return pkt

    def _tick(self, flow: CbrFlow, k: int):
        self.originate(flow.source, flow.group, flow.packet_size)
        nxt = k + 1
        if nxt < flow.packet_count():
            self.sim.schedule(flow.tick_time(nxt), self._tick, flow, nxt, kind=TRAFFIC_TICK, node=flow.source)

    def run(self, until: float) -> int:
        self.sim.schedule(until, _sim_end, kind=SIM_END)
        return self.sim.run(until)


def _sim_end():
    pass


def _detail(fn, args) -> str:
    name = getattr(fn, "__name__", "event")
    parts = [name]
    for a in args:
        if isinstance(a, (int, float, str)):
            parts.append(str(a))
        elif isinstance(a, Packet):
            parts.append(repr(a))
        elif isinstance(a, CbrFlow):
            parts.append(f"flow{a.flow_id}")
    return " ".join(parts)
