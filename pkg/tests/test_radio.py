import random

import numpy as np
import pytest

from mcastsim.kernel import Simulator, make_rng
from mcastsim.metrics import MetricsLedger
from mcastsim.mobility import MobilityPath, PositionTable, WaypointSegment
from mcastsim.protocols.core import CONTROL, DATA, Packet
from mcastsim.radio import InvalidRadioParams, Medium, RadioParams, UnknownNode, components, unit_disk_neighbors
from mcastsim.traffic import GroupPlan
from mcastsim.world import static_paths


class Sink:
    def __init__(self, sim):
        self.sim = sim
        self.got = []
        self.breaks = []

    def on_packet(self, packet, from_):
        self.got.append((self.sim.now, packet.uid, from_))

    def on_link_break(self, next_hop, packet):
        self.breaks.append((self.sim.now, next_hop, packet.uid))


def medium_for(paths, params=RadioParams(), seed=1):
    sim = Simulator()
    ledger = MetricsLedger(GroupPlan(), [])
    m = Medium(sim, PositionTable(paths), params, make_rng(seed, "radio"), ledger)
    m.receivers = [Sink(sim) for _ in paths]
    return sim, m, ledger


def pkt(uid=1, kind=DATA):
    return Packet(uid, kind, "X", 0)


def test_range_boundary_is_inclusive():
    sim, m, _ = medium_for(static_paths([(0, 0), (150, 0), (150.001, 0)], 10.0))
    assert m.neighbors(0) == {1}
    m.transmit(0, pkt())
    sim.run(1.0)
    assert [len(r.got) for r in m.receivers] == [0, 1, 0]


def test_hop_delay_within_bounds():
    coords = [(0, 0)] + [(10.0 * i, 5.0) for i in range(1, 11)]
    sim, m, _ = medium_for(static_paths(coords, 10.0))
    sim.schedule(1.0, m.transmit, 0, pkt())
    sim.run(2.0)
    times = [t for r in m.receivers[1:] for t, _, _ in r.got]
    assert len(times) == 10
    assert all(1.002 <= t <= 1.003 for t in times)


def test_unicast_out_of_range_reports_link_break():
    sim, m, ledger = medium_for(static_paths([(0, 0), (100, 0), (400, 0)], 10.0))
    assert m.transmit(0, pkt(), next_hop=1) == 1
    assert m.transmit(0, pkt(2), next_hop=2) == 0
    sim.run(1.0)
    assert [u for _, u, _ in m.receivers[1].got] == [1]
    assert m.receivers[2].got == []
    assert m.receivers[0].breaks == [(0.002, 2, 2)]
    # both attempts occupied the channel
    assert ledger.data_tx == 2


def test_every_transmission_counted_once_by_kind():
    sim, m, ledger = medium_for(static_paths([(0, 0), (100, 0)], 10.0))
    m.transmit(0, pkt(1, CONTROL))
    m.transmit(1, pkt(2, DATA))
    m.transmit(1, pkt(3, DATA), next_hop=0)
    assert (ledger.control_tx, ledger.data_tx, m.transmissions) == (1, 2, 3)


def test_loss_probability_is_respected():
    coords = [(0, 0)] + [(1.0 * i, 0) for i in range(1, 41)]
    sim, m, _ = medium_for(static_paths(coords, 100.0), RadioParams(loss_prob=0.3), seed=4)
    for k in range(50):
        m.transmit(0, pkt(k))
    sim.run(10.0)
    got = sum(len(r.got) for r in m.receivers)
    assert abs(got / 2000 - 0.7) < 0.05


def test_connectivity_decided_at_send_time():
    # receiver drives away at 100 m/s right after the send
    a = MobilityPath(0, [WaypointSegment(0.0, (0.0, 0.0), (0.0, 0.0), 0.0, 10.0)], 10.0)
    b = MobilityPath(1, [WaypointSegment(0.0, (149.0, 0.0), (149.0, 0.0), 0.0, 1.0),
                         WaypointSegment(1.0, (149.0, 0.0), (900.0, 0.0), 100.0, 1.49)], 10.0)
    sim, m, _ = medium_for([a, b])
    sim.schedule(1.0, m.transmit, 0, pkt(1))
    sim.schedule(2.0, m.transmit, 0, pkt(2))
    sim.run(5.0)
    assert [u for _, u, _ in m.receivers[1].got] == [1]


def test_neighbour_cache_never_stale():
    rng = random.Random(3)
    paths = []
    for i in range(12):
        segs = []
        t = 0.0
        pos = (rng.uniform(0, 400), rng.uniform(0, 400))
        while t < 30.0:
            dest = (rng.uniform(0, 400), rng.uniform(0, 400))
            s = WaypointSegment(t, pos, dest, 20.0, 0.5)
            segs.append(s)
            t, pos = s.end_time, dest
        paths.append(MobilityPath(i, segs, 30.0))
    sim, m, _ = medium_for(paths)
    for k in range(600):
        t = k * 0.05
        sim.run(t)
        for node in range(12):
            x, y = m.positions()
            truth = set(unit_disk_neighbors(x, y, node, 150.0).tolist())
            assert set(m._current_neighbors(node, sim.now_us)) == truth


def test_components_label_by_smallest_id():
    x = np.array([0.0, 500.0, 100.0, 600.0, 999.0])
    y = np.zeros(5)
    assert components(x, y, 150.0) == {0: 0, 1: 1, 2: 0, 3: 1, 4: 4}
    assert components(x, y, 150.0, nodes=[2, 3]) == {2: 0, 3: 1}


def test_unknown_node_and_bad_params():
    sim, m, _ = medium_for(static_paths([(0, 0), (1, 1)], 5.0))
    with pytest.raises(UnknownNode):
        m.transmit(5, pkt())
    with pytest.raises(UnknownNode):
        m.transmit(0, pkt(), next_hop=-1)
    for bad in (RadioParams(range=0.0), RadioParams(loss_prob=1.5), RadioParams(hop_delay_base=-1.0)):
        with pytest.raises(InvalidRadioParams):
            bad.validate()
