from collections import Counter
from dataclasses import replace

import pytest

from mcastsim.protocols.admr import (EXPLICIT_ACK, KEEP_ALIVE, RECEIVER_DISCOVERY, RECEIVER_JOIN, RECONNECT,
                                     RECONNECT_REPLY, REPAIR_NOTIFICATION, SOLICITATION, forwarders)

from scripted import TxLog, line, scripted_world

QUIET = {"discovery_period": 1000.0}


def _late(w, member, since):
    return sorted(k[2] for k in w.ledger.delivered if k[3] == member and w.ledger.origin_time[k[:3]] >= since)


def _seqs(w, source, since, until):
    return [s for (o, g, s), t in w.ledger.origin_time.items() if o == source and since <= t < until]


def test_discovery_join_lays_forwarder_state():
    w = scripted_world(line(4), "admr", {0: ([0, 3], [0])}, flows=[(0, 0, 1.0, 5.0)], duration=5.0)
    log = TxLog(w)
    w.run(5.0)
    assert forwarders(w.nodes, 0, 0) == [1, 2]
    assert [(r[1], r[3]) for r in log.of(RECEIVER_JOIN)] == [(3, 2), (2, 1), (1, 0)]
    assert w.nodes[3].states[(0, 0)].upstream == 2


def test_solicitation_join_handshake():
    w = scripted_world(line(4), "admr", {0: ([0, 3], [0])}, flows=[(0, 0, 1.0, 10.0)], joins={3: 5.0},
                       duration=10.0)
    log = TxLog(w)
    w.run(10.0)
    sol = [r for r in log.of(SOLICITATION) if r[1] == 3 and r[4].origin == 3]
    assert len(sol) == 1 and sol[0][0] == pytest.approx(5.0)
    # the source answers with a unicast KEEP-ALIVE that walks back to the receiver
    assert [(r[1], r[3]) for r in log.of(KEEP_ALIVE)] == [(0, 1), (1, 2), (2, 3)]
    assert forwarders(w.nodes, 0, 0) == [1, 2]
    assert _late(w, 3, 5.5) == _seqs(w, 0, 5.5, 10.0)


def test_connected_receiver_does_not_solicit():
    w = scripted_world(line(3), "admr", {0: ([0, 2], [0])}, flows=[(0, 0, 1.0, 10.0)], duration=10.0)
    log = TxLog(w)
    w.run(5.0)
    before = log.count(SOLICITATION)
    w.nodes[2].join(0)
    w.run(10.0)
    assert log.count(SOLICITATION) == before


def test_discovery_rate_bound():
    w = scripted_world(line(3), "admr", {0: ([0, 2], [0])}, flows=[(0, 0, 0.0, 200.0)], duration=200.0)
    log = TxLog(w)
    w.run(200.0)
    own = [r for r in log.of(RECEIVER_DISCOVERY) if r[1] == 0]
    assert len(own) == 7


def test_passive_and_explicit_acks():
    w = scripted_world(line(4), "admr", {0: ([0, 3], [0])}, flows=[(0, 0, 1.0, 11.0)], duration=11.0)
    log = TxLog(w)
    w.run(10.0)
    link_1_2 = w.nodes[1].states[(0, 0)].downstream[2]
    assert not link_1_2.explicit and link_1_2.consecutive_missed <= 1
    link_2_3 = w.nodes[2].states[(0, 0)].downstream[3]
    assert link_2_3.explicit
    acks = log.of(EXPLICIT_ACK)
    assert {(r[1], r[3]) for r in acks} == {(3, 2)}
    # one explicit ack per eight packets received
    assert len(acks) == pytest.approx(w.nodes[3].states[(0, 0)].rx_count / 8, abs=1)


def test_silent_child_branch_expires():
    # forwarder 1 feeds receiver 4 and the chain 2 -> 3; the chain drives off at 10 s
    coords = line(4) + [(100.0, 120.0)]
    moves = {2: [(10.0, (900.0, 600.0))], 3: [(10.0, (950.0, 600.0))]}
    w = scripted_world(coords, "admr", {0: ([0, 3, 4], [0])}, flows=[(0, 0, 1.0, 20.0)], duration=20.0,
                       moves=moves, config=QUIET)
    w.run(9.9)
    assert set(w.nodes[1].states[(0, 0)].downstream) == {2, 4}
    w.run(10.0 + 6 * 0.25 + 0.1)
    assert set(w.nodes[1].states[(0, 0)].downstream) == {4}


def test_reconnect_repairs_locally():
    # 4-hop chain; relay 2 is swapped for node 5 at 20 s
    coords = line(5) + [(200.0, 700.0)]
    moves = {2: [(20.0, (900.0, 650.0))], 5: [(20.0, (200.0, 0.0))]}
    w = scripted_world(coords, "admr", {0: ([0, 4], [0])}, flows=[(0, 0, 1.0, 40.0)], duration=40.0,
                       moves=moves, config=QUIET)
    log = TxLog(w)
    w.run(40.0)
    # no network-wide flood during repair
    assert log.count(SOLICITATION, since=19.0) == 0
    assert log.count(RECEIVER_DISCOVERY, since=19.0) == 0
    assert all(not r[4].fields.get("flood") for r in log.of("DATA", since=19.0))
    # the disconnected forwarder 3 repaired; its subtree was told to stand down
    # the stranded relay 2 tries too, but only 3's RECONNECT can reach the tree
    floods = [r for r in log.of(RECONNECT) if r[3] is None]
    assert {r[4].origin for r in floods} <= {2, 3}
    assert 3 in {r[1] for r in log.of(REPAIR_NOTIFICATION)}
    assert [(r[1], r[3]) for r in log.of(RECONNECT_REPLY)] == [(0, 1), (1, 5), (5, 3)]
    # each node relays a RECONNECT flood at most once
    assert max(Counter((r[1], r[4].uid) for r in floods).values()) == 1
    assert forwarders(w.nodes, 0, 0) == [1, 3, 5]
    assert _late(w, 4, 22.0) == _seqs(w, 0, 22.0, 40.0)


def test_failed_reconnect_escalates_to_solicitation():
    # forwarder/receiver 2 loses its only upstream for good
    moves = {1: [(20.0, (900.0, 650.0))]}
    w = scripted_world(line(4), "admr", {0: ([0, 2, 3], [0])}, flows=[(0, 0, 1.0, 30.0)], duration=30.0,
                       moves=moves, config=QUIET)
    log = TxLog(w)
    w.run(30.0)
    rc = [r[0] for r in log.of(RECONNECT, since=20.0) if r[1] == 2 and r[4].origin == 2]
    sol = [r[0] for r in log.of(SOLICITATION, since=20.0) if r[1] == 2 and r[4].origin == 2]
    assert len(rc) == 1 and len(sol) == 1
    assert sol[0] > rc[0]
    # receiver 3 was covered by its upstream's repair and stayed quiet
    assert not [r for r in log.of(SOLICITATION, since=20.0) if r[4].origin == 3]


def test_silence_cleanup_and_no_storm():
    coords = line(5) + [(200.0, 100.0), (300.0, 100.0)]
    w = scripted_world(coords, "admr", {0: ([0, 4, 6], [0])}, flows=[(0, 0, 1.0, 20.0)], duration=40.0)
    log = TxLog(w)
    w.run(19.0)
    assert forwarders(w.nodes, 0, 0)
    cfg = w.nodes[1].cfg
    hops = max(st.hops for n in w.nodes for st in n.states.values())
    bound = (cfg["repair_threshold"] * 0.25 + hops * cfg["repair_hop_delay"] + cfg["repair_timeout"]
             + cfg["monitor_period"])
    last_tick = 19.75
    w.run(last_tick + bound)
    assert forwarders(w.nodes, 0, 0) == []
    assert all(n.states.get((0, 0)) is None or n.states[(0, 0)].upstream is None for n in w.nodes)
    done = w.sim.now
    w.run(40.0)
    assert [r for r in log.rows if r[0] > done] == []


def test_two_sources_have_independent_trees():
    # Y shape: sources 0 and 5 on the arms, receivers on the stem
    coords = [(0.0, 0.0), (100.0, 0.0), (200.0, 60.0), (300.0, 60.0), (400.0, 60.0), (0.0, 120.0), (100.0, 120.0)]
    w = scripted_world(coords, "admr", {0: ([0, 4, 5], [0, 5])}, flows=[(0, 0, 1.0, 10.0), (5, 0, 1.2, 10.0)],
                       duration=10.0)
    w.run(10.0)
    assert forwarders(w.nodes, 0, 0) == [1, 2, 3]
    assert forwarders(w.nodes, 5, 0) == [2, 3, 6]
    assert w.nodes[2].states[(0, 0)].upstream == 1
    assert w.nodes[2].states[(5, 0)].upstream == 6
    assert w.ledger.duplicate_deliveries == 0


def test_partition_heals_by_next_discovery():
    moves = {3: [(20.0, (300.0, 0.0))]}
    coords = line(3) + [(900.0, 600.0)]
    w = scripted_world(coords, "admr", {0: ([0, 3], [0])}, flows=[(0, 0, 1.0, 40.0)], duration=40.0, moves=moves)
    w.run(40.0)
    assert _late(w, 3, 31.5) == _seqs(w, 0, 31.5, 40.0)


def test_loss_free_run_never_floods():
    coords = [(0.0, 0.0), (100.0, 0.0), (200.0, 0.0), (200.0, 100.0), (300.0, 0.0), (300.0, 100.0)]
    w = scripted_world(coords, "admr", {0: ([0, 4, 5], [0])}, flows=[(0, 0, 1.0, 60.0)], duration=60.0)
    w.run(60.0)
    assert w.nodes[0].flows[0].floods_granted == 0


def _grid(cols, rows, spacing=100.0):
    return [(c * spacing, r * spacing) for r in range(rows) for c in range(cols)]


LOSSY_MEMBERS = [0, 2, 6, 9, 11]


def _lossy_run(protocol, seed, config=None):
    """4x3 grid, receivers 2-3 hops out; every link drops 60% of frames during [20, 50)."""
    w = scripted_world(_grid(4, 3), protocol, {0: (LOSSY_MEMBERS, [0])}, flows=[(0, 0, 1.0, 70.0)],
                       duration=70.0, seed=seed, config=config)
    clean = w.medium.params

    def set_loss(p):
        w.medium.params = replace(clean, loss_prob=p)

    w.sim.schedule(20.0, set_loss, 0.6)
    w.sim.schedule(50.0, set_loss, 0.0)
    log = TxLog(w)
    w.run(70.0)
    return w, log


def _window(w, since, until):
    seqs = set(_seqs(w, 0, since, until))
    got = sum(1 for k in w.ledger.delivered if k[2] in seqs)
    return got, len(seqs) * (len(LOSSY_MEMBERS) - 1)


def test_fallback_engages_under_loss_and_tracks_flooding():
    pooled = {"admr": [0, 0], "flooding": [0, 0], "tree": [0, 0]}
    for seed in range(1, 5):
        w, log = _lossy_run("admr", seed)
        flooded = [r[0] for r in log.of("DATA") if r[4].fields.get("flood")]
        assert flooded and 20.0 < min(flooded) < 30.0
        # the loss clears at 50 s: receivers stop renewing and the tree takes over again
        assert not [r for r in log.of("DATA", since=60.0) if r[4].fields.get("flood")]
        assert _window(w, 60.0, 70.0)[0] == _window(w, 60.0, 70.0)[1]
        runs = {"admr": w, "flooding": _lossy_run("flooding", seed)[0],
                "tree": _lossy_run("admr", seed, config={"fallback_pdr": 0.0})[0]}
        for name, run in runs.items():
            got, want = _window(run, 30.0, 50.0)
            pooled[name][0] += got
            pooled[name][1] += want
    pdr = {k: g / n for k, (g, n) in pooled.items()}
    assert pdr["admr"] >= 0.9 * pdr["flooding"]
    assert pdr["admr"] > 1.5 * pdr["tree"]
