import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mcastsim.traffic import (CbrFlow, GroupPlan, InvalidTraffic, MulticastGroup, build_flows, build_group_plan,
                              dump_traffic, expected_originated, load_traffic)


def test_packet_count_excludes_stop_tick():
    assert CbrFlow(0, 0, 0, interval=0.25, start_at=5.0, stop_at=6.0).packet_count() == 4
    assert CbrFlow(0, 0, 0, interval=0.25, start_at=5.0, stop_at=6.1).packet_count() == 5
    assert CbrFlow(0, 0, 0, interval=0.3, start_at=0.1, stop_at=0.4).packet_count() == 1


def test_group_plan_defaults():
    plan = build_group_plan(50, rng=random.Random(1))
    assert len(plan.groups) == 10
    for g in plan.groups:
        assert len(g.members) == len(set(g.members)) == 10
        assert len(g.sources) == 1 and g.sources[0] in g.members
        assert len(plan.receivers(g.sources[0], g.gid)) == 9


def test_group_plan_pools_restrict_members():
    pools = [list(range(k * 10, k * 10 + 10)) for k in range(5)]
    plan = build_group_plan(50, 10, 10, rng=random.Random(2), pools=pools)
    for g in plan.groups:
        assert set(g.members) == set(pools[g.gid % 5])


def test_non_member_sources():
    plan = build_group_plan(20, 3, 5, rng=random.Random(3), sources_are_members=False)
    for g in plan.groups:
        assert not set(g.sources) & set(g.members)
        assert plan.receivers(g.sources[0], g.gid) == frozenset(g.members)


@pytest.mark.parametrize("kwargs", [dict(nodes=5, members_per_group=6), dict(nodes=5, group_count=0),
                                    dict(nodes=5, members_per_group=2, sources_per_group=3)])
def test_bad_plans_rejected(kwargs):
    with pytest.raises(InvalidTraffic):
        build_group_plan(rng=random.Random(0), **kwargs)


def test_flows_window_and_stop():
    plan = build_group_plan(50, rng=random.Random(4))
    flows = build_flows(plan, 200.0, random.Random(5))
    assert len(flows) == 10
    for f in flows:
        assert 5.0 <= f.start_at <= 15.0
        assert f.stop_at == 190.0
    assert expected_originated(flows) == sum(f.packet_count() for f in flows)


@pytest.mark.parametrize("flow", [CbrFlow(0, 0, 0, interval=0.0), CbrFlow(0, 0, 0, start_at=5.0, stop_at=5.0),
                                  CbrFlow(0, 0, 0, start_at=1.0, stop_at=300.0)])
def test_bad_flows_rejected(flow):
    with pytest.raises(InvalidTraffic):
        flow.validate(200.0)


def test_dump_load_round_trip():
    plan = build_group_plan(30, 4, 6, 2, rng=random.Random(6))
    flows = build_flows(plan, 100.0, random.Random(7))
    plan2, flows2 = load_traffic(dump_traffic(plan, flows))
    assert plan2 == plan
    assert flows2 == flows


def test_load_reports_bad_line():
    with pytest.raises(InvalidTraffic, match="line 2"):
        load_traffic("# header\n0 1 2 512 0.25 5.0\n")


def test_memberships_index():
    plan = GroupPlan([MulticastGroup(0, (1, 2), (1,)), MulticastGroup(1, (2, 3), (3,))])
    assert plan.memberships() == {1: [0], 2: [0, 1], 3: [1]}


@settings(max_examples=50, deadline=None)
@given(start=st.floats(0.0, 50.0), length=st.floats(0.01, 100.0), interval=st.sampled_from([0.05, 0.1, 0.25, 1.0]))
def test_packet_count_matches_enumeration(start, length, interval):
    start = round(start, 6)
    stop = round(start + length, 6)
    f = CbrFlow(0, 0, 0, interval=interval, start_at=start, stop_at=stop)
    ticks = 0
    while round(start + ticks * interval, 6) < stop - 1e-9:
        ticks += 1
    assert f.packet_count() == ticks
