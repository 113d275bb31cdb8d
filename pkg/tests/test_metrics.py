import io
import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mcastsim.metrics import (EmptyCell, MetricsLedger, RunResult, ZeroOriginated, aggregate, nro, pdr,
                              read_runs_csv, runs_csv_text, write_aggregate_csv)
from mcastsim.protocols.core import CONTROL, DATA, Packet
from mcastsim.traffic import CbrFlow, GroupPlan, MulticastGroup

import handcount


def ledger_with(members=(0, 1, 2, 3), source=0):
    plan = GroupPlan([MulticastGroup(0, tuple(members), (source,))])
    flow = CbrFlow(0, source, 0, start_at=1.0, stop_at=100.0)
    return MetricsLedger(plan, [flow])


def data(seq, origin=0, group=0):
    return Packet(seq + 100, DATA, "DATA", origin, group, seq)


def test_pdr_arithmetic_and_uniqueness():
    led = ledger_with()
    for s in range(4):
        led.record_origination(data(s), 1.0 + s)
    led.record_delivery(1, data(0))
    led.record_delivery(1, data(0))  # duplicate
    led.record_delivery(2, data(1))
    led.record_delivery(0, data(2))  # the source is not a receiver
    led.record_delivery(9, data(2))  # not a member
    led.record_delivery(3, Packet(1, CONTROL, "X", 0, 0, 3))
    assert led.data_rx == 2
    assert led.duplicate_deliveries == 1
    assert pdr(led) == 2 / 12


def test_post_stabilization_window():
    led = ledger_with()
    for s, t in enumerate([1.0, 5.0, 10.999, 11.0, 12.0]):
        led.record_origination(data(s), t)
    for s in range(5):
        led.record_delivery(1, data(s))
    led.record_delivery(2, data(4))
    # packets at 11.0 and 12.0 count: 3 deliveries of 2 x 3 expected
    assert pdr(led, post_stabilization=True, warmup=10.0) == 3 / 6


def test_nro_definition():
    led = ledger_with()
    assert math.isinf(nro(led))
    led.count_transmission(Packet(1, CONTROL, "Q", 0))
    led.count_transmission(Packet(2, CONTROL, "Q", 0))
    led.count_transmission(data(0))
    led.record_origination(data(0), 2.0)
    led.record_delivery(1, data(0))
    assert (led.control_tx, led.data_tx) == (2, 1)
    assert nro(led) == 2.0


def test_zero_originated_raises():
    with pytest.raises(ZeroOriginated):
        pdr(ledger_with())


@pytest.mark.parametrize("case", handcount.CASES, ids=lambda c: c.__name__)
def test_hand_counted_runs(case):
    w, exp = case()
    w.run(5.0)
    led = w.ledger
    assert sum(led.originated.values()) == exp["originated"]
    assert led.data_rx == exp["delivered"]
    assert led.control_tx == exp["control"]
    assert pdr(led) == pytest.approx(exp["pdr"], abs=0.0)
    assert nro(led) == exp["nro"]
    if "pdr_post" in exp:
        assert pdr(led, post_stabilization=True, warmup=exp["warmup"]) == exp["pdr_post"]


def result(protocol="odmrp", speed=1.0, seed=1, p=0.5, n=2.0):
    return RunResult(protocol, "rwp", speed, seed, p, n, 10, 4, 2, 8)


def test_aggregate_mean_and_sample_std():
    rows = aggregate([result(p=0.2, n=1.0, seed=1), result(p=0.4, n=3.0, seed=2), result(p=0.9, seed=3, speed=5.0)])
    assert len(rows) == 2
    a = rows[0]
    assert (a.max_speed, a.n) == (1.0, 2)
    assert a.mean_pdr == pytest.approx(0.3)
    assert a.std_pdr == pytest.approx(math.sqrt(0.02))
    assert a.mean_nro == 2.0 and a.std_nro == pytest.approx(math.sqrt(2.0))
    assert rows[1].std_pdr == 0.0
    buf = io.StringIO()
    write_aggregate_csv(rows, buf)
    assert buf.getvalue().splitlines()[0] == "protocol,mobility,max_speed,mean_pdr,std_pdr,mean_nro,std_nro,n"


def test_aggregate_skips_undefined_nro():
    (row,) = aggregate([result(p=0.0, n=math.inf, seed=1), result(p=0.5, n=2.0, seed=2),
                        result(p=0.5, n=4.0, seed=3)])
    assert row.n == 3 and row.mean_pdr == pytest.approx(1 / 3)
    assert row.mean_nro == 3.0
    (row,) = aggregate([result(p=0.0, n=math.inf, seed=1)])
    assert row.mean_nro == math.inf and math.isnan(row.std_nro)


def test_aggregate_empty_raises():
    with pytest.raises(EmptyCell):
        aggregate([])


def test_runs_csv_round_trip_including_inf():
    rs = [result(p=0.123456789, n=math.inf), result(seed=2, p=1.0, n=0.1)]
    text = runs_csv_text(rs)
    assert text.splitlines()[0] == "protocol,mobility,max_speed,seed,pdr,nro,link_changes,control_tx,delivered,originated"
    back = read_runs_csv(io.StringIO(text))
    assert runs_csv_text(back) == text


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 7), st.integers(1, 3)), max_size=40), st.integers(1, 8))
def test_pdr_bounded_and_monotone(deliveries, count):
    led = ledger_with()
    for s in range(count):
        led.record_origination(data(s), 1.0)
    prev = 0.0
    for seq, node in deliveries:
        if seq < count:
            led.record_delivery(node, data(seq))
        now = pdr(led)
        assert 0.0 <= now <= 1.0 and now >= prev
        prev = now
