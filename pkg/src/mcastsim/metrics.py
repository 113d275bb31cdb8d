"""Run ledger, packet delivery ratio, normalized routing overhead and aggregation."""

from __future__ import annotations

import csv
import io
import math
import statistics
from collections import Counter
from dataclasses import asdict, dataclass, fields

from .protocols.core import CONTROL, DATA, Packet
from .traffic import CbrFlow, GroupPlan


class ZeroOriginated(ValueError):
    pass


class EmptyCell(ValueError):
    pass


class MetricsLedger:
    """Counters for one run.  Deliveries are unique (origin, group, seq, receiver)."""

    def __init__(self, plan: GroupPlan, flows: list[CbrFlow]):
        self.plan = plan
        self.flows = list(flows)
        self._flow_of = {(f.source, f.group): f.flow_id for f in self.flows}
        self._receivers = {(f.source, f.group): plan.receivers(f.source, f.group) for f in self.flows}
        self.originated: Counter = Counter()
        self.origin_time: dict[tuple[int, int, int], float] = {}
        self.delivered: set[tuple[int, int, int, int]] = set()
        self.control_tx = 0
        self.data_tx = 0
        self.tx_by_type: Counter = Counter()
        self.duplicate_deliveries = 0

    @property
    def data_rx(self) -> int:
        return len(self.delivered)

    def record_origination(self, packet: Packet, now: float):
        key = (packet.origin, packet.group)
        self.originated[self._flow_of[key]] += 1
        self.origin_time[(packet.origin, packet.group, packet.seq)] = now

    def record_delivery(self, node: int, packet: Packet):
        if packet.kind != DATA:
            return
        recv = self._receivers.get((packet.origin, packet.group))
        if recv is None or node not in recv:
            return
        key = (packet.origin, packet.group, packet.seq, node)
        if key in self.delivered:
            self.duplicate_deliveries += 1
            return
        self.delivered.add(key)

    def count_transmission(self, packet: Packet):
        if packet.kind == CONTROL:
            self.control_tx += 1
        else:
            self.data_tx += 1
        self.tx_by_type[packet.ptype] += 1

    def receivers(self, flow: CbrFlow) -> frozenset[int]:
        return self._receivers[(flow.source, flow.group)]


def pdr(ledger: MetricsLedger, plan: GroupPlan | None = None, post_stabilization: bool = False,
        warmup: float = 10.0) -> float:
    """Unique deliveries over expected deliveries (originated x receivers).

    With ``post_stabilization`` only packets originated at least ``warmup``
    seconds after their flow started are counted, on both sides.
    """
    expected = 0
    delivered = 0
    for flow in ledger.flows:
        recv = ledger.receivers(flow)
        if post_stabilization:
            cutoff = flow.start_at + warmup - 1e-9
            seqs = {seq for (o, g, seq), t in ledger.origin_time.items()
                    if o == flow.source and g == flow.group and t >= cutoff}
        else:
            seqs = None
        count = ledger.originated[flow.flow_id] if seqs is None else len(seqs)
        expected += count * len(recv)
        for o, g, seq, _ in ledger.delivered:
            if o == flow.source and g == flow.group and (seqs is None or seq in seqs):
                delivered += 1
    if expected == 0:
        raise ZeroOriginated("no packets originated (or no receivers)")
    return delivered / expected


def nro(ledger: MetricsLedger) -> float:
    """Control transmissions per delivered data packet; ``inf`` when nothing was delivered."""
    if ledger.data_rx == 0:
        return math.inf
    return ledger.control_tx / ledger.data_rx


RUN_FIELDS = ["protocol", "mobility", "max_speed", "seed", "pdr", "nro", "link_changes",
              "control_tx", "delivered", "originated"]
AGG_FIELDS = ["protocol", "mobility", "max_speed", "mean_pdr", "std_pdr", "mean_nro", "std_nro", "n"]


@dataclass(frozen=True)
class RunResult:
    protocol: str
    mobility: str
    max_speed: float
    seed: int
    pdr: float
    nro: float
    link_changes: int
    control_tx: int
    delivered: int
    originated: int
    pdr_post: float = float("nan")
    scenario_id: str = ""

    @property
    def nro_defined(self) -> bool:
        return math.isfinite(self.nro)

    def row(self) -> dict:
        d = asdict(self)
        return {k: _fmt(d[k]) for k in RUN_FIELDS}


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_runs_csv(results, fh) -> None:
    w = csv.DictWriter(fh, fieldnames=RUN_FIELDS, lineterminator="\n")
    w.writeheader()
    for r in results:
        w.writerow(r.row())


def runs_csv_text(results) -> str:
    buf = io.StringIO()
    write_runs_csv(results, buf)
    return buf.getvalue()


def read_runs_csv(fh) -> list[RunResult]:
    out = []
    for row in csv.DictReader(fh):
        out.append(RunResult(row["protocol"], row["mobility"], float(row["max_speed"]), int(row["seed"]),
                             float(row["pdr"]), float(row["nro"]), int(row["link_changes"]),
                             int(row["control_tx"]), int(row["delivered"]), int(row["originated"])))
    return out


@dataclass(frozen=True)
class AggregateRow:
    protocol: str
    mobility: str
    max_speed: float
    mean_pdr: float
    std_pdr: float
    mean_nro: float
    std_nro: float
    n: int

    def row(self) -> dict:
        return {f.name: _fmt(getattr(self, f.name)) for f in fields(self)}


def _mean_std(values: list[float]) -> tuple[float, float]:
    mean = statistics.fmean(values)
    std = statistics.stdev(values) if len(values) > 1 else 0.0
    return mean, std


def aggregate(results, group_by=("protocol", "mobility", "max_speed")) -> list[AggregateRow]:
    """Per-cell mean and sample standard deviation of pdr and nro.

    Runs that delivered nothing have no defined nro; they count towards the
    pdr statistics only.  A cell where no run delivered anything gets nro inf.
    """
    cells: dict[tuple, list[RunResult]] = {}
    for r in results:
        cells.setdefault(tuple(getattr(r, k) for k in group_by), []).append(r)
    if not cells:
        raise EmptyCell("no results to aggregate")
    rows = []
    for key in sorted(cells):
        rs = cells[key]
        if not rs:
            raise EmptyCell(f"empty cell {key}")
        mp, sp = _mean_std([r.pdr for r in rs])
        defined = [r.nro for r in rs if r.nro_defined]
        mn, sn = _mean_std(defined) if defined else (math.inf, math.nan)
        first = rs[0]
        rows.append(AggregateRow(first.protocol, first.mobility, first.max_speed, mp, sp, mn, sn, len(rs)))
    return rows


def write_aggregate_csv(rows, fh) -> None:
    w = csv.DictWriter(fh, fieldnames=AGG_FIELDS, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow(r.row())
