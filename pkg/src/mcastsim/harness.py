"""Experiment orchestration: build a run from a Scenario, execute it, sweep grids."""

from __future__ import annotations

import csv
import logging
import os
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import metrics
from .config import Scenario, SweepSpec
from .kernel import make_rng
from .mobility import (MobilityPath, PositionTable, generate_manhattan, generate_rpgm, generate_rwp,
                       export_ns2, import_ns2, link_changes, sample_times)
from .radio import components
from .traffic import build_flows, build_group_plan
from .world import World, static_paths

log = logging.getLogger(__name__)


class PlacementFailed(RuntimeError):
    pass


def connected_placement(nodes: int, area, range_m: float, rng, attempts: int = 10_000):
    """Uniform placement, redrawn until the unit-disk graph is connected."""
    for _ in range(attempts):
        xy = [(rng.uniform(0.0, area.width), rng.uniform(0.0, area.height)) for _ in range(nodes)]
        x = np.array([p[0] for p in xy])
        y = np.array([p[1] for p in xy])
        if len(set(components(x, y, range_m).values())) == 1:
            return xy
    raise PlacementFailed(f"no connected placement of {nodes} nodes after {attempts} draws")


def build_paths(sc: Scenario) -> list[MobilityPath]:
    area = sc.area_obj()
    model = sc.mobility.model
    if model == "static":
        coords = connected_placement(sc.nodes, area, sc.radio.range, make_rng(sc.seed, "placement"))
        return static_paths(coords, sc.duration)
    rng = make_rng(sc.seed, "mobility")
    if model == "rwp":
        return generate_rwp(sc.rwp_params(), area, sc.nodes, sc.duration, rng)
    if model == "rpgm":
        return generate_rpgm(sc.rpgm_params(), area, sc.nodes, sc.duration, rng)
    return generate_manhattan(sc.manhattan_params(), area, sc.nodes, sc.duration, rng)


def build_traffic(sc: Scenario):
    t = sc.traffic
    rng = make_rng(sc.seed, "traffic")
    pools = None
    if sc.mobility.model == "rpgm" and t.align_with_rpgm:
        # one multicast group per mobility group, cycling when there are more sessions
        size = sc.nodes // sc.mobility.group_count
        pools = [list(range(g * size, (g + 1) * size)) for g in range(sc.mobility.group_count)]
    plan = build_group_plan(sc.nodes, t.groups, t.members_per_group, t.sources_per_group, rng, pools=pools,
                            sources_are_members=t.sources_are_members)
    flows = build_flows(plan, sc.duration, rng, t.interval, t.packet_size, tuple(t.start_window), t.stop_margin)
    joins = {n: rng.uniform(*t.join_window) for n in range(sc.nodes)}
    return plan, flows, joins


def build_world(sc: Scenario, paths=None, event_log=None) -> World:
    sc.validate()
    plan, flows, joins = build_traffic(sc)
    return World(paths if paths is not None else build_paths(sc), sc.protocol, radio=sc.radio_params(),
                 plan=plan, flows=flows, seed=sc.seed, protocol_config=sc.protocol_config,
                 join_times=joins, event_log=event_log)


def result_from(sc: Scenario, world: World, n_link_changes: int) -> metrics.RunResult:
    ledger = world.ledger
    return metrics.RunResult(
        protocol=sc.protocol, mobility=sc.mobility.model,
        max_speed=0.0 if sc.mobility.model == "static" else float(sc.mobility.max_speed),
        seed=sc.seed, pdr=metrics.pdr(ledger), nro=metrics.nro(ledger), link_changes=n_link_changes,
        control_tx=ledger.control_tx, delivered=ledger.data_rx, originated=sum(ledger.originated.values()),
        pdr_post=metrics.pdr(ledger, post_stabilization=True, warmup=sc.warmup), scenario_id=sc.scenario_id)


def run_scenario(sc: Scenario, event_log=None, return_world: bool = False):
    """Run one scenario to its duration and summarise it."""
    paths = build_paths(sc)
    world = build_world(sc, paths, event_log)
    world.run(sc.duration)
    lc = 0 if sc.mobility.model == "static" else link_changes(paths, sc.radio.range, sc.link_sample_dt,
                                                              sc.duration)
    res = result_from(sc, world, lc)
    return (res, world) if return_world else res


def lenient(res: metrics.RunResult) -> metrics.RunResult:
    """The same result with the post-stabilization PDR in the ``pdr`` column."""
    return replace(res, pdr=res.pdr_post)


# -- sweeps


@dataclass
class CellFailure:
    scenario_id: str
    error: str
    detail: str


@dataclass
class SweepOutcome:
    results: list = field(default_factory=list)
    failures: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failures


def _run_cell(sc: Scenario):
    try:
        return run_scenario(sc)
    except Exception as exc:  # one bad cell must not sink the sweep
        return CellFailure(sc.scenario_id, type(exc).__name__, "".join(traceback.format_exception_only(exc)).strip())


def run_sweep(base: Scenario, spec: SweepSpec, out_dir: str | Path | None = None, post_stabilization=False,
              progress=None, runner=_run_cell) -> SweepOutcome:
    """Run the full grid; results come back in canonical cell order whatever the scheduling."""
    spec.validate()
    cells = spec.cells(base)
    for sc in cells:
        sc.validate()
    workers = spec.workers or os.cpu_count() or 1
    outcome = SweepOutcome()
    if workers == 1 or len(cells) == 1:
        done = []
        for i, sc in enumerate(cells):
            done.append(runner(sc))
            if progress:
                progress(i + 1, len(cells), sc.scenario_id)
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            done = []
            for i, r in enumerate(pool.map(runner, cells)):
                done.append(r)
                if progress:
                    progress(i + 1, len(cells), cells[i].scenario_id)
    for r in done:
        if isinstance(r, CellFailure):
            outcome.failures.append(r)
            log.warning("cell %s failed: %s", r.scenario_id, r.detail)
        else:
            outcome.results.append(lenient(r) if post_stabilization else r)
    if out_dir is not None:
        write_sweep(outcome, out_dir)
    return outcome


def write_sweep(outcome: SweepOutcome, out_dir: str | Path, figures: bool = True):
    from .plots import write_figure_data

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "runs.csv", "w", newline="") as fh:
        metrics.write_runs_csv(outcome.results, fh)
    if outcome.results:
        rows = metrics.aggregate(outcome.results)
        with open(out / "aggregate.csv", "w", newline="") as fh:
            metrics.write_aggregate_csv(rows, fh)
        write_figure_data(rows, out / "figures", render=figures)
    with open(out / "failures.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["scenario_id", "error", "detail"])
        for f in outcome.failures:
            w.writerow([f.scenario_id, f.error, f.detail])


# -- trace tools


def mobgen(sc: Scenario, out: str | Path) -> list[MobilityPath]:
    sc.validate(traffic=False)
    paths = build_paths(sc)
    Path(out).write_text(export_ns2(paths))
    return paths


@dataclass(frozen=True)
class TraceReport:
    nodes: int
    duration: float
    link_changes: int
    mean_degree: float
    mean_partitions: float
    max_partitions: int


def analyze(trace: str | Path, range_m: float = 150.0, sample_dt: float = 0.1,
            duration: float | None = None) -> TraceReport:
    paths = import_ns2(Path(trace).read_text(), duration)
    dur = min(p.duration for p in paths)
    lc = link_changes(paths, range_m, sample_dt, dur)
    table = PositionTable(paths)
    n = len(paths)
    degrees = []
    parts = []
    for t in sample_times(dur, max(sample_dt, 1.0)):
        x, y = table.snapshot_xy(float(t))
        dx = x[:, None] - x[None, :]
        dy = y[:, None] - y[None, :]
        adj = dx * dx + dy * dy <= range_m * range_m
        degrees.append((adj.sum() - n) / n)
        parts.append(len(set(components(x, y, range_m).values())))
    return TraceReport(n, dur, lc, float(np.mean(degrees)), float(np.mean(parts)), int(max(parts)))
