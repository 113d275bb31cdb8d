"""Command line: run, sweep, mobgen, analyze, config.

Exit status is 0 on success, 1 on invalid input and 2 when a sweep
finished with some cells failed.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import asdict

from . import harness, metrics
from .config import Scenario, SweepSpec, ValidationError, dump_config, load_config
from .mobility import InvalidParams, ParseError

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_PARTIAL = 2


def _load(args) -> tuple[Scenario, SweepSpec]:
    if args.config:
        return load_config(args.config)
    return Scenario().validate(), SweepSpec().validate()


def _apply_overrides(sc: Scenario, args, traffic: bool = True) -> Scenario:
    changes = {}
    if getattr(args, "protocol", None):
        changes["protocol"] = args.protocol
    if getattr(args, "seed", None) is not None:
        changes["seed"] = args.seed
    if getattr(args, "model", None):
        changes["mobility.model"] = args.model
    if getattr(args, "speed", None) is not None:
        changes["mobility.max_speed"] = args.speed
    if getattr(args, "nodes", None) is not None:
        changes["nodes"] = args.nodes
    if getattr(args, "duration", None) is not None:
        changes["duration"] = args.duration
    return sc.replace(**changes).validate(traffic) if changes else sc


def cmd_run(args) -> int:
    sc, _ = _load(args)
    sc = _apply_overrides(sc, args)
    if args.event_log:
        with open(args.event_log, "w") as log:
            res = harness.run_scenario(sc, event_log=log)
    else:
        res = harness.run_scenario(sc)
    if args.post_stabilization:
        res = harness.lenient(res)
    text = metrics.runs_csv_text([res])
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    sys.stdout.write(text)
    return EXIT_OK


def cmd_sweep(args) -> int:
    base, spec = _load(args)
    if args.speeds:
        spec.speeds = args.speeds
    if args.seeds:
        spec.seeds = args.seeds
    if args.protocols:
        spec.protocols = args.protocols
    if args.models:
        spec.models = args.models
    if args.workers is not None:
        spec.workers = args.workers
    spec.validate()

    def progress(i, n, cell):
        if not args.quiet:
            print(f"[{i}/{n}] {cell}", file=sys.stderr)

    outcome = harness.run_sweep(base, spec, None, args.post_stabilization, progress)
    harness.write_sweep(outcome, args.out, figures=not args.no_figures)
    print(f"{len(outcome.results)} runs written to {args.out}; {len(outcome.failures)} failed")
    return EXIT_OK if outcome.ok else EXIT_PARTIAL


def cmd_mobgen(args) -> int:
    sc, _ = _load(args)
    sc = _apply_overrides(sc, args, traffic=False)
    paths = harness.mobgen(sc, args.out)
    print(f"{len(paths)} node paths ({sc.mobility.model}, v_max {sc.mobility.max_speed:g}) written to {args.out}")
    return EXIT_OK


def cmd_analyze(args) -> int:
    rep = harness.analyze(args.trace, args.range, args.sample_dt, args.duration)
    for k, v in asdict(rep).items():
        print(f"{k},{v}")
    return EXIT_OK


def cmd_config(args) -> int:
    sc, spec = _load(args)
    sys.stdout.write(dump_config(sc, spec))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mcastsim", description="MANET multicast protocol simulator")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def scenario_opts(sp):
        sp.add_argument("--config", help="scenario file (YAML); defaults to the standard scenario")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--model", choices=["rwp", "rpgm", "manhattan", "static"])
        sp.add_argument("--speed", type=float, help="maximum node speed, m/s")

    r = sub.add_parser("run", help="run one scenario and print its CSV row")
    scenario_opts(r)
    r.add_argument("--protocol")
    r.add_argument("--event-log", help="write every dispatched event to this file")
    r.add_argument("--post-stabilization", action="store_true",
                   help="report PDR over packets sent after each flow's warm-up")
    r.add_argument("--out", help="also write the CSV here")
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("sweep", help="run the protocol x model x speed x seed grid")
    s.add_argument("--config")
    s.add_argument("--speeds", type=float, nargs="+")
    s.add_argument("--seeds", type=int, nargs="+")
    s.add_argument("--protocols", nargs="+")
    s.add_argument("--models", nargs="+")
    s.add_argument("--workers", type=int, help="worker processes (0 = one per CPU)")
    s.add_argument("--out", required=True, help="output directory")
    s.add_argument("--post-stabilization", action="store_true")
    s.add_argument("--no-figures", action="store_true", help="write figure CSVs only, skip PNG rendering")
    s.add_argument("-q", "--quiet", action="store_true")
    s.set_defaults(func=cmd_sweep)

    m = sub.add_parser("mobgen", help="write an ns-2 mobility trace")
    scenario_opts(m)
    m.add_argument("--nodes", type=int)
    m.add_argument("--duration", type=float)
    m.add_argument("--out", required=True)
    m.set_defaults(func=cmd_mobgen)

    a = sub.add_parser("analyze", help="link changes, degree and partitions of a trace")
    a.add_argument("--trace", required=True)
    a.add_argument("--range", type=float, default=150.0)
    a.add_argument("--sample-dt", type=float, default=0.1)
    a.add_argument("--duration", type=float)
    a.set_defaults(func=cmd_analyze)

    c = sub.add_parser("config", help="print the effective configuration")
    c.add_argument("--config")
    c.set_defaults(func=cmd_config)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except ParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (InvalidParams, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
