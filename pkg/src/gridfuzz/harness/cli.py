"""Command-line entry point: ``gridfuzz run | replay | report``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .config import TECHNIQUES, ConfigError, load_config
from .experiment import DeterminismError, load_experiment, replay, run_experiment
from .report import emit_report

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_DETERMINISM = 4


def _overrides(args) -> dict:
    o: dict = {}
    ga: dict = {}
    for flag, key in (("technique", "technique"), ("runs", "runs"), ("seed", "seed"),
                      ("out", "output_dir")):
        if getattr(args, flag, None) is not None:
            o[key] = getattr(args, flag)
    for flag, key in (("generations", "generations"), ("population", "population_size"),
                      ("budget", "scenario_budget")):
        if getattr(args, flag, None) is not None:
            ga[key] = getattr(args, flag)
    if ga:
        o["ga"] = ga
    if getattr(args, "no_traces", False):
        o["persist_traces"] = False
    return o


def cmd_run(args) -> int:
    config = load_config(args.config, _overrides(args))
    summary = run_experiment(config)
    print(json.dumps(summary.to_dict(), indent=2, sort_keys=True))
    return EXIT_OK


def cmd_replay(args) -> int:
    config, records = load_experiment(args.dir)
    if args.record:
        chosen = [r for r in records if r.id in set(args.record)]
        missing = set(args.record) - {r.id for r in chosen}
        if missing:
            raise ConfigError(f"no such record(s): {sorted(missing)}")
    elif args.all:
        chosen = records
    else:
        chosen = [r for r in records if r.outcome == "collision"]
    for r in chosen:
        trace = replay(r, config)
        print(f"{r.id}: {trace.outcome} t={trace.collision_time} ok")
        if args.trace_out:
            out = Path(args.trace_out)
            out.mkdir(parents=True, exist_ok=True)
            (out / f"{r.id}.json").write_text(json.dumps(trace.to_dict()))
    print(f"replayed {len(chosen)} scenario(s), all reproduced")
    return EXIT_OK


def cmd_report(args) -> int:
    records, budget = [], None
    for d in args.dirs:
        config, recs = load_experiment(d)
        budget = config.ga.scenario_budget if budget is None else budget
        if config.ga.scenario_budget != budget:
            raise ConfigError("experiments with different scenario budgets cannot share a report")
        records.extend(recs)
    summary = emit_report(records, args.out, budget)
    print(json.dumps(summary.to_dict(), indent=2, sort_keys=True))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gridfuzz", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run an experiment")
    r.add_argument("--config", help="JSON config file (flags override it)")
    r.add_argument("--technique", choices=TECHNIQUES)
    r.add_argument("--runs", type=int)
    r.add_argument("--seed", type=int)
    r.add_argument("--generations", type=int)
    r.add_argument("--population", type=int)
    r.add_argument("--budget", type=float, help="scenario time budget in seconds")
    r.add_argument("--out", help="output directory (default: $GRIDFUZZ_OUTPUT_DIR or ./gridfuzz-out)")
    r.add_argument("--no-traces", action="store_true", help="skip per-scenario trace files")
    r.set_defaults(func=cmd_run)

    rp = sub.add_parser("replay", help="re-run stored scenarios and verify them")
    rp.add_argument("dir", help="experiment output directory")
    rp.add_argument("--record", action="append", help="record id (repeatable)")
    rp.add_argument("--all", action="store_true", help="replay every record, not only collisions")
    rp.add_argument("--trace-out", help="write full 30 Hz traces here")
    rp.set_defaults(func=cmd_replay)

    rep = sub.add_parser("report", help="build CSV reports from one or more experiments")
    rep.add_argument("dirs", nargs="+")
    rep.add_argument("--out", required=True)
    rep.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DeterminismError as exc:
        print(f"determinism violation: {exc}", file=sys.stderr)
        return EXIT_DETERMINISM
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
