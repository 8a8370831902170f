"""``tinyml-sim`` command line: train, simulate, bench.

Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.
"""
from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

from .config import ConfigError, load_config
from .engine import LEDGER_FIELDS, POLICIES, run_episode, train
from .policies import QTable, QTableFormatError
from .report import HOURS_PER_YEAR, QUOTED_HOURS_PER_YEAR, ratio_tag, run_bench

DEFAULT_RATIOS = (0.05, 0.1, 0.2, 0.4)
EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def parse_seeds(text: str) -> list[int]:
    """``"0:10"`` (half-open range) or ``"1,5,9"``."""
    try:
        if ":" in text:
            lo, hi = (int(x) for x in text.split(":", 1))
            seeds = list(range(lo, hi))
        else:
            seeds = [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad seed list {text!r}") from None
    if not seeds or any(s < 0 for s in seeds):
        raise argparse.ArgumentTypeError(f"bad seed list {text!r}")
    return seeds


def parse_ratios(text: str) -> list[float]:
    try:
        ratios = [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad ratio list {text!r}") from None
    if not ratios or any(not 0.0 <= r <= 1.0 for r in ratios):
        raise argparse.ArgumentTypeError(f"ratios must lie in [0, 1]: {text!r}")
    return ratios


def parse_policies(text: str) -> list[str]:
    policies = [x.strip() for x in text.split(",") if x.strip()]
    bad = [p for p in policies if p not in POLICIES]
    if not policies or bad:
        raise argparse.ArgumentTypeError(f"unknown policy {bad or text!r}; choose from {POLICIES}")
    return policies


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tinyml-sim", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value configuration file")
    common.add_argument("--json", action="store_true", help="machine-readable output on stdout")

    t = sub.add_parser("train", parents=[common], help="train a Q-table and write it")
    t.add_argument("--ratio", type=float, help="anomaly ratio to train at")
    t.add_argument("--seed", type=int)
    t.add_argument("--episodes", type=int)
    t.add_argument("--out", required=True, help="Q-table file to write")

    s = sub.add_parser("simulate", parents=[common], help="run one episode")
    s.add_argument("--policy", choices=POLICIES)
    s.add_argument("--ratio", type=float)
    s.add_argument("--seed", type=int)
    s.add_argument("--qtable", help="Q-table file (autonomous policy)")

    b = sub.add_parser("bench", parents=[common], help="policy x ratio x seed benchmark")
    b.add_argument("--ratios", type=parse_ratios, default=list(DEFAULT_RATIOS))
    b.add_argument("--policies", type=parse_policies, default=list(POLICIES))
    b.add_argument("--seeds", type=parse_seeds, default=list(range(10)))
    b.add_argument("--episodes", type=int, help="training episodes per ratio")
    b.add_argument("--qtable", help="use this Q-table for every ratio instead of training")
    b.add_argument("--out", default="bench_out", help="output directory")
    b.add_argument("--workers", type=int, default=1)
    b.add_argument("--svg", action="store_true", help="also write battery_life.svg")
    return parser


def _config(args, **overrides):
    config = load_config(args.config)
    changes = {k: v for k, v in overrides.items() if v is not None}
    try:
        return config.replace(**changes)
    except (TypeError, ValueError) as exc:
        raise UsageError(str(exc)) from None


def _load_table(path: str) -> QTable:
    try:
        return QTable.load(path)
    except OSError as exc:
        raise UsageError(f"cannot read Q-table {path}: {exc.strerror}") from None
    except QTableFormatError as exc:
        raise UsageError(f"{path}: {exc}") from None


def cmd_train(args) -> int:
    if args.episodes is not None and args.episodes < 0:
        raise UsageError("--episodes must be non-negative")
    config = _config(args, anomaly_ratio=args.ratio, seed=args.seed)
    start = time.perf_counter()
    report = train(config, args.episodes)
    report.table.save(args.out)
    info = {"out": str(args.out), "bytes": Path(args.out).stat().st_size,
            "anomaly_ratio": config.anomaly_ratio, "episodes": report.episodes,
            "steps": report.steps, "epsilon": report.epsilon, "alpha": report.alpha,
            "coverage": report.coverage, "seconds": round(time.perf_counter() - start, 3)}
    if args.json:
        print(json.dumps(info, sort_keys=True))
    else:
        print(f"trained {report.episodes} episodes ({report.steps} decisions) "
              f"at ratio {config.anomaly_ratio:g}")
        print(f"final epsilon {report.epsilon:.6g}, final alpha {report.alpha:.6g}"
              + (f" (scaled per entry by (1 + visits)^-{config.visit_power:g})"
                 if config.visit_power else ""))
        print(f"visited states {report.coverage * 100:.0f}% of 100")
        print(f"wrote {info['bytes']} bytes to {args.out}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    config = _config(args, policy=args.policy, anomaly_ratio=args.ratio, seed=args.seed)
    if config.policy == "autonomous":
        if not args.qtable:
            raise UsageError("the autonomous policy needs --qtable")
        config = config.replace(qtable=_load_table(args.qtable))
    result = run_episode(config)
    hours = result.battery_life_hours
    total = result.ledger.total
    shares = {k: (getattr(result.ledger, k) / total * 100 if total else 0.0) for k in LEDGER_FIELDS}
    if args.json:
        out = {"policy": config.policy, "anomaly_ratio": config.anomaly_ratio,
               "seed": config.seed, "battery_life_hours": hours,
               "calendar_years": hours / HOURS_PER_YEAR,
               "quoted_scale_years": hours / QUOTED_HOURS_PER_YEAR,
               "ledger_uwh": result.ledger.as_dict(),
               "counts": {k: getattr(result.counts, k) for k in
                          ("samples", "anomalies", "onboard", "uploads",
                           "retrain_attempts", "retrain_successes")}}
        print(json.dumps(out, sort_keys=True))
        return EXIT_OK
    print(f"policy {config.policy}, anomaly ratio {config.anomaly_ratio:g}, seed {config.seed}")
    print(f"battery life: {hours:,.0f} h = {hours / HOURS_PER_YEAR:.2f} calendar years "
          f"({hours / QUOTED_HOURS_PER_YEAR:.2f} years at {QUOTED_HOURS_PER_YEAR:,.0f} h/yr)")
    print("energy: " + ", ".join(f"{k} {v:.1f}%" for k, v in shares.items()))
    c = result.counts
    print(f"anomalies {c.anomalies} (onboard {c.onboard}, uploaded {c.uploads}); "
          f"retrains {c.retrain_successes}/{c.retrain_attempts} successful")
    return EXIT_OK


def cmd_bench(args) -> int:
    if args.workers < 1:
        raise UsageError("--workers must be at least 1")
    if args.episodes is not None and args.episodes < 0:
        raise UsageError("--episodes must be non-negative")
    config = _config(args)
    qtable = _load_table(args.qtable) if args.qtable else None
    report, tables = run_bench(config, args.ratios, args.policies, args.seeds, qtable=qtable,
                               episodes=args.episodes, workers=args.workers)
    out = Path(args.out)
    written = report.write(out, svg=args.svg)
    if qtable is None:
        for ratio, table in tables.items():
            path = out / f"qtable_{ratio_tag(ratio)}.bin"
            table.save(path)
            written.append(path)
    if args.json:
        print(json.dumps({
            "files": [str(p) for p in written],
            "cells": {f"{p}@{ratio_tag(r)}": {"mean_h": c.mean, "std_h": c.std, "n": c.n}
                      for (p, r), c in report.cells.items()},
            "improvement_vs_static_pct": report.improvement("static"),
            "improvement_vs_dynamic_pct": report.improvement("dynamic"),
        }, sort_keys=True, allow_nan=True))
    else:
        print(report.table())
        print(f"wrote {len(written)} files to {out}")
    return EXIT_OK


COMMANDS = {"train": cmd_train, "simulate": cmd_simulate, "bench": cmd_bench}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)  # exits with 2 on usage errors
    try:
        return COMMANDS[args.command](args)
    except (UsageError, ConfigError) as exc:
        print(f"tinyml-sim: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, ValueError, RuntimeError) as exc:
        print(f"tinyml-sim: failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
