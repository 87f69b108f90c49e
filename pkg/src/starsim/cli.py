"""``star-sim`` command-line front end.

Exit codes: 0 on success, 2 when a run (or any sweep row) has no feasible
trial, 1 on errors.
"""

from __future__ import annotations

import argparse
import csv
import datetime
import json
import logging
import math
import sys
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np

from . import __version__
from .config import (ExperimentConfig, default_config, dumps_config, loads_config,
                     parse_config, to_dict)
from .errors import ConfigError, StarSimError
from .optim import Objective
from .scenarios import (Aggregate, RunResult, SolverKind, TrialRecord, run_power_min,
                        run_se_max, run_sweep)

log = logging.getLogger("starsim")

SCHEMA_VERSION = 1
TRIAL_COLUMNS = ["axis_value", "trial", "seed", "se_bps_hz", "power_w", "power_dbm",
                 "max_violation_rad", "iterations", "wall_ms", "feasible", "error"]
TRACE_COLUMNS = ["axis_value", "trial", "seed", "outer", "inner", "objective",
                 "max_violation", "stage"]

EXIT_OK, EXIT_ERROR, EXIT_INFEASIBLE = 0, 1, 2


def _num(x) -> str:
    """Locale-free, full-precision float text (empty for NaN)."""
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if math.isnan(x):
        return ""
    return repr(x)


def _json_safe(x):
    if isinstance(x, dict):
        return {k: _json_safe(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_json_safe(v) for v in x]
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else None
    if isinstance(x, np.integer):
        return int(x)
    return x


def _metrics(agg: Aggregate) -> dict:
    return {
        "n_trials": agg.n_trials,
        "n_feasible": agg.n_feasible,
        "feasibility_rate": agg.feasibility_rate,
        "se_mean_bps_hz": agg.se_mean,
        "se_std_bps_hz": agg.se_std,
        "power_mean_w": agg.power_w_mean,
        "power_std_w": agg.power_w_std,
        "power_mean_dbm": agg.power_dbm_mean if agg.n_feasible else math.nan,
        "max_violation_rad": agg.violation_max,
        "iterations_mean": agg.iterations_mean,
    }


def _execute(cfg: ExperimentConfig) -> RunResult:
    sc = cfg.scenario()
    pcfg = cfg.penalty_config()
    solver = SolverKind(cfg.solver)
    if Objective(cfg.objective) is Objective.SUM_SPECTRAL_EFFICIENCY:
        return run_se_max(sc, solver, cfg=pcfg)
    return run_power_min(sc, solver, cfg=pcfg)


def _trial_row(value, r: TrialRecord, timestamps: bool) -> List[str]:
    return [_num(value) if value is not None else "", _num(r.trial), _num(r.seed), _num(r.se),
            _num(r.power_w), _num(r.power_dbm) if r.feasible and r.power_w > 0 else "",
            _num(r.violation), _num(r.iterations), _num(r.wall_ms) if timestamps else "",
            _num(r.feasible), r.error]


def _write_outputs(out_dir: Path, summary: dict, runs, trace: bool, timestamps: bool):
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "summary.json", "w", encoding="utf-8", newline="\n") as fh:
        json.dump(_json_safe(summary), fh, indent=2)
        fh.write("\n")
    with open(out_dir / "trials.csv", "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRIAL_COLUMNS)
        for value, res in runs:
            for r in res.records:
                w.writerow(_trial_row(value, r, timestamps))
    if trace:
        with open(out_dir / "trace.csv", "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(TRACE_COLUMNS)
            for value, res in runs:
                for r, sol in zip(res.records, res.solutions):
                    if sol is None:
                        continue
                    for e in sol.trace:
                        w.writerow([_num(value) if value is not None else "", _num(r.trial),
                                    _num(r.seed), _num(e.outer), _num(e.inner),
                                    _num(e.objective), _num(e.max_violation), e.stage])


def _summary(cfg: ExperimentConfig, timestamps: bool) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "version": __version__,
        "seed": cfg.seed,
        # the output location is not part of the experiment
        "config": {k: v for k, v in to_dict(cfg).items() if k != "out_dir"},
        "metrics": None,
        "timestamp": (datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds")
                      if timestamps else None),
    }


def _log_result(label: str, agg: Aggregate):
    log.info("%s: %d/%d feasible, mean SE %.4f bit/s/Hz, mean power %.4g W, "
             "max violation %.3g deg", label, agg.n_feasible, agg.n_trials, agg.se_mean,
             agg.power_w_mean, math.degrees(agg.violation_max) if agg.n_feasible else math.nan)


def cmd_run(cfg: ExperimentConfig, args) -> int:
    res = _execute(cfg)
    agg = res.aggregate
    summary = _summary(cfg, not args.no_timestamp)
    summary["metrics"] = _metrics(agg)
    _write_outputs(Path(cfg.out_dir), summary, [(None, res)], args.trace, not args.no_timestamp)
    _log_result("run", agg)
    return EXIT_INFEASIBLE if agg.n_feasible == 0 else EXIT_OK


def cmd_sweep(cfg: ExperimentConfig, args) -> int:
    axis, values = cfg.sweep_values()
    sc = cfg.scenario()
    obj = Objective(cfg.objective)
    rows = run_sweep(sc, axis, values, SolverKind(cfg.solver), obj, cfg=cfg.penalty_config(),
                     seed_policy=cfg.sweep.seed_policy)
    summary = _summary(cfg, not args.no_timestamp)
    summary["metrics"] = [dict(axis=cfg.sweep.axis, value=v, **_metrics(row.aggregate))
                          for v, row in zip(cfg.sweep.values, rows)]
    runs = [(v, RunResult(list(row.records), [None] * len(row.records)))
            for v, row in zip(cfg.sweep.values, rows)]
    if args.trace:
        log.warning("--trace is only recorded for run; ignored for sweep")
    _write_outputs(Path(cfg.out_dir), summary, runs, False, not args.no_timestamp)
    for v, row in zip(cfg.sweep.values, rows):
        _log_result(f"{cfg.sweep.axis}={v:g}", row.aggregate)
    return EXIT_INFEASIBLE if any(r.aggregate.n_feasible == 0 for r in rows) else EXIT_OK


def _apply_overrides(cfg: ExperimentConfig, args) -> ExperimentConfig:
    changes = {}
    if getattr(args, "seed", None) is not None:
        changes["seed"] = args.seed
    if getattr(args, "trials", None) is not None:
        changes["trials"] = args.trials
    if getattr(args, "out_dir", None) is not None:
        changes["out_dir"] = args.out_dir
    if not changes:
        return cfg
    merged = to_dict(cfg)
    merged.update(changes)
    return loads_config(json.dumps(merged))


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="star-sim", description="STAR surface beamforming simulator")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-q", "--quiet", action="store_true", help="suppress log lines")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("config", help="JSON experiment config")
        sp.add_argument("--seed", type=int, help="override the global seed")
        sp.add_argument("--trials", type=int, help="override the number of trials")
        sp.add_argument("--out-dir", help="output directory (created if missing)")
        sp.add_argument("--trace", action="store_true", help="write trace.csv")
        sp.add_argument("--no-timestamp", action="store_true",
                        help="omit the timestamp and wall-clock timings from outputs")

    common(sub.add_parser("run", help="run one Monte-Carlo experiment"))
    common(sub.add_parser("sweep", help="run the config's parameter sweep"))
    v = sub.add_parser("validate", help="check a config and print it with defaults filled")
    v.add_argument("config")
    sub.add_parser("print-defaults", help="print the default config")
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(levelname)s: %(message)s", stream=sys.stderr, force=True)
    if args.command == "print-defaults":
        sys.stdout.write(dumps_config(default_config()))
        return EXIT_OK
    try:
        cfg = parse_config(args.config)
        if args.command == "validate":
            sys.stdout.write(dumps_config(cfg))
            return EXIT_OK
        cfg = _apply_overrides(cfg, args)
        if args.command == "run":
            return cmd_run(cfg, args)
        return cmd_sweep(cfg, args)
    except ConfigError as exc:
        log.error("config error: %s", exc)
        return EXIT_ERROR
    except OSError as exc:
        log.error("I/O error on %s: %s", exc.filename or "output", exc.strerror or exc)
        return EXIT_ERROR
    except (StarSimError, ValueError) as exc:
        log.error("%s: %s", type(exc).__name__, exc)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
