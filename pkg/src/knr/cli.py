"""Command-line front end: identify, track, compare.

Exit codes: 0 on success, 2 for configuration errors, 3 for numerical
failures (diverged integration, singular fits, overflow).
"""
from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from .controller import run_closed_loop
from .errors import NumericalFailure
from .harness import (ExperimentReport, default_config, format_comparison_table,
                      identify as run_identify, knr_controller_config, mse,
                      run_campaign, write_report_csv, write_trajectory_csv)
from .koopman import load_model, save_model
from .systems import get_reference, get_system

_SYSTEM_CHOICES = ("vdp", "crane", "car")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="knr",
        description="Newton-Raphson tracking with data-driven lifted predictors")
    sub = parser.add_subparsers(dest="command", required=True)

    p_id = sub.add_parser("identify", help="collect data and fit a lifted model")
    p_id.add_argument("--system", required=True, choices=_SYSTEM_CHOICES)
    p_id.add_argument("--trials", type=int, default=None, help="collection trials")
    p_id.add_argument("--horizon", type=float, default=None, help="seconds per trial")
    p_id.add_argument("--dt", type=float, default=None, help="sampling interval [s]")
    p_id.add_argument("--seed", type=int, default=0)
    p_id.add_argument("--out", required=True, help="model file to write")

    p_tr = sub.add_parser("track", help="run one closed-loop tracking experiment")
    p_tr.add_argument("--system", required=True, choices=_SYSTEM_CHOICES)
    p_tr.add_argument("--controller", required=True, choices=("nr", "knr"))
    p_tr.add_argument("--model", default=None, help="model file (required for knr)")
    p_tr.add_argument("--alpha", type=float, default=None, help="speedup gain")
    p_tr.add_argument("--lookahead", type=float, default=None, help="prediction horizon [s]")
    p_tr.add_argument("--tf", type=float, default=None, help="simulated duration [s]")
    p_tr.add_argument("--dt", type=float, default=None, help="controller/plant step [s]")
    p_tr.add_argument("--deriv", choices=("fdm", "sensitivity"), default=None,
                      help="derivative method for the nr controller")
    p_tr.add_argument("--out", required=True, help="trajectory CSV to write")

    p_cmp = sub.add_parser("compare", help="run an NR vs KNR comparison campaign")
    p_cmp.add_argument("--system", required=True, choices=_SYSTEM_CHOICES)
    p_cmp.add_argument("--runs", type=int, default=10)
    p_cmp.add_argument("--seed", type=int, default=0)
    p_cmp.add_argument("--report", required=True, help="summary CSV to write")
    p_cmp.add_argument("--traj-dir", required=True, help="directory for per-run CSVs")
    p_cmp.add_argument("--workers", type=int, default=1, help="parallel run workers")
    p_cmp.add_argument("--timing", action="store_true",
                       help="embed measured wall times in the report CSV "
                            "(makes the file non-reproducible)")
    return parser


def _cmd_identify(args) -> int:
    cfg = default_config(args.system)
    overrides = {}
    if args.trials is not None:
        overrides["trials"] = args.trials
    if args.horizon is not None:
        overrides["collect_horizon"] = args.horizon
    if args.dt is not None:
        overrides["dt"] = args.dt
    cfg = cfg.with_overrides(**overrides)
    model = run_identify(cfg, args.seed)
    save_model(model, args.out)
    diag = model.diagnostics
    print(f"wrote {args.out}: N={model.N} m={model.m} dt={model.dt:g} "
          f"residual={diag.residual:.3e} rank={diag.rank_gamma_c}")
    return 0


def _cmd_track(args) -> int:
    cfg = default_config(args.system)
    overrides = {}
    if args.alpha is not None:
        overrides["alpha"] = args.alpha
    if args.lookahead is not None:
        overrides["T"] = args.lookahead
    if args.dt is not None:
        overrides["dt"] = args.dt
    if args.deriv is not None:
        overrides["derivative_method"] = args.deriv
    if args.tf is not None:
        overrides["t_f"] = args.tf
    cfg = cfg.with_overrides(**overrides)

    system = get_system(args.system)
    ref = get_reference(args.system)
    if args.controller == "knr":
        if args.model is None:
            raise ValueError("--model is required for the knr controller")
        model = load_model(args.model)
        if model.basis.name != args.system:
            raise ValueError(f"model basis {model.basis.name!r} does not match "
                             f"system {args.system!r}")
        ctrl_cfg = knr_controller_config(cfg)
    else:
        model = None
        ctrl_cfg = cfg.controller

    trace = run_closed_loop(system, ref, ctrl_cfg, model,
                            x0=np.array(cfg.x0), t_f=cfg.t_f)
    report = ExperimentReport(
        system=args.system, controller=args.controller, mse=mse(trace, ref),
        id_time=0.0, track_time=trace.track_time, trace=trace, seed=0,
        config={})
    write_trajectory_csv(report, args.out)
    print(f"wrote {args.out}: mse={report.mse:.6e} track_time={trace.track_time:.3f}s")
    return 0


def _cmd_compare(args) -> int:
    summary = run_campaign(args.system, runs=args.runs, base_seed=args.seed,
                           workers=args.workers)
    os.makedirs(args.traj_dir, exist_ok=True)
    for report in summary.nr_reports + summary.knr_reports:
        name = f"{report.system}_{report.controller}_seed{report.seed}.csv"
        write_trajectory_csv(report, os.path.join(args.traj_dir, name))
    write_report_csv(summary, args.report, include_timing=args.timing)
    print(format_comparison_table(summary))
    return 0


_HANDLERS = {"identify": _cmd_identify, "track": _cmd_track, "compare": _cmd_compare}


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return _HANDLERS[args.command](args)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericalFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
