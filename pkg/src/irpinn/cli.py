"""Command-line entry point: ``irpinn train | evaluate | compare``.

Exit status: 0 on success, 2 for bad configuration or unreadable input,
3 when training hits a non-finite loss.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys

from .config import PRESETS, apply_overrides, load_config, preset
from .harness import (
    COMPARE_COLUMNS,
    ExperimentConfig,
    ExperimentError,
    compare,
    error_report,
    run_experiment,
    write_error_artifacts,
)
from .net import ConfigurationError, MLPConfig, NumericalError, forward, load_checkpoint
from .problems import get_problem

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


def _base_config(args) -> ExperimentConfig:
    if args.config and args.preset:
        raise ExperimentError("give either --config or --preset, not both")
    if args.config:
        cfg = load_config(args.config)
    elif args.preset:
        cfg = preset(args.preset)
    else:
        cfg = ExperimentConfig()
    return apply_overrides(
        cfg,
        problem=args.problem,
        method=getattr(args, "method", None),
        budget=getattr(args, "budget", None),
        seed=args.seed,
        out_dir=args.out,
    )


def cmd_train(args) -> int:
    cfg = _base_config(args)
    if args.plots:
        cfg = apply_overrides(cfg, plots=True)
    if cfg.out_dir is None:
        cfg = apply_overrides(cfg, out_dir=os.path.join("runs", f"{cfg.problem}-{cfg.method}"))
    cfg.validate()
    res = run_experiment(cfg)
    l1, l2 = res.final_losses()
    print(
        f"epochs={res.n_epochs} internal_iterations={res.internal_iterations} "
        f"L1={l1:.6e} L2={l2:.6e} theta={res.theta:.6g} out={cfg.out_dir}"
    )
    return EXIT_OK


def cmd_evaluate(args) -> int:
    cfg = _base_config(args)
    problem = get_problem(cfg.problem)
    widths, params = load_checkpoint(args.checkpoint)
    mlp = cfg.mlp_config(problem)
    mlp = MLPConfig(widths, input_lower=mlp.input_lower, input_upper=mlp.input_upper)

    def predict(t, x):
        return forward(params, mlp, t, x)

    errors = error_report(problem, predict)
    out_dir = cfg.out_dir or os.path.dirname(os.path.abspath(args.checkpoint))
    os.makedirs(out_dir, exist_ok=True)
    write_error_artifacts(out_dir, problem, errors, predict)
    if args.plots:
        from . import plots

        plots.slices_figure(problem, predict, os.path.join(out_dir, "slices.svg"))
    for s in errors.slices:
        print(f"t={s.t:g} rel_l2_error={s.rel_l2_error:.6e}")
    return EXIT_OK


def cmd_compare(args) -> int:
    base = _base_config(args)
    entries = []
    for name in args.methods.split(","):
        name = name.strip()
        if name in PRESETS:
            cfg = preset(name)
        elif name in ("adam", "two-phase"):
            cfg = apply_overrides(base, method=name)
        else:
            raise ExperimentError(f"unknown method or preset {name!r}")
        entries.append((name, cfg.validate()))
    budget = args.budget if args.budget is not None else base.budget
    out_dir = base.out_dir or "runs"
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, "compare.csv")
    rows = compare(entries, budget, path)
    print(",".join(COMPARE_COLUMNS))
    for row in rows:
        print(f"{row[0]},{row[1]:g},{row[2]:.6e},{row[3]}")
    return EXIT_OK


def _preset_epilog() -> str:
    lines = ["presets:"]
    for name, values in PRESETS.items():
        method = values.get("method", "adam")
        detail = f"{values['problem']}, {method}, budget {values['budget']}"
        if method == "two-phase":
            detail += f", {values['roles']}, alpha {values['alpha']:g}, beta {values['beta']:g}"
        lines.append(f"  {name:<16} {detail}")
    return "\n".join(lines)


def build_parser() -> argparse.ArgumentParser:
    presets = ", ".join(PRESETS)
    epilog = _preset_epilog()
    raw = argparse.RawDescriptionHelpFormatter
    parser = argparse.ArgumentParser(
        prog="irpinn",
        description="Two-phase (inexact restoration) and Adam training of PINNs.",
        epilog=epilog,
        formatter_class=raw,
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="INI config file")
        p.add_argument("--preset", help=f"named preset ({presets})")
        p.add_argument("--problem", choices=("burgers", "heat"))
        p.add_argument("--seed", type=int)
        p.add_argument("--out", help="output directory")

    p = sub.add_parser("train", help="train one network", epilog=epilog, formatter_class=raw)
    common(p)
    p.add_argument("--method", choices=("adam", "two-phase"))
    p.add_argument("--budget", type=int, help="internal-iteration budget")
    p.add_argument("--plots", action="store_true", help="also write loss.svg and slices.svg")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="score a checkpoint against the reference solution")
    common(p)
    p.add_argument("checkpoint")
    p.add_argument("--plots", action="store_true")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("compare", help="run several methods at one budget")
    common(p)
    p.add_argument("--methods", required=True, help="comma-separated methods or presets")
    p.add_argument("--budget", type=int)
    p.set_defaults(func=cmd_compare)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    try:
        return args.func(args)
    except (ExperimentError, ConfigurationError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
