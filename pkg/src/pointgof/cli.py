"""Command-line interface: ``pointgof simulate | test | power-study``.

Exit codes: 0 success, 2 invalid usage or configuration, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace
from pathlib import Path

from .errors import ConfigError, NumericError
from .pattern import EvalGrid, Window, default_grid, read_pattern_csv, write_pattern_csv
from .procedures import MEASURES, STATISTICS, SUMMARIES, TestConfig, run_test, write_envelope_csv
from .simulate import MODEL_NAMES, RngSeed, model_from_params, simulate
from .study import load_study, run_study

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3
THREADS_ENV = "POINTGOF_THREADS"


def _add_model_flags(p: argparse.ArgumentParser, default: str | None) -> None:
    p.add_argument("--model", choices=MODEL_NAMES, default=default)
    p.add_argument("--lambda", dest="lam", type=float, help="Poisson intensity")
    p.add_argument("--n", type=int, help="point count (binomial, ssi)")
    p.add_argument("--kappa", type=float, help="parent intensity (matclust, thomas)")
    p.add_argument("--radius", type=float, help="cluster radius (matclust) or interaction radius (strauss)")
    p.add_argument("--mu", type=float, help="mean offspring per parent")
    p.add_argument("--sigma", type=float, help="offspring spread (thomas)")
    p.add_argument("--beta", type=float, help="Strauss activity")
    p.add_argument("--gamma", type=float, help="Strauss interaction in [0, 1]")
    p.add_argument("--r-inhibit", type=float, help="inhibition distance (ssi)")


def _model_params(args) -> dict:
    return {
        "lambda": args.lam, "n": args.n, "kappa": args.kappa, "radius": args.radius, "mu": args.mu,
        "sigma": args.sigma, "beta": args.beta, "gamma": args.gamma, "r_inhibit": args.r_inhibit,
    }


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--threads", type=int, default=argparse.SUPPRESS,
                        help=f"worker threads (default: ${THREADS_ENV} or 1)")
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="master seed (default 0)")
    common.add_argument("--out-dir", default=argparse.SUPPRESS, help="directory for default output files")

    parser = argparse.ArgumentParser(prog="pointgof", description="Goodness-of-fit tests for planar point patterns.",
                                     parents=[common])
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", parents=[common], help="draw a pattern from a model")
    _add_model_flags(sim, None)
    sim.add_argument("--window", type=float, nargs=4, default=[0, 1, 0, 1], metavar=("XMIN", "XMAX", "YMIN", "YMAX"))
    sim.add_argument("--out", help="pattern CSV (default OUT_DIR/pattern.csv)")

    test = sub.add_parser("test", parents=[common], help="test a pattern against a null model")
    test.add_argument("pattern", help="pattern CSV")
    _add_model_flags(test, "poisson")
    test.add_argument("--summary", default="L", help=f"one of {', '.join(SUMMARIES)}")
    test.add_argument("--stat", default="MAD", help=f"one of {', '.join(STATISTICS)}")
    test.add_argument("--measure", help=f"depth for FUN/SCORE: {', '.join(MEASURES)}")
    test.add_argument("--r-index", type=int, help="grid index for --stat point")
    test.add_argument("--m", type=int, help="simulations (default depends on the statistic)")
    test.add_argument("--s", type=int, help="second-stage simulations for bits (default 99)")
    test.add_argument("--alpha", type=float, default=0.05)
    test.add_argument("--method", choices=["auto", "mc", "bits"], default="auto")
    test.add_argument("--no-condition", action="store_true", help="do not condition a Poisson null on n")
    test.add_argument("--corr", default="translation", help="edge correction for K, L, pcf")
    test.add_argument("--r-max", type=float, help="largest scale (default a quarter of the shorter side)")
    test.add_argument("--grid-points", type=int, default=513)
    test.add_argument("--envelope", help="write the envelope CSV here")
    test.add_argument("--report", help="report JSON (default OUT_DIR/report.json)")

    study = sub.add_parser("power-study", parents=[common], help="run a power study from a TOML config")
    study.add_argument("config")
    return parser


def _threads(args) -> int:
    if hasattr(args, "threads"):
        n = args.threads
    else:
        raw = os.environ.get(THREADS_ENV, "1")
        try:
            n = int(raw)
        except ValueError:
            raise ConfigError(f"${THREADS_ENV} must be an integer, got {raw!r}") from None
    if n < 1:
        raise ConfigError("thread count must be at least 1")
    return n


def _out_path(args, explicit, default_name) -> Path:
    if explicit:
        return Path(explicit)
    return Path(getattr(args, "out_dir", ".")) / default_name


def cmd_simulate(args) -> int:
    spec = model_from_params(args.model or "", _model_params(args))
    window = Window(*args.window)
    p = simulate(spec, window, RngSeed(getattr(args, "seed", 0)))
    path = _out_path(args, args.out, "pattern.csv")
    path.parent.mkdir(parents=True, exist_ok=True)
    write_pattern_csv(p, path)
    print(f"{p.n} points written to {path}")
    return EXIT_OK


def cmd_test(args) -> int:
    try:
        observed = read_pattern_csv(args.pattern)
    except OSError as exc:
        raise ConfigError(f"cannot read pattern: {exc}") from None
    params = _model_params(args)
    if args.model == "poisson" and params["lambda"] is None:
        params["lambda"] = observed.n / observed.window.area
    null = model_from_params(args.model, params)
    if args.r_max is None:
        grid = default_grid(observed.window, n=args.grid_points)
    else:
        grid = EvalGrid.linspace(0.0, args.r_max, args.grid_points)
    cfg = TestConfig(
        null=null, summary=args.summary, statistic=args.stat, measure=args.measure, grid=grid, m=args.m, s=args.s,
        alpha=args.alpha, seed=getattr(args, "seed", 0), condition=not args.no_condition, r_index=args.r_index,
        corr=args.corr, threads=_threads(args), envelope=bool(args.envelope),
    )
    report = run_test(cfg, observed, args.method)
    text = report.to_json()
    path = _out_path(args, args.report, "report.json")
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    if args.envelope:
        write_envelope_csv(report.envelope, args.envelope)
    sys.stdout.write(text)
    return EXIT_OK


def cmd_power_study(args) -> int:
    cfg = load_study(args.config)
    out_dir = getattr(args, "out_dir", None) or cfg.out_dir or "."
    threads = _threads(args) if (hasattr(args, "threads") or THREADS_ENV in os.environ) else cfg.threads
    if hasattr(args, "seed"):
        cfg = replace(cfg, seed=args.seed)
    path = run_study(cfg, out_dir, threads=threads, log=lambda msg: print(msg, file=sys.stderr))
    print(f"results written to {path}")
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {"simulate": cmd_simulate, "test": cmd_test, "power-study": cmd_power_study}
    try:
        return handlers[args.command](args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
