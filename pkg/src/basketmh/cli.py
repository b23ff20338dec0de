"""Command-line interface: ``basketmh {analyze,models,gof,test,simulate,scenarios}``.

Exit codes: 0 success, 2 usage, 3 data or parse error, 4 estimation error,
5 combinatorial limit.
"""

from __future__ import annotations

import argparse
import io
import json
import logging
import math
import platform
import sys
import time
from typing import Optional, Sequence

from . import __version__
from .core_types import RD, EffectScale
from .errors import CombinatorialLimit, DataError, EstimationError
from .exact_test import DEFAULT_REPS, DEFAULT_SEED, exact_test
from .gic import DEFAULT_MAX_MODELS, rank_models
from .gof import gof_test
from .io import (
    builtin_scenarios,
    load_scenario,
    metrics_rows,
    read_table,
    resolve_output,
    write_csv_rows,
)
from .report import (
    build_report,
    exact_test_dict,
    format_ranking,
    format_report,
    fmt,
    fmt_p,
    gof_dict,
    ranking_dict,
    ranking_rows,
    report_dict,
)
from .simulation import DESK_REPS, FULL_REPS, run_study

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_ESTIMATION = 4
EXIT_COMBINATORIAL = 5

log = logging.getLogger("basketmh")

SCALE_CHOICES = ["rd", "rr", "iwrr", "or", "iwor", "rr-user", "or-user"]


def _scale(name: str) -> EffectScale:
    try:
        return EffectScale.parse(name)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _emit(text: str, out: Optional[str]) -> None:
    if out:
        path = resolve_output(out)
        path.write_text(text if text.endswith("\n") else text + "\n", encoding="utf-8")
        log.info("wrote %s", path)
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")


def _clean(x):
    # strict JSON: numpy scalars to Python, non-finite floats to null
    if isinstance(x, dict):
        return {k: _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if hasattr(x, "tolist"):
        return _clean(x.tolist())
    if isinstance(x, float) and not math.isfinite(x):
        return None
    return x


def _json(obj) -> str:
    return json.dumps(_clean(obj), indent=2, allow_nan=False)


def _csv(rows) -> str:
    buf = io.StringIO()
    write_csv_rows(rows, buf)
    return buf.getvalue()


# --- subcommands ------------------------------------------------------------


def cmd_analyze(args) -> int:
    table = read_table(args.data)
    scales = args.scale or [RD, _scale("iwrr")]
    ranking = None
    if args.models:
        ranking = rank_models(table, scales[0], args.strategy, args.min_patients,
                              args.window, args.alpha)
    report = build_report(table, scales, args.alpha, args.method, args.reps, args.seed,
                          args.add_one, ranking)
    if args.format == "json":
        _emit(_json(report_dict(report)), args.out)
    elif args.format == "csv":
        _emit(_csv([dict(scale=s.scale.name, estimate=s.estimate.point, ci_low=s.estimate.ci_low,
                         ci_high=s.estimate.ci_high, statistic=s.test.statistic,
                         p_value=s.test.p_value,
                         gof_statistic=s.gof.statistic if s.gof else "",
                         gof_p_value=s.gof.p_value if s.gof else "")
                    for s in report.summaries]), args.out)
    else:
        _emit(format_report(report), args.out)
    return EXIT_OK


def cmd_models(args) -> int:
    table = read_table(args.data)
    scale = (args.scale or [RD])[0]
    ranking = rank_models(table, scale, args.strategy, args.min_patients, args.window,
                          args.alpha, args.bias_weighting, args.max_models)
    if args.format == "json":
        _emit(_json(ranking_dict(ranking, args.top, args.last)), args.out)
    elif args.format == "csv":
        _emit(_csv(ranking_rows(ranking, args.top, args.last)), args.out)
    else:
        _emit(format_ranking(ranking, table, args.top, args.last), args.out)
    return EXIT_OK


def cmd_gof(args) -> int:
    table = read_table(args.data)
    results = [(s, gof_test(table, s, args.pearson)) for s in (args.scale or [RD])]
    if args.format == "json":
        _emit(_json([gof_dict(g, s) for s, g in results]), args.out)
    elif args.format == "csv":
        _emit(_csv([{k: v for k, v in gof_dict(g, s).items() if k != "fitted_rates"}
                    for s, g in results]), args.out)
    else:
        lines = [f"MH-{s.name}: Z2 = {fmt(g.statistic)}, df = {g.df}, P = {fmt_p(g.p_value)}"
                 for s, g in results]
        _emit("\n".join(lines), args.out)
    return EXIT_OK


def cmd_test(args) -> int:
    table = read_table(args.data)
    results = []
    for s in args.scale or [RD, _scale("iwrr")]:
        t = exact_test(table, s, method=args.method, reps=args.reps, seed=args.seed,
                       add_one=args.add_one)
        results.append((s, t))
    if args.format == "json":
        _emit(_json([exact_test_dict(t, s.name) for s, t in results]), args.out)
    elif args.format == "csv":
        _emit(_csv([{k: v for k, v in exact_test_dict(t, s.name).items() if k != "weights"}
                    for s, t in results]), args.out)
    else:
        lines = []
        for s, t in results:
            d = t.distribution
            how = "exact" if d.method == "exact" else f"Monte Carlo, reps={d.reps}"
            lines.append(f"T ({s.name} weights) = {fmt(t.statistic)}, P = {fmt_p(t.p_value)} ({how})")
        lines.append(f"seed: {args.seed}")
        _emit("\n".join(lines), args.out)
    return EXIT_OK


def cmd_simulate(args) -> int:
    spec = load_scenario(args.scenario)
    reps = FULL_REPS if args.full_scale else args.reps
    spec = spec.replace(replicates=reps, seed=args.seed, strategy=args.strategy)
    log.info("scenario %s: %d replicates, seed %d", spec.label, spec.replicates, spec.seed)
    t0 = time.perf_counter()
    metrics = run_study(spec, args.workers)
    wall = time.perf_counter() - t0
    rows = metrics_rows(metrics)
    if args.format == "json":
        body = _json({"scenario": spec.to_dict(), "rows": rows})
    else:
        body = _csv(rows)
    manifest = {
        "scenario": spec.label,
        "kind": spec.kind,
        "seed": spec.seed,
        "replicates": spec.replicates,
        "strategy": spec.strategy.value if spec.kind == "identification" else None,
        "workers": args.workers,
        "wall_time_s": round(wall, 3),
        "package_version": __version__,
        "python": platform.python_version(),
    }
    if args.out:
        path = resolve_output(args.out)
        path.write_text(body, encoding="utf-8")
        mpath = path.with_name(path.stem + ".manifest.json")
        mpath.write_text(_json(manifest) + "\n", encoding="utf-8")
        print(f"wrote {path} and {mpath}", file=sys.stderr)
    else:
        sys.stdout.write(body)
        print(_json(manifest), file=sys.stderr)
    print(f"seed: {spec.seed}", file=sys.stderr)
    return EXIT_OK


def cmd_scenarios(args) -> int:
    for name in builtin_scenarios():
        print(name)
    return EXIT_OK


# --- parser -----------------------------------------------------------------


def _common(p: argparse.ArgumentParser, scales: bool = True) -> None:
    if scales:
        p.add_argument("--scale", type=_scale, action="append", metavar="{rd,rr,iwrr,or}",
                       help="effect scale; repeat for several (choices: " + ", ".join(SCALE_CHOICES) + ")")
    p.add_argument("--alpha", type=float, default=0.05, help="two-sided CI level (default 0.05)")
    p.add_argument("--out", help="write output here; relative paths go under $BASKETMH_OUTPUT_DIR")
    p.add_argument("--format", choices=["text", "json", "csv"], default="text")


def _randomized(p: argparse.ArgumentParser) -> None:
    p.add_argument("--method", choices=["exact", "mc"], default="exact",
                   help="null distribution of the test statistic (default exact)")
    p.add_argument("--reps", type=int, default=DEFAULT_REPS, help="Monte Carlo draws")
    p.add_argument("--seed", type=int, default=DEFAULT_SEED,
                   help=f"random seed (default {DEFAULT_SEED})")
    p.add_argument("--add-one", action="store_true",
                   help="use (count+1)/(reps+1) for Monte Carlo p-values")


def _ranking_opts(p: argparse.ArgumentParser) -> None:
    p.add_argument("--strategy", choices=["two", "all", "nonsparse"], default="two")
    p.add_argument("--min-patients", type=int, default=10,
                   help="non-sparse: every subclass needs more than this many patients")
    p.add_argument("--window", type=float, default=1.0,
                   help="flag models within this GIC distance of the best")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="basketmh", description="One-sample Mantel-Haenszel analysis of basket trials.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="per-basket table, pooled estimates, tests and GOF")
    p.add_argument("data")
    _common(p)
    _randomized(p)
    p.add_argument("--models", action="store_true", help="append a GIC ranking")
    _ranking_opts(p)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("models", help="rank subclass models by GIC")
    p.add_argument("data")
    _common(p)
    _ranking_opts(p)
    p.add_argument("--top", type=int, help="show the best N models")
    p.add_argument("--last", type=int, help="also show the worst N models")
    p.add_argument("--bias-weighting", choices=["unit", "weighted"], default="unit")
    p.add_argument("--max-models", type=int, default=DEFAULT_MAX_MODELS)
    p.set_defaults(func=cmd_models)

    p = sub.add_parser("gof", help="goodness-of-fit test of a common effect")
    p.add_argument("data")
    _common(p)
    p.add_argument("--pearson", action="store_true", help="use the binomial Pearson denominator")
    p.set_defaults(func=cmd_gof)

    p = sub.add_parser("test", help="test of the global null")
    p.add_argument("data")
    _common(p)
    _randomized(p)
    p.set_defaults(func=cmd_test)

    p = sub.add_parser("simulate", help="run a simulation scenario")
    p.add_argument("scenario", help="scenario file or bundled scenario name")
    p.add_argument("--reps", type=int, default=None,
                   help=f"replicates (default: scenario value, usually {DESK_REPS})")
    p.add_argument("--full-scale", action="store_true", help=f"use {FULL_REPS} replicates")
    p.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    p.add_argument("--strategy", choices=["two", "all", "nonsparse"], default=None)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", help="CSV path; a manifest is written next to it")
    p.add_argument("--format", choices=["csv", "json"], default="csv")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("scenarios", help="list bundled scenarios")
    p.set_defaults(func=cmd_scenarios)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except CombinatorialLimit as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_COMBINATORIAL
    except EstimationError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ESTIMATION
    except DataError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:
        # e.g. a scale/weight combination the library rejects
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
