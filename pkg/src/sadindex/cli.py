"""Command-line front end. Exit codes: 0 ok, 1 runtime error, 2 validation or usage error."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .analytics import (CORRELATION_HEADER, InsufficientOverlap, ZeroVariance, case_rates, correlate,
                        read_cumulative_cases)
from .csvio import fmt, write_csv
from .demographics import default_population_tables, load_population_table
from .pipeline import STAGES, ConfigError, StageError, load_config, run_pipeline
from .poststrat import read_sad_csv, sad_series
from .simharness import SimSpecError, bias_experiment, default_simspec, load_simspec

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _overrides(args) -> dict:
    keys = ("output_dir", "corpus", "census", "cases", "granularity", "scope_level", "workers", "seed",
            "keywords", "min_group_users", "population_mode", "ramp", "map_classes", "case_mode")
    out = {k: getattr(args, k, None) for k in keys}
    if getattr(args, "strict", False):
        out["strict"] = True
    if getattr(args, "figures", False):
        out["figures"] = True
    return out


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", "-c", type=Path, help="JSON run config")
    p.add_argument("--out", dest="output_dir", help="output directory (overrides config)")
    p.add_argument("--corpus")
    p.add_argument("--census")
    p.add_argument("--cases")
    p.add_argument("--keywords", help="2020, 2021, both, or a keyword file")
    p.add_argument("--granularity", choices=("day", "week", "month", "all"))
    p.add_argument("--scope-level", choices=("national", "state", "both"))
    p.add_argument("--population-mode", choices=("matched", "national"),
                   help="census shares for state cells: the state's own or national")
    p.add_argument("--min-group-users", type=int)
    p.add_argument("--case-mode", choices=("new", "cumulative"))
    p.add_argument("--ramp", choices=("sequential", "diverging"))
    p.add_argument("--map-classes", choices=("linear", "quantile"))
    p.add_argument("--workers", "-j", type=int, help="parallel processes for scoring (default: all cores)")
    p.add_argument("--seed", type=int)
    p.add_argument("--strict", action="store_true", help="fail on the first malformed record")
    p.add_argument("--figures", action="store_true", help="also render PNG figures with matplotlib")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="sadindex", description="Demographically adjusted sentiment (SAD index) pipeline.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("run", help="run the full pipeline (or a suffix of it)")
    _add_run_flags(p)
    p.add_argument("--from", dest="start", choices=STAGES, default="score", help="first stage to run")
    p.add_argument("--to", dest="stop", choices=STAGES, default="report", help="last stage to run")

    for stage in ("score", "attribute", "tabulate", "sad", "report"):
        _add_run_flags(sub.add_parser(stage, help=f"run only the {stage} stage"))

    p = sub.add_parser("correlate", help="correlate a SAD series with case rates")
    _add_run_flags(p)
    p.add_argument("--sad", type=Path, help="SAD CSV (default: <out>/sad.csv)")
    p.add_argument("--report", type=Path, help="where to write the correlation CSV (default: <out>/correlation.csv)")
    p.add_argument("--scope", action="append", help="restrict to these scopes (repeatable)")

    p = sub.add_parser("simulate", help="run the bias-recovery experiment")
    p.add_argument("--spec", type=Path, help="SimSpec JSON (default: bundled spec)")
    p.add_argument("--seed", type=int)
    p.add_argument("--n", type=int, help="override number of synthetic users")
    p.add_argument("--report", type=Path, help="write metric,value CSV here")
    check = p.add_mutually_exclusive_group()
    check.add_argument("--self-check", dest="self_check", action="store_true", default=None,
                       help="fail unless adjusted error < raw error (heterogeneous specs only)")
    check.add_argument("--no-self-check", dest="self_check", action="store_false")

    p = sub.add_parser("validate-config", help="check a run config without running it")
    _add_run_flags(p)
    return parser


def _cmd_pipeline(args, start: str, stop: str) -> int:
    cfg = load_config(args.config, _overrides(args))
    run_pipeline(cfg, start, stop)
    return EXIT_OK


def _cmd_validate(args) -> int:
    cfg = load_config(args.config, _overrides(args))
    cfg.validate(stages=("score",) if cfg.corpus is not None else ())
    print(f"config ok: output_dir={cfg.output_dir} granularity={cfg.granularity} scope_level={cfg.scope_level}")
    return EXIT_OK


def _cmd_correlate(args) -> int:
    ov = _overrides(args)
    if args.config is None and ov["output_dir"] is None:
        ov["output_dir"] = "."  # only used for default --sad / --report locations
    cfg = load_config(args.config, ov)
    if cfg.cases is None:
        raise ConfigError("correlate needs a cases file (--cases or config 'cases')")
    sad_path = args.sad or cfg.output_dir / "sad.csv"
    for p in (sad_path, cfg.cases):
        if not Path(p).is_file():
            raise ConfigError(f"file not found: {p}")
    if cfg.census is not None and not cfg.census.is_file():
        raise ConfigError(f"census file not found: {cfg.census}")
    dists = read_sad_csv(sad_path)
    cases = read_cumulative_cases(cfg.cases)
    tables = load_population_table(cfg.census) if cfg.census else default_population_tables()
    granularity = dists[0].period.granularity if dists else cfg.granularity
    scopes = sorted({d.scope for d in dists} & set(cases))
    if args.scope:
        scopes = [s for s in scopes if s in {x.upper() for x in args.scope}]
    rows = []
    for scope in scopes:
        if scope not in tables:
            raise ConfigError(f"no population total for {scope}")
        rates = case_rates(cases[scope], tables[scope].total, scope, granularity, cfg.case_mode)
        try:
            results = correlate(sad_series([d for d in dists if d.scope == scope]), rates)
        except InsufficientOverlap as exc:
            raise ConfigError(str(exc)) from None
        except ZeroVariance as exc:
            raise ConfigError(f"{scope}: {exc}") from None
        for r in results:
            rows.append([scope, r.window, str(r.n), fmt(r.r), fmt(r.p_value)])
            print(f"{scope} {r.window}: n={r.n} r={fmt(r.r)} p={fmt(r.p_value)}")
    if not rows:
        raise ConfigError("no scope has both SAD values and case data")
    out = args.report or cfg.output_dir / "correlation.csv"
    Path(out).parent.mkdir(parents=True, exist_ok=True)
    write_csv(out, CORRELATION_HEADER, rows)
    return EXIT_OK


def _cmd_simulate(args) -> int:
    try:
        spec = load_simspec(args.spec) if args.spec else default_simspec()
        if args.seed is not None:
            spec = spec.with_seed(args.seed)
        if args.n is not None:
            spec = spec.with_n(args.n)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read spec {args.spec}: {exc}") from None
    except SimSpecError as exc:
        raise ConfigError(f"invalid spec: {exc}") from None
    rep = bias_experiment(spec)
    for k, v in rep.rows():
        print(f"{k},{v}")
    if args.report:
        write_csv(args.report, ("metric", "value"), rep.rows())
    self_check = spec.self_check if args.self_check is None else args.self_check
    if self_check:
        if not spec.heterogeneous:
            print("self-check skipped: spec is homogeneous (all multipliers 1)")
        elif rep.adjusted_error >= rep.raw_error:
            print(f"self-check FAILED: adjusted error {fmt(rep.adjusted_error)} >= raw error {fmt(rep.raw_error)}",
                  file=sys.stderr)
            return EXIT_RUNTIME
        else:
            print("self-check passed: adjusted error < raw error")
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_pipeline(args, args.start, args.stop)
        if args.command in STAGES:
            return _cmd_pipeline(args, args.command, args.command)
        if args.command == "correlate":
            return _cmd_correlate(args)
        if args.command == "simulate":
            return _cmd_simulate(args)
        if args.command == "validate-config":
            return _cmd_validate(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
