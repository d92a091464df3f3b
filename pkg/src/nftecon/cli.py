"""Command-line front end.

::

    nftecon validate   --scenario FILE [--set key=value ...]
    nftecon run        --scenario FILE --out DIR [--seed N] [--set key=value ...]
    nftecon montecarlo --scenario FILE --out DIR --runs N [--workers N] [--seed N]
    nftecon curves     --curve {fig1,fig4} [--out DIR] [--set key=value ...]

Exit status: 0 success, 2 parse/usage errors, 3 failed validation,
4 runtime failures (e.g. unwritable output directory).

``curves`` settings: fig1 takes ``liquidity`` (list), ``trade`` and
``ideal``; fig4 takes ``p`` (list) or ``p_step``, and ``I`` (list).
"""

from __future__ import annotations

import argparse
import io
import sys
from fractions import Fraction
from pathlib import Path

import yaml

from .amm import slippage_curve, write_slippage_csv
from .fixedpoint import as_fraction, format_fraction
from .rarity import check_inflation_condition, fig4_rows, write_fig4_csv
from .sim.montecarlo import monte_carlo, write_aggregate
from .sim.engine import run_scenario
from .sim.report import write_report
from .sim.scenario import (
    ScenarioError,
    ValidationError,
    apply_overrides,
    parse_scenario,
    read_document,
)

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_VALIDATION = 3
EXIT_RUNTIME = 4

DEFAULT_LIQUIDITY = [5, 50, 500, 5000, 50000]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nftecon", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser, scenario: bool = True) -> None:
        if scenario:
            p.add_argument("--scenario", required=True, type=Path, help="JSON or YAML scenario")
            p.add_argument("--seed", type=int, help="override the scenario seed")
        p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                       help="dotted-path override, repeatable (e.g. groups.0.q=0.4)")

    p = sub.add_parser("validate", help="static expected-value checks per group")
    common(p)
    p = sub.add_parser("run", help="run one scenario and write its report")
    common(p)
    p.add_argument("--out", required=True, type=Path)
    p = sub.add_parser("montecarlo", help="run seeds seed..seed+N-1 and aggregate")
    common(p)
    p.add_argument("--out", required=True, type=Path)
    p.add_argument("--runs", type=int, required=True)
    p.add_argument("--workers", type=int, default=1)
    p = sub.add_parser("curves", help="emit swap-cost or rarity-ceiling curves as CSV")
    common(p, scenario=False)
    p.add_argument("--curve", required=True, choices=("fig1", "fig4"))
    p.add_argument("--out", type=Path, help="directory for <curve>.csv (default: stdout)")
    return parser


def _check_overrides(overrides: list[str]) -> None:
    for item in overrides:
        key, sep, _ = item.partition("=")
        if not sep or not key.strip():
            raise ScenarioError(f"malformed override {item!r}; expected key=value")


def _load(args):
    _check_overrides(args.overrides)
    data = read_document(args.scenario)
    if args.overrides:
        data = apply_overrides(data, args.overrides)
    if args.seed is not None and isinstance(data, dict):
        data["seed"] = args.seed
    return parse_scenario(data)


def cmd_validate(args, out) -> int:
    scenario = _load(args)
    ok = True
    for g in scenario.groups:
        report = check_inflation_condition(g.ladder, 1)
        flag = " (flagged inflationary)" if g.inflationary else ""
        print(f"group {g.id}{flag}", file=out)
        for c in report.levels:
            ceiling = format_fraction(c.ceiling, 9) if c.ceiling is not None else "inf"
            verdict = "PASS" if c.passes else "FAIL"
            print(
                f"  level {c.level}: p={format_fraction(c.p, 6)} r={format_fraction(c.r, 9)} "
                f"ceiling={ceiling} E[next]={format_fraction(c.expected_next, 9)} "
                f"cp_i={format_fraction(c.current_value, 9)} {verdict}",
                file=out,
            )
        if not report.safe and not g.inflationary:
            ok = False
            print(f"  group {g.id}: levels {report.failing} FAIL", file=out)
    return EXIT_OK if ok else EXIT_VALIDATION


def cmd_run(args, out) -> int:
    scenario = _load(args)
    report = run_scenario(scenario)
    try:
        write_report(report, args.out)
    except OSError as exc:
        print(f"error: cannot write to {args.out}: {exc.strerror}", file=sys.stderr)
        return EXIT_RUNTIME
    for gid, info in report.summary["groups"].items():
        print(
            f"{gid}: spot={info['final_spot_ratio']} burns={info['total_burns']} "
            f"drift={info['system_value_drift']}",
            file=out,
        )
    return EXIT_OK


def cmd_montecarlo(args, out) -> int:
    if args.runs < 1:
        raise ScenarioError("--runs must be at least 1")
    scenario = _load(args)
    agg = monte_carlo(scenario, args.runs, workers=args.workers)
    try:
        write_aggregate(agg, args.out)
    except OSError as exc:
        print(f"error: cannot write to {args.out}: {exc.strerror}", file=sys.stderr)
        return EXIT_RUNTIME
    last = max(r["step"] for r in agg.rows)
    for gid in agg.burn_histogram:
        spot = agg.mean(last, gid, "spot_ratio")
        print(
            f"{gid}: runs={agg.n_runs} mean_spot={format_fraction(spot)} "
            f"burns={sum(agg.burn_histogram[gid])} "
            f"drift={format_fraction(agg.drift_mean[gid])}+-{agg.drift_stderr[gid]:.6g}",
            file=out,
        )
    return EXIT_OK


def _settings(overrides: list[str]) -> dict:
    _check_overrides(overrides)
    settings = {}
    for item in overrides:
        key, _, raw = item.partition("=")
        try:
            settings[key.strip()] = yaml.safe_load(raw)
        except yaml.YAMLError as exc:
            raise ScenarioError(f"cannot parse value {raw!r}", key) from exc
    return settings


def _as_list(value, name: str) -> list[Fraction]:
    items = value if isinstance(value, list) else [value]
    try:
        return [as_fraction(v) for v in items]
    except (TypeError, ValueError) as exc:
        raise ScenarioError(f"expected numbers, got {value!r}", name) from exc


def cmd_curves(args, out) -> int:
    settings = _settings(args.overrides)
    buffer = io.StringIO()
    if args.curve == "fig1":
        levels = _as_list(settings.get("liquidity", DEFAULT_LIQUIDITY), "liquidity")
        if not levels:
            raise ScenarioError("empty liquidity grid", "liquidity")
        if any(lv <= 0 for lv in levels):
            raise ScenarioError("liquidity levels must be positive", "liquidity")
        points = slippage_curve(
            levels, as_fraction(settings.get("trade", 1)), as_fraction(settings.get("ideal", 1))
        )
        write_slippage_csv(_target(args, "fig1.csv") or buffer, points)
    else:
        if "p" in settings:
            ps = _as_list(settings["p"], "p")
        else:
            step = as_fraction(settings.get("p_step", "0.01"))
            if step <= 0 or step >= 1:
                raise ScenarioError("p_step must lie in (0, 1)", "p_step")
            ps, p = [], step
            while p < 1:
                ps.append(p)
                p += step
        infl = _as_list(settings.get("I", ["1/2", 1, 2]), "I")
        if not ps or not infl:
            raise ScenarioError("empty grid", "p" if not ps else "I")
        if any(not 0 < p < 1 for p in ps):
            raise ScenarioError("p grid must lie inside (0, 1)", "p")
        if any(i <= 0 for i in infl):
            raise ScenarioError("inflation factors must be positive", "I")
        rows = fig4_rows(ps, infl)
        write_fig4_csv(_target(args, "fig4.csv") or buffer, rows)
    if not args.out:
        out.write(buffer.getvalue())
    return EXIT_OK


def _target(args, name: str) -> Path | None:
    if args.out is None:
        return None
    args.out.mkdir(parents=True, exist_ok=True)
    return args.out / name


COMMANDS = {
    "validate": cmd_validate,
    "run": cmd_run,
    "montecarlo": cmd_montecarlo,
    "curves": cmd_curves,
}


def main(argv: list[str] | None = None, out=None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_PARSE if exc.code else EXIT_OK
    try:
        return COMMANDS[args.command](args, out)
    except ValidationError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
