"""Monte Carlo batches of independent scenario runs.

Run ``j`` uses seed ``scenario.seed + j``.  Each run is reduced to a digest
of integer fixed-point values (truncated at 18 decimals), and digests are
summed in run-index order, so the aggregate does not depend on how runs
were scheduled across workers.
"""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from fractions import Fraction
from pathlib import Path
from typing import Iterable

from ..fixedpoint import SCALE, format_fraction
from ..rarity import failure_pmf_table
from .engine import run_scenario
from .report import SimulationReport
from .scenario import Scenario, validate_scenario

METRICS = (
    "spot_ratio",
    "I",
    "reserve_balance",
    "user_cp",
    "cumulative_burns",
    "arb_profit",
    "system_value",
)


def _units(value) -> int:
    if hasattr(value, "units"):
        return value.units
    return int(Fraction(value) * SCALE)


@dataclass
class RunDigest:
    cells: dict[tuple[int, str], tuple[int, ...]]
    burns: dict[str, list[int]]
    initial_nfts: dict[str, int]
    drift: dict[str, int]


def digest(report: SimulationReport) -> RunDigest:
    cells = {}
    for r in report.records:
        cells[(r.step, r.group)] = (
            _units(r.spot_ratio),
            _units(r.inflation),
            _units(r.reserve_balance),
            _units(r.user_cp),
            r.cumulative_burns * SCALE,
            _units(r.arb_profit),
            _units(r.system_value),
        )
    groups = report.summary["groups"]
    drift = {}
    for gid in groups:
        series = report.series(gid)
        drift[gid] = _units(series[-1].system_value) - _units(series[0].system_value)
    return RunDigest(
        cells=cells,
        burns={gid: list(info["burn_histogram"]) for gid, info in groups.items()},
        initial_nfts={gid: info["initial_nfts"] for gid, info in groups.items()},
        drift=drift,
    )


def _run_one(scenario: Scenario) -> RunDigest:
    return digest(run_scenario(scenario))


@dataclass
class Accumulator:
    n: int = 0
    sums: dict[tuple[int, str], list[int]] = field(default_factory=dict)
    sumsq: dict[tuple[int, str], list[int]] = field(default_factory=dict)
    counts: dict[tuple[int, str], int] = field(default_factory=dict)
    burns: dict[str, list[int]] = field(default_factory=dict)
    initial_nfts: dict[str, int] = field(default_factory=dict)
    drift_sum: dict[str, int] = field(default_factory=dict)
    drift_sumsq: dict[str, int] = field(default_factory=dict)

    def add(self, d: RunDigest) -> None:
        self.n += 1
        for key, values in d.cells.items():
            s = self.sums.setdefault(key, [0] * len(values))
            sq = self.sumsq.setdefault(key, [0] * len(values))
            for i, v in enumerate(values):
                s[i] += v
                sq[i] += v * v
            self.counts[key] = self.counts.get(key, 0) + 1
        for gid, hist in d.burns.items():
            acc = self.burns.setdefault(gid, [0] * len(hist))
            for i, b in enumerate(hist):
                acc[i] += b
            self.initial_nfts[gid] = self.initial_nfts.get(gid, 0) + d.initial_nfts[gid]
            self.drift_sum[gid] = self.drift_sum.get(gid, 0) + d.drift[gid]
            self.drift_sumsq[gid] = self.drift_sumsq.get(gid, 0) + d.drift[gid] ** 2


def _stderr(total: int, total_sq: int, n: int) -> float:
    """Standard error of the mean, from exact integer unit sums."""
    if n < 2:
        return 0.0
    var_units = Fraction(total_sq * n - total * total, n * n * (n - 1))
    return math.sqrt(max(var_units, 0)) / SCALE


@dataclass
class AggregateReport:
    n_runs: int
    seed: int
    rows: list[dict]
    burn_histogram: dict[str, list[int]]
    burn_frequency: dict[str, list[float]]
    failure_pmf: dict[str, list[Fraction]]
    initial_nfts: dict[str, int]
    drift_mean: dict[str, Fraction]
    drift_stderr: dict[str, float]

    def mean(self, step: int, group: str, metric: str) -> Fraction:
        for row in self.rows:
            if row["step"] == step and row["group"] == group:
                return row["mean"][metric]
        raise KeyError((step, group))

    def stderr(self, step: int, group: str, metric: str) -> float:
        for row in self.rows:
            if row["step"] == step and row["group"] == group:
                return row["stderr"][metric]
        raise KeyError((step, group))

    def summary(self) -> dict:
        return {
            "n_runs": self.n_runs,
            "seed": self.seed,
            "groups": {
                gid: {
                    "burn_histogram": self.burn_histogram[gid],
                    "burn_frequency": [f"{f:.12g}" for f in self.burn_frequency[gid]],
                    "failure_pmf": [format_fraction(x) for x in self.failure_pmf[gid]],
                    "initial_nfts": self.initial_nfts[gid],
                    "system_value_drift_mean": format_fraction(self.drift_mean[gid]),
                    "system_value_drift_stderr": f"{self.drift_stderr[gid]:.12g}",
                }
                for gid in self.burn_histogram
            },
        }


def finalize(acc: Accumulator, scenario: Scenario) -> AggregateReport:
    n = acc.n
    rows = []
    for key in sorted(acc.sums, key=lambda k: (k[0], k[1])):
        count = acc.counts[key]
        sums, sqs = acc.sums[key], acc.sumsq[key]
        rows.append(
            {
                "step": key[0],
                "group": key[1],
                "runs": count,
                "mean": {m: Fraction(sums[i], count * SCALE) for i, m in enumerate(METRICS)},
                "stderr": {m: _stderr(sums[i], sqs[i], count) for i, m in enumerate(METRICS)},
            }
        )
    pmf = {g.id: failure_pmf_table(g.ladder) for g in scenario.groups if g.id in acc.burns}
    freq = {
        gid: [b / acc.initial_nfts[gid] if acc.initial_nfts[gid] else 0.0 for b in hist]
        for gid, hist in acc.burns.items()
    }
    return AggregateReport(
        n_runs=n,
        seed=scenario.seed,
        rows=rows,
        burn_histogram=acc.burns,
        burn_frequency=freq,
        failure_pmf=pmf,
        initial_nfts=acc.initial_nfts,
        drift_mean={gid: Fraction(s, n * SCALE) for gid, s in acc.drift_sum.items()},
        drift_stderr={gid: _stderr(acc.drift_sum[gid], acc.drift_sumsq[gid], n) for gid in acc.drift_sum},
    )


def aggregate(digests: Iterable[RunDigest], scenario: Scenario) -> AggregateReport:
    acc = Accumulator()
    for d in digests:
        acc.add(d)
    return finalize(acc, scenario)


def monte_carlo(scenario: Scenario, n_runs: int, workers: int = 1) -> AggregateReport:
    """Run ``n_runs`` seeds ``seed, seed + 1, ...`` and aggregate them."""
    if n_runs < 1:
        raise ValueError("n_runs must be at least 1")
    validate_scenario(scenario)
    scenarios = [replace(scenario, seed=scenario.seed + j) for j in range(n_runs)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            digests = pool.map(_run_one, scenarios, chunksize=max(1, n_runs // (4 * workers)))
            return aggregate(digests, scenario)
    return aggregate(map(_run_one, scenarios), scenario)


def write_aggregate(report: AggregateReport, out_dir: str | Path) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / "aggregate.csv"
    cols = ["step", "group", "runs"]
    for m in METRICS:
        cols += [f"{m}_mean", f"{m}_stderr"]
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(cols)
        for row in report.rows:
            line = [row["step"], row["group"], row["runs"]]
            for m in METRICS:
                line += [format_fraction(row["mean"][m]), f"{row['stderr'][m]:.12g}"]
            writer.writerow(line)
    json_path = out / "mc_summary.json"
    json_path.write_text(json.dumps(report.summary(), indent=2, sort_keys=True) + "\n")
    return [csv_path, json_path]
