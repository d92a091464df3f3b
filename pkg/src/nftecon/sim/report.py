"""Simulation reports and their on-disk form.

``write_report`` produces, in ``out_dir``:

* ``timeseries.csv`` - one row per (step, group), step 0 being the
  initialized state;
* ``events.csv`` - reward ledger (burns, purchases, inflation updates);
* ``pool_<group>.csv`` - pool trajectory (step, cp_reserve, gov_reserve,
  spot_ratio, k);
* ``summary.json`` - per-group end-of-run figures.

All numbers are written as exact decimal strings, so identical runs give
byte-identical files.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import TYPE_CHECKING, Sequence

from ..amm import CSV_POOL_COLUMNS
from ..fixedpoint import TokenAmount, format_fraction
from ..rarity import check_inflation_condition, failure_pmf_table
from ..rewards import RewardEvent, write_reward_events

if TYPE_CHECKING:
    from .engine import SimulationState

TIMESERIES_COLUMNS = (
    "step",
    "group",
    "cp_reserve",
    "gov_reserve",
    "spot_ratio",
    "k",
    "I",
    "reserve_balance",
    "user_cp",
    "cumulative_burns",
    "arb_profit",
    "system_value",
    "circulating",
)


@dataclass(frozen=True)
class StepRecord:
    step: int
    group: str
    cp_reserve: TokenAmount
    gov_reserve: TokenAmount
    spot_ratio: Fraction
    k: Fraction
    inflation: Fraction
    reserve_balance: TokenAmount
    circulating: tuple[int, ...]
    user_cp: TokenAmount
    cumulative_burns: int
    arb_profit: Fraction
    system_value: Fraction

    def as_row(self) -> dict[str, str]:
        return {
            "step": str(self.step),
            "group": self.group,
            "cp_reserve": str(self.cp_reserve),
            "gov_reserve": str(self.gov_reserve),
            "spot_ratio": format_fraction(self.spot_ratio),
            "k": format_fraction(self.k, 36),
            "I": format_fraction(self.inflation),
            "reserve_balance": str(self.reserve_balance),
            "user_cp": str(self.user_cp),
            "cumulative_burns": str(self.cumulative_burns),
            "arb_profit": format_fraction(self.arb_profit),
            "system_value": format_fraction(self.system_value),
            "circulating": "|".join(str(n) for n in self.circulating),
        }


@dataclass
class SimulationReport:
    seed: int
    steps: int
    records: list[StepRecord]
    events: list[RewardEvent]
    summary: dict

    def series(self, group: str) -> list[StepRecord]:
        return [r for r in self.records if r.group == group]


def summarize(state: "SimulationState", records: Sequence[StepRecord]) -> dict:
    groups = {}
    for gid, g in state.groups.items():
        mine = [r for r in records if r.group == gid]
        first, last = mine[0], mine[-1]
        ladder = g.group.ladder
        groups[gid] = {
            "launched_at": g.launched_at,
            "ideal_ratio": format_fraction(g.group.pool.ideal_ratio),
            "final_spot_ratio": format_fraction(last.spot_ratio),
            "final_deviation": format_fraction(abs(last.spot_ratio - g.group.pool.ideal_ratio)),
            "final_I": format_fraction(last.inflation),
            "total_burns": last.cumulative_burns,
            "burn_histogram": list(g.burns_by_level),
            "failure_pmf": [format_fraction(x) for x in failure_pmf_table(ladder)],
            "initial_nfts": g.initial_nfts,
            "nfts_minted": state.ledger.nft_minted(gid),
            "blocked_attempts": g.blocked_attempts,
            "inflation_safe_at_I1": check_inflation_condition(ladder, 1).safe,
            "inflationary_flag": g.config.inflationary,
            "reserve_final": str(last.reserve_balance),
            "system_value_initial": format_fraction(first.system_value),
            "system_value_final": format_fraction(last.system_value),
            "system_value_drift": format_fraction(last.system_value - first.system_value),
            "arb_profit": format_fraction(last.arb_profit),
        }
    return {"seed": state.scenario.seed, "steps": state.scenario.steps, "groups": groups}


def write_timeseries(path: Path, records: Sequence[StepRecord]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=TIMESERIES_COLUMNS, lineterminator="\n")
        writer.writeheader()
        for r in records:
            writer.writerow(r.as_row())


def write_report(report: SimulationReport, out_dir: str | Path) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = [out / "timeseries.csv", out / "events.csv", out / "summary.json"]
    write_timeseries(written[0], report.records)
    write_reward_events(written[1], report.events)
    written[2].write_text(json.dumps(report.summary, indent=2, sort_keys=True) + "\n")
    for gid in report.summary["groups"]:
        path = out / f"pool_{gid}.csv"
        with open(path, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=CSV_POOL_COLUMNS, lineterminator="\n")
            writer.writeheader()
            for r in report.series(gid):
                row = r.as_row()
                writer.writerow({c: row[c] for c in CSV_POOL_COLUMNS})
        written.append(path)
    return written
