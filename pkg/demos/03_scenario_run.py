"""
Running a scenario
==================

Load the baseline scenario, run it once, then look at a small Monte Carlo
batch.  The same runs are available from the command line as
``nftecon run`` and ``nftecon montecarlo``.
"""
# %%
from pathlib import Path

from nftecon.fixedpoint import format_fraction
from nftecon.sim import load_scenario, monte_carlo, run_scenario

here = Path(__file__).resolve().parent
scenario = load_scenario(here / "scenarios" / "baseline.yaml")
report = run_scenario(scenario)

for gid, info in report.summary["groups"].items():
    print(gid, {k: info[k] for k in ("final_spot_ratio", "final_I", "total_burns", "burn_histogram", "arb_profit")})

# %%
# Pool ratio and inflation factor over the first days
# ---------------------------------------------------
for r in report.series("A")[::24]:
    print(f"step {r.step:>3}: spot {float(r.spot_ratio):.5f}  I {float(r.inflation):.3f}  "
          f"reserve {float(r.reserve_balance):>10.2f}  burns {r.cumulative_burns}")

# %%
# A short Monte Carlo batch
# -------------------------
# Overrides work on the parsed document, so a sweep needs no file edits.
# Frequencies are burns per initially minted NFT, so they only line up with
# the analytic table when nobody repurchases and every holder always tries;
# switch the collector's repurchases off and make the cautious agent try too.
overrides = ["steps=48", "agents.0.repurchase=false", "agents.1.policy=always"]
short = load_scenario(here / "scenarios" / "baseline.yaml", overrides)
agg = monte_carlo(short, 20)
print("burn frequency A:", [f"{f:.3f}" for f in agg.burn_frequency["A"]])
print("analytic pmf A:  ", [format_fraction(x, 3) for x in agg.failure_pmf["A"]])
print("drift A:", format_fraction(agg.drift_mean["A"], 4), "+-", f"{agg.drift_stderr['A']:.4f}")
