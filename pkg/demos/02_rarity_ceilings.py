"""
Rarity ceilings and where NFTs burn
===================================

Upgrading from level ``i`` succeeds with probability ``p``.  A failed attempt
burns the NFT and pays ``p * I * cp_{i+1}``.  The value factor ``r`` can be
at most ``1 / (p + I (1 - p) p)`` before upgrading becomes a free lunch.
"""
# %%
# The ceiling for three inflation factors
# ---------------------------------------
import numpy as np

from nftecon.rarity import (
    RarityLadder,
    check_inflation_condition,
    failure_pmf_table,
    max_rarity_factor,
    simulate_single_attempts,
    simulate_trajectories,
)

ps = np.round(np.arange(0.05, 1.0, 0.1), 2)
print("p     " + "  ".join(f"I={i:<4}" for i in (0.5, 1, 2)))
for p in ps:
    row = [max_rarity_factor(float(p), i) for i in (0.5, 1.0, 2.0)]
    print(f"{p:.2f}  " + "  ".join(f"{r:6.3f}" for r in row))

# For I = 2 the ceiling bottoms out at p = 0.75 and climbs again towards 1.

# %%
# Checking a ladder
# -----------------
ladder = RarityLadder.build(10, ["0.5", "0.3", "0.1"], ["1.3", "2.5", "5"])
report = check_inflation_condition(ladder, inflation=1)
for c in report.levels:
    print(f"level {c.level}: r={float(c.r):.2f} ceiling={float(c.ceiling):.3f} {'ok' if c.passes else 'too generous'}")

# %%
# Empirical value change per attempt
# ----------------------------------
# At the ceiling the mean change is zero; at 90 % of it upgrades lose value
# on average, which is what keeps total value in check.
for scale in (1, 0.9):
    lad = RarityLadder.at_ceiling(10, ["0.3"], scale=scale)
    deltas = simulate_single_attempts(lad, 0, 100_000, seed=1)
    print(f"scale {scale}: mean change {deltas.mean():+.4f} +- {deltas.std() / np.sqrt(deltas.size):.4f}")

# %%
# Where NFTs burn
# ---------------
ps4 = ["0.5"] * 4
counts = simulate_trajectories(ps4, 100_000, seed=3)
for i, (n, x) in enumerate(zip(counts, failure_pmf_table(ps4)), start=1):
    print(f"burned attempting level {i}: {n / 1e5:.4f} (analytic {float(x):.4f})")
print(f"reached the top: {counts[-1] / 1e5:.4f}")
