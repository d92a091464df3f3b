"""
Swap costs in a CP / governance pool
====================================

How much does one CP token cost as the pool gets deeper, and how close does
the fiat price of CP get to its peg?
"""
# %%
# Constant product vs constant sum
# --------------------------------
# A pool holding ``L`` of each token charges more than 1:1 for a single unit;
# the gap ``d`` shrinks roughly like ``1 / L``.
from fractions import Fraction

import numpy as np

from nftecon import AmmPool, Side, amount, quote_swap, required_input
from nftecon.amm import slippage_curve

levels = [5, 50, 500, 5000, 50000]
for pt in slippage_curve(levels, trade_size=1):
    print(f"L={float(pt.liquidity):>8.0f}  cpf={pt.cpf_pay}  csf={pt.csf_pay}  d={float(pt.deviation):.3e}")

# %%
# Pegging CP to fiat
# ------------------
# With 1 governance token per 10 CP and governance at $10, ten CP should cost
# $10.  The pool gets there as reserves grow.
price, ideal = 10, Fraction(1, 10)
for gov in 10 ** np.arange(2, 9):
    pool = AmmPool(amount(int(gov) * 10), amount(int(gov)), ideal_ratio=ideal)
    pay = required_input(pool, Side.GOV_TO_CP, amount(10))
    print(f"gov reserve {int(gov):>11,d}: 10 CP costs ${float(pay) * price:.6f}")

# %%
# Price impact of one large sale
# ------------------------------
pool = AmmPool(amount(1000), amount(100), ideal_ratio=ideal)
for size in (1, 10, 100, 500):
    q = quote_swap(pool, Side.CP_TO_GOV, amount(size))
    print(f"sell {size:>4} CP -> {q.amount_out} gov, slippage {float(q.slippage):.2%}, spot after {float(q.spot_price_after):.4f}")
