"""Constant-product pool pairing a group's CP token with the governance token.

Prices are quoted as governance tokens per CP token.  All swap arithmetic is
done on integer units; outputs round down and required inputs round up, so
rounding always favours the pool and ``cp_reserve * gov_reserve`` never
decreases.
"""

from __future__ import annotations

import csv
import enum
from dataclasses import dataclass
from fractions import Fraction
from math import isqrt
from typing import Iterable, Sequence

from .fixedpoint import SCALE, RatioLike, TokenAmount, as_fraction, ceil_div, format_fraction, open_text
from .ledger import AccountId, InsufficientBalanceError, Ledger


class AmmError(Exception):
    pass


class PoolDrainError(AmmError):
    """Requested output would empty (or overdraw) a reserve."""


class Side(enum.Enum):
    CP_TO_GOV = "cp->gov"
    GOV_TO_CP = "gov->cp"


@dataclass
class AmmPool:
    cp_reserve: TokenAmount
    gov_reserve: TokenAmount
    fee_rate: Fraction = Fraction(0)
    ideal_ratio: Fraction = Fraction(1)
    cp_token: str = "CP"
    gov_token: str = "GOV"
    account: AccountId | None = None

    def __post_init__(self) -> None:
        self.fee_rate = as_fraction(self.fee_rate)
        self.ideal_ratio = as_fraction(self.ideal_ratio)
        if not 0 <= self.fee_rate < 1:
            raise ValueError("fee_rate must lie in [0, 1)")
        if self.ideal_ratio <= 0:
            raise ValueError("ideal_ratio must be positive")
        if not self.cp_reserve or not self.gov_reserve:
            raise ValueError("pool reserves must be positive")

    @property
    def k_units(self) -> int:
        """Reserve product in squared units (scale 10**36)."""
        return self.cp_reserve.units * self.gov_reserve.units

    @property
    def k(self) -> Fraction:
        return Fraction(self.k_units, SCALE * SCALE)

    def reserves_for(self, side: Side) -> tuple[TokenAmount, TokenAmount]:
        """(reserve_in, reserve_out) for a swap in direction ``side``."""
        if side is Side.CP_TO_GOV:
            return self.cp_reserve, self.gov_reserve
        return self.gov_reserve, self.cp_reserve

    def tokens_for(self, side: Side) -> tuple[str, str]:
        if side is Side.CP_TO_GOV:
            return self.cp_token, self.gov_token
        return self.gov_token, self.cp_token


@dataclass(frozen=True)
class SwapQuote:
    side: Side
    amount_in: TokenAmount
    amount_out: TokenAmount
    spot_price_before: Fraction
    spot_price_after: Fraction
    slippage: Fraction


@dataclass(frozen=True)
class SlippagePoint:
    liquidity: TokenAmount
    cpf_pay: TokenAmount
    csf_pay: TokenAmount

    @property
    def deviation(self) -> Fraction:
        return self.cpf_pay.to_fraction() - self.csf_pay.to_fraction()


def init_pool(
    cp_total: TokenAmount,
    q: RatioLike,
    gov_liquidity: TokenAmount,
    ideal_ratio: RatioLike = 1,
    fee_rate: RatioLike = 0,
) -> tuple[AmmPool, TokenAmount]:
    """Seed a pool with the ``q`` share of ``cp_total``.

    Returns the pool and the CP amount left over for the burning-reward
    reserve; the two always add up to ``cp_total``.
    """
    q = as_fraction(q)
    if not 0 < q < 1:
        raise ValueError(f"q must lie strictly between 0 and 1, got {q}")
    if not cp_total or not gov_liquidity:
        raise ValueError("cp_total and gov_liquidity must be positive")
    pooled = cp_total.mul(q)
    if not pooled:
        raise ValueError("q * cp_total rounds to zero")
    pool = AmmPool(pooled, gov_liquidity, fee_rate=fee_rate, ideal_ratio=ideal_ratio)
    return pool, cp_total - pooled


def spot_ratio(pool: AmmPool) -> Fraction:
    """Governance tokens per CP token at infinitesimal trade size."""
    return Fraction(pool.gov_reserve.units, pool.cp_reserve.units)


def _out_per_in(pool: AmmPool, side: Side) -> Fraction:
    spot = spot_ratio(pool)
    return spot if side is Side.CP_TO_GOV else 1 / spot


def _new_out_units(pool: AmmPool, side: Side, amount_in: TokenAmount) -> int:
    r_in, r_out = pool.reserves_for(side)
    fee = pool.fee_rate
    b, a = fee.denominator, fee.numerator
    # (r_in + amount_in * (1 - fee)) * new_out >= k, smallest such new_out
    return ceil_div(r_in.units * r_out.units * b, r_in.units * b + amount_in.units * (b - a))


def quote_swap(pool: AmmPool, side: Side, amount_in: TokenAmount) -> SwapQuote:
    """Output for selling exactly ``amount_in``; the pool is not modified."""
    if not amount_in:
        raise AmmError("amount_in must be positive")
    r_in, r_out = pool.reserves_for(side)
    new_out = _new_out_units(pool, side, amount_in)
    out = TokenAmount(r_out.units - new_out)
    new_in = r_in + amount_in
    if side is Side.CP_TO_GOV:
        after = Fraction(new_out, new_in.units)
    else:
        after = Fraction(new_in.units, new_out)
    ideal_out = amount_in.to_fraction() * _out_per_in(pool, side)
    return SwapQuote(
        side=side,
        amount_in=amount_in,
        amount_out=out,
        spot_price_before=spot_ratio(pool),
        spot_price_after=after,
        slippage=1 - out.to_fraction() / ideal_out,
    )


def required_input(pool: AmmPool, side: Side, amount_out: TokenAmount) -> TokenAmount:
    """Smallest input whose quote yields at least ``amount_out``."""
    if not amount_out:
        raise AmmError("amount_out must be positive")
    r_in, r_out = pool.reserves_for(side)
    if amount_out.units >= r_out.units:
        raise PoolDrainError(f"cannot take {amount_out} out of a reserve of {r_out}")
    new_out = r_out.units - amount_out.units
    eff_in = ceil_div(r_in.units * r_out.units, new_out) - r_in.units
    fee = pool.fee_rate
    b, a = fee.denominator, fee.numerator
    return TokenAmount(ceil_div(eff_in * b, b - a))


def quote_exact_out(pool: AmmPool, side: Side, amount_out: TokenAmount) -> SwapQuote:
    """Quote for buying ``amount_out``; the quoted output may exceed it by rounding."""
    return quote_swap(pool, side, required_input(pool, side, amount_out))


def execute_swap(
    pool: AmmPool, ledger: Ledger, trader: AccountId, side: Side, amount_in: TokenAmount
) -> TokenAmount:
    """Swap through a ledger-backed pool; returns the amount credited to ``trader``."""
    if pool.account is None:
        raise AmmError("pool is not attached to a ledger account")
    quote = quote_swap(pool, side, amount_in)
    token_in, token_out = pool.tokens_for(side)
    if ledger.balance(token_in, trader) < amount_in:
        raise InsufficientBalanceError(f"{trader} cannot pay {amount_in} {token_in}")
    ledger.transfer_tokens(token_in, trader, pool.account, amount_in)
    ledger.transfer_tokens(token_out, pool.account, trader, quote.amount_out)
    if side is Side.CP_TO_GOV:
        pool.cp_reserve = pool.cp_reserve + amount_in
        pool.gov_reserve = pool.gov_reserve - quote.amount_out
    else:
        pool.gov_reserve = pool.gov_reserve + amount_in
        pool.cp_reserve = pool.cp_reserve - quote.amount_out
    return quote.amount_out


def csf_quote(pool: AmmPool, side: Side, amount_in: TokenAmount) -> TokenAmount:
    """Zero-slippage constant-sum output at the pool's ideal ratio."""
    if side is Side.CP_TO_GOV:
        out = amount_in.mul(pool.ideal_ratio)
    else:
        out = amount_in.mul(1 / pool.ideal_ratio)
    _, r_out = pool.reserves_for(side)
    if out > r_out:
        raise PoolDrainError(f"constant-sum swap of {amount_in} depletes the {r_out} reserve")
    return out


def slippage_curve(
    liquidity_levels: Iterable[TokenAmount | RatioLike],
    trade_size: TokenAmount | RatioLike = 1,
    ideal_ratio: RatioLike = 1,
) -> list[SlippagePoint]:
    """Cost of buying ``trade_size`` CP from pools of growing depth.

    Each level ``L`` is a pool holding ``L`` CP and ``L * ideal_ratio``
    governance tokens.  ``cpf_pay`` is what the constant-product pool
    charges, ``csf_pay`` what a constant-sum pool would.
    """
    trade = TokenAmount.of(trade_size)
    ideal = as_fraction(ideal_ratio)
    points = []
    for level in liquidity_levels:
        cp = TokenAmount.of(level)
        if not cp:
            raise ValueError("liquidity levels must be positive")
        pool = AmmPool(cp, cp.mul(ideal), ideal_ratio=ideal)
        pay = required_input(pool, Side.GOV_TO_CP, trade)
        points.append(SlippagePoint(cp, pay, trade.mul(ideal, rounding="up")))
    return points


def trade_to_ratio(pool: AmmPool, target: RatioLike) -> tuple[Side, TokenAmount] | None:
    """Input that moves the pool's spot ratio to ``target`` (governance per CP).

    Without a fee this is the closed form ``x * y = k`` at reserves
    ``(sqrt(k / target), sqrt(k * target))``.  With fee ``f`` the whole input
    stays in the pool but only ``(1 - f)`` of it prices the swap, so the input
    ``a`` solves ``(r + a)(r + (1 - f) a) = T`` where ``r`` is the input
    reserve and ``T`` is ``k * target`` (buying CP) or ``k / target``
    (selling CP).  The root is rounded down so the trade never overshoots.
    Returns ``None`` when no positive trade is needed.
    """
    target = as_fraction(target)
    if target <= 0:
        raise ValueError("target ratio must be positive")
    spot = spot_ratio(pool)
    if spot < target:
        side, r, num, den = Side.GOV_TO_CP, pool.gov_reserve.units, target.numerator, target.denominator
    elif spot > target:
        side, r, num, den = Side.CP_TO_GOV, pool.cp_reserve.units, target.denominator, target.numerator
    else:
        return None
    b, c = pool.fee_rate.denominator, pool.fee_rate.numerator
    # (b - c) a^2 + (2b - c) r a + b (r^2 - T) = 0 with T = k * num / den
    disc_d = (2 * b - c) ** 2 * r * r * den - 4 * (b - c) * b * (r * r * den - pool.k_units * num)
    root = isqrt(disc_d * den)
    eff = (root - (2 * b - c) * r * den) // (2 * (b - c) * den)
    if eff <= 0:
        return None
    return side, TokenAmount(eff)


CSV_POOL_COLUMNS = ("step", "cp_reserve", "gov_reserve", "spot_ratio", "k")


def pool_row(step: int, pool: AmmPool) -> dict[str, str]:
    return {
        "step": str(step),
        "cp_reserve": str(pool.cp_reserve),
        "gov_reserve": str(pool.gov_reserve),
        "spot_ratio": format_fraction(spot_ratio(pool)),
        "k": format_fraction(pool.k, 36),
    }


def write_pool_csv(target, rows: Sequence[dict[str, str]]) -> None:
    with open_text(target) as fh:
        writer = csv.DictWriter(fh, fieldnames=CSV_POOL_COLUMNS, lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)


def write_slippage_csv(target, points: Sequence[SlippagePoint]) -> None:
    """Write ``liquidity, cpf_pay, csf_pay, d`` rows to a path or text stream."""
    with open_text(target) as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["liquidity", "cpf_pay", "csf_pay", "d"])
        for pt in points:
            writer.writerow([pt.liquidity, pt.cpf_pay, pt.csf_pay, format_fraction(pt.deviation)])
