"""Burning rewards, NFT purchases and the inflation factor.

Each NFT group owns a CP token.  At launch ``q * cp_total`` CP is paired with
governance liquidity in the group's pool and the rest sits in the group's
reward reserve, a ledger account.  Burns are paid from the reserve, NFT
purchases refill it, and the DAO periodically resets the inflation factor
from the pool's spot ratio relative to its ideal ratio.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Sequence

from .amm import AmmPool, init_pool, spot_ratio
from .fixedpoint import RatioLike, TokenAmount, as_fraction, ceil_div, format_fraction
from .ledger import AccountId, InsufficientBalanceError, Ledger, RarityOutOfRangeError
from .rarity import (
    RarityLadder,
    failure_pmf,
    max_rarity_factor,
    value_at,
    value_exact,
)


class RewardsError(Exception):
    pass


class ReserveInsufficientError(RewardsError):
    pass


class UpdateNotDueError(RewardsError):
    """Inflation factor update requested before its period elapsed."""


DEFAULT_CLAMP = (Fraction(1, 4), Fraction(4))


@dataclass(frozen=True)
class InflationState:
    factor: Fraction = Fraction(1)
    update_period: int = 24
    clamp: tuple[Fraction, Fraction] = DEFAULT_CLAMP
    last_update_step: int = 0

    def __post_init__(self) -> None:
        lo, hi = (as_fraction(c) for c in self.clamp)
        object.__setattr__(self, "clamp", (lo, hi))
        object.__setattr__(self, "factor", as_fraction(self.factor))
        if not 0 < lo <= hi:
            raise ValueError("clamp must satisfy 0 < I_min <= I_max")
        if not lo <= self.factor <= hi:
            raise ValueError(f"inflation factor {self.factor} outside clamp [{lo}, {hi}]")
        if self.update_period < 1:
            raise ValueError("update_period must be at least one step")

    def is_due(self, step: int) -> bool:
        return step - self.last_update_step >= self.update_period


@dataclass
class NftGroup:
    group_id: str
    ladder: RarityLadder
    cp_total: TokenAmount
    q: Fraction
    pool: AmmPool
    reserve_account: AccountId
    inflationary: bool = False

    @property
    def cp_token(self) -> str:
        return self.pool.cp_token

    def reserve_balance(self, ledger: Ledger) -> TokenAmount:
        return ledger.balance(self.cp_token, self.reserve_account)

    def reserve(self, ledger: Ledger) -> "RewardReserve":
        return RewardReserve(self.group_id, self.reserve_balance(ledger))


@dataclass(frozen=True)
class RewardReserve:
    group: str
    balance: TokenAmount


@dataclass(frozen=True)
class RewardEvent:
    step: int
    group: str
    event: str  # burn | purchase | I_update
    amount: TokenAmount
    inflation: Fraction
    reserve_balance: TokenAmount


def cp_token_id(group_id: str) -> str:
    return f"CP:{group_id}"


def launch_group(
    ledger: Ledger,
    group_id: str,
    ladder: RarityLadder,
    cp_total: TokenAmount,
    q: RatioLike,
    gov_liquidity: TokenAmount,
    ideal_ratio: RatioLike = 1,
    fee_rate: RatioLike = 0,
    gov_token: str = "GOV",
    inflationary: bool = False,
) -> NftGroup:
    """Create the CP token, mint it into pool and reserve, and seed the pool."""
    pool, reserve_amount = init_pool(cp_total, q, gov_liquidity, ideal_ratio, fee_rate)
    token = cp_token_id(group_id)
    pool.cp_token = token
    pool.gov_token = gov_token
    pool.account = AccountId.from_label(f"pool:{group_id}")
    reserve_account = AccountId.from_label(f"reserve:{group_id}")
    if gov_token not in ledger.tokens:
        ledger.register_token(gov_token)
    ledger.register_token(token)
    ledger.register_group(group_id, ladder.max_rarity)
    ledger.mint_tokens(token, pool.account, pool.cp_reserve)
    ledger.mint_tokens(token, reserve_account, reserve_amount)
    ledger.mint_tokens(gov_token, pool.account, gov_liquidity)
    return NftGroup(group_id, ladder, cp_total, as_fraction(q), pool, reserve_account, inflationary)


def uniform_burn_reward(ledger: Ledger, group: NftGroup) -> TokenAmount:
    """Equal share ``(1 - q) * cp / x`` of the initial reserve for each of ``x`` NFTs."""
    x = ledger.nft_circulating(group.group_id)
    if x == 0:
        raise RewardsError(f"no circulating NFTs in group {group.group_id!r}")
    return TokenAmount.from_fraction((1 - group.q) * group.cp_total.to_fraction() / x)


def rarity_burn_reward(
    ladder: RarityLadder, target_rarity: int, inflation: "InflationState | RatioLike"
) -> TokenAmount:
    """Reward ``p_i * I * cp_{i+1}`` for failing the upgrade into ``target_rarity``."""
    if not 1 <= target_rarity <= ladder.max_rarity:
        raise RarityOutOfRangeError(f"no upgrade into level {target_rarity}")
    factor = as_fraction(getattr(inflation, "factor", inflation))
    alpha = ladder.levels[target_rarity - 1].p * factor
    return TokenAmount.from_fraction(alpha * value_exact(ladder, target_rarity))


def pay_burn_reward(
    ledger: Ledger, group: NftGroup, nft_id: int, claimant: AccountId, reward: TokenAmount
) -> None:
    """Burn ``nft_id`` and pay ``reward`` from the reserve, or do neither."""
    ledger.check_burnable(nft_id, claimant)
    if group.reserve_balance(ledger) < reward:
        raise ReserveInsufficientError(
            f"reserve of {group.group_id!r} holds {group.reserve_balance(ledger)}, reward is {reward}"
        )
    ledger.burn_nft(nft_id, claimant)
    ledger.transfer_tokens(group.cp_token, group.reserve_account, claimant, reward)


def purchase_nft(ledger: Ledger, group: NftGroup, buyer: AccountId, rarity: int = 0) -> int:
    """Buy a fresh NFT at ``rarity`` for its ladder value; proceeds refill the reserve."""
    price = value_at(group.ladder, rarity)
    if ledger.balance(group.cp_token, buyer) < price:
        raise InsufficientBalanceError(f"{buyer} cannot pay {price} {group.cp_token}")
    ledger.transfer_tokens(group.cp_token, buyer, group.reserve_account, price)
    return ledger.mint_nft(group.group_id, buyer, rarity)


def fiat_value(cp_amount: TokenAmount, pool: AmmPool, gov_price: RatioLike) -> Fraction:
    """Fiat value of CP at the pool's spot ratio and an external governance price."""
    return cp_amount.to_fraction() * spot_ratio(pool) * as_fraction(gov_price)


def update_inflation_factor(pool: AmmPool, state: InflationState, step: int) -> InflationState:
    """Reset ``I`` to ``clamp(spot / ideal)`` once the update period has elapsed."""
    if not state.is_due(step):
        raise UpdateNotDueError(
            f"next update at step {state.last_update_step + state.update_period}, got {step}"
        )
    lo, hi = state.clamp
    raw = spot_ratio(pool) / pool.ideal_ratio
    return replace(state, factor=min(max(raw, lo), hi), last_update_step=step)


def size_reward_reserve(
    ladder: RarityLadder, count: int, inflation: "InflationState | RatioLike" = 1
) -> TokenAmount:
    """CP to hold back so the expected burns of ``count`` NFTs are covered.

    Sums expected burns at each level times the largest reward an
    inflation-safe ladder could pay there (value factors at their ceiling).
    """
    if count < 0:
        raise ValueError("count must be non-negative")
    factor = as_fraction(getattr(inflation, "factor", inflation))
    total = Fraction(0)
    value = ladder.cp0.to_fraction()
    for i, lvl in enumerate(ladder.levels, start=1):
        if lvl.p == 0:
            # Failing into this level pays nothing and nothing gets past it.
            break
        value *= max_rarity_factor(lvl.p, factor)
        total += count * failure_pmf(ladder, i) * lvl.p * factor * value
    return TokenAmount(ceil_div(total.numerator * 10**18, total.denominator))


REWARD_EVENT_COLUMNS = ("step", "group", "event", "amount", "I", "reserve_balance")


def write_reward_events(path, events: Sequence[RewardEvent]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(REWARD_EVENT_COLUMNS)
        for e in events:
            writer.writerow(
                [e.step, e.group, e.event, e.amount, format_fraction(e.inflation), e.reserve_balance]
            )
