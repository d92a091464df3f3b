"""Rarity ladder, upgrade dynamics and the analytic valuation layer.

An NFT at level ``i`` upgrades to ``i + 1`` with probability ``p_i``; on
failure it is burned and its holder receives ``alpha * cp_{i+1}`` CP with
``alpha = p_i * I``.  Level values compound, ``cp_k = cp_0 * prod(r_n)``, and
a ladder is *inflation-safe* when no upgrade attempt raises expected value:
``p_i cp_{i+1} + (1 - p_i) p_i I cp_{i+1} <= cp_i`` for every level.

The analytic functions are exact on :class:`~fractions.Fraction` inputs.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from fractions import Fraction
from typing import TYPE_CHECKING, Iterable, Sequence

import numpy as np

from .fixedpoint import RatioLike, TokenAmount, as_fraction, format_fraction, open_text
from .ledger import AccountId, Ledger, RarityOutOfRangeError

if TYPE_CHECKING:
    from .rewards import InflationState, NftGroup


@dataclass(frozen=True)
class RarityLevel:
    p: Fraction
    r: Fraction

    def __post_init__(self) -> None:
        object.__setattr__(self, "p", as_fraction(self.p))
        object.__setattr__(self, "r", as_fraction(self.r))
        if not 0 <= self.p < 1:
            raise ValueError(f"upgrade probability must lie in [0, 1), got {self.p}")
        if self.r <= 0:
            raise ValueError(f"rarity factor must be positive, got {self.r}")


@dataclass(frozen=True)
class RarityLadder:
    """Upgrade probabilities ``p_i`` and value factors ``r_i`` above a base value.

    A ladder with ``n`` levels has rarity states ``0..n``; the top state has
    no successor.
    """

    levels: tuple[RarityLevel, ...]
    cp0: TokenAmount

    def __post_init__(self) -> None:
        object.__setattr__(self, "levels", tuple(self.levels))
        if not self.cp0:
            raise ValueError("base value cp0 must be positive")

    @classmethod
    def build(
        cls, cp0: TokenAmount | RatioLike, ps: Sequence[RatioLike], rs: Sequence[RatioLike]
    ) -> "RarityLadder":
        if len(ps) != len(rs):
            raise ValueError("ps and rs must have the same length")
        return cls(tuple(RarityLevel(p, r) for p, r in zip(ps, rs)), TokenAmount.of(cp0))

    @classmethod
    def at_ceiling(
        cls, cp0: TokenAmount | RatioLike, ps: Sequence[RatioLike], inflation: RatioLike = 1,
        scale: RatioLike = 1,
    ) -> "RarityLadder":
        """Ladder whose factors sit at ``scale`` times the inflation-safe ceiling."""
        scale = as_fraction(scale)
        rs = [scale * max_rarity_factor(as_fraction(p), inflation) for p in ps]
        return cls.build(cp0, ps, rs)

    @property
    def max_rarity(self) -> int:
        return len(self.levels)

    @property
    def ps(self) -> list[Fraction]:
        return [lvl.p for lvl in self.levels]

    @property
    def rs(self) -> list[Fraction]:
        return [lvl.r for lvl in self.levels]


def _factor(inflation: "InflationState | RatioLike") -> Fraction:
    factor = getattr(inflation, "factor", inflation)
    return as_fraction(factor)


def value_exact(ladder: RarityLadder, k: int) -> Fraction:
    if not 0 <= k <= ladder.max_rarity:
        raise RarityOutOfRangeError(f"rarity {k} outside 0..{ladder.max_rarity}")
    value = ladder.cp0.to_fraction()
    for lvl in ladder.levels[:k]:
        value *= lvl.r
    return value


def value_at(ladder: RarityLadder, k: int) -> TokenAmount:
    """CP value of an NFT at rarity ``k``, rounded down to token precision."""
    return TokenAmount.from_fraction(value_exact(ladder, k))


def max_rarity_factor(p, inflation=1):
    """Largest value factor keeping an upgrade from ``p`` inflation-safe.

    Works on Fractions (exact), floats or numpy arrays.
    """
    inflation = getattr(inflation, "factor", inflation)
    if isinstance(p, np.ndarray):
        if np.any((p <= 0) | (p >= 1)):
            raise ValueError("p must lie strictly inside (0, 1)")
        return 1.0 / (p + inflation * (1 - p) * p)
    if isinstance(p, float) or isinstance(inflation, float):
        p_f, i_f = float(p), float(inflation)
        if not 0 < p_f < 1:
            raise ValueError(f"p must lie strictly inside (0, 1), got {p}")
        if i_f <= 0:
            raise ValueError("inflation factor must be positive")
        return 1.0 / (p_f + i_f * (1 - p_f) * p_f)
    p, inflation = as_fraction(p), as_fraction(inflation)
    if not 0 < p < 1:
        raise ValueError(f"p must lie strictly inside (0, 1), got {p}")
    if inflation <= 0:
        raise ValueError("inflation factor must be positive")
    return 1 / (p + inflation * (1 - p) * p)


def expected_next_value(
    ladder: RarityLadder, i: int, inflation: "InflationState | RatioLike" = 1
) -> Fraction:
    """Expected CP value after one upgrade attempt from level ``i``."""
    if not 0 <= i < ladder.max_rarity:
        raise RarityOutOfRangeError(f"level {i} has no successor in a {ladder.max_rarity}-level ladder")
    p = ladder.levels[i].p
    nxt = value_exact(ladder, i + 1)
    return p * nxt + (1 - p) * (p * _factor(inflation)) * nxt


@dataclass(frozen=True)
class LevelCheck:
    level: int
    p: Fraction
    r: Fraction
    ceiling: Fraction | None
    current_value: Fraction
    expected_next: Fraction

    @property
    def passes(self) -> bool:
        return self.expected_next <= self.current_value


@dataclass(frozen=True)
class InflationReport:
    inflation: Fraction
    levels: tuple[LevelCheck, ...]

    @property
    def safe(self) -> bool:
        return all(c.passes for c in self.levels)

    @property
    def failing(self) -> list[int]:
        return [c.level for c in self.levels if not c.passes]


def check_inflation_condition(
    ladder: RarityLadder, inflation: "InflationState | RatioLike" = 1
) -> InflationReport:
    """Per-level check that an upgrade attempt never raises expected value."""
    factor = _factor(inflation)
    checks = []
    for i, lvl in enumerate(ladder.levels):
        ceiling = max_rarity_factor(lvl.p, factor) if lvl.p > 0 and factor > 0 else None
        checks.append(
            LevelCheck(
                level=i,
                p=lvl.p,
                r=lvl.r,
                ceiling=ceiling,
                current_value=value_exact(ladder, i),
                expected_next=expected_next_value(ladder, i, factor),
            )
        )
    return InflationReport(factor, tuple(checks))


def failure_pmf(ps: RarityLadder | Sequence[RatioLike], i: int) -> Fraction:
    """Probability that an NFT starting at level 0 is burned attempting level ``i``.

    ``X(1) = 1 - p_0`` and ``X(i) = (1 - p_{i-1}) * p_0 * ... * p_{i-2}``.
    """
    if isinstance(ps, RarityLadder):
        ps = ps.ps
    ps = [as_fraction(p) for p in ps]
    if i < 1:
        raise ValueError("failure index starts at 1")
    if i > len(ps):
        raise RarityOutOfRangeError(f"no upgrade into level {i} on a {len(ps)}-level ladder")
    prob = 1 - ps[i - 1]
    for p in ps[: i - 1]:
        prob *= p
    return prob


def failure_pmf_table(ps: RarityLadder | Sequence[RatioLike]) -> list[Fraction]:
    n = ps.max_rarity if isinstance(ps, RarityLadder) else len(ps)
    return [failure_pmf(ps, i) for i in range(1, n + 1)]


def expected_burns(ladder: RarityLadder, count: int) -> list[Fraction]:
    """Expected number of burns at each attempted level for ``count`` fresh NFTs."""
    return [count * x for x in failure_pmf_table(ladder)]


# -- stochastic dynamics ---------------------------------------------------


@dataclass(frozen=True)
class UpgradeOutcome:
    success: bool
    draw: float
    from_rarity: int
    new_rarity: int | None = None
    reward: TokenAmount | None = None


def attempt_upgrade(
    ledger: Ledger,
    group: "NftGroup",
    nft_id: int,
    caller: AccountId,
    inflation: "InflationState | RatioLike",
    rng,
) -> UpgradeOutcome:
    """One upgrade attempt; on failure the NFT is burned for a CP reward.

    ``rng`` is anything with a ``random()`` method returning a float in
    [0, 1).  The draw is taken only after preconditions pass.  If the reward
    cannot be paid the whole attempt aborts and nothing changes.
    """
    from .rewards import pay_burn_reward, rarity_burn_reward

    record = ledger.check_burnable(nft_id, caller)
    if record.group != group.group_id:
        raise ValueError(f"nft {nft_id} belongs to group {record.group!r}")
    i = record.rarity_index
    if i >= group.ladder.max_rarity:
        raise RarityOutOfRangeError(f"nft {nft_id} is at the top of its ladder")
    draw = float(rng.random())
    if draw < group.ladder.levels[i].p:
        new = ledger.upgrade_nft(nft_id, caller)
        return UpgradeOutcome(True, draw, i, new_rarity=new)
    reward = rarity_burn_reward(group.ladder, i + 1, inflation)
    pay_burn_reward(ledger, group, nft_id, caller, reward)
    return UpgradeOutcome(False, draw, i, reward=reward)


def simulate_single_attempts(
    ladder: RarityLadder,
    level: int,
    n: int,
    seed: int,
    inflation: RatioLike = 1,
) -> np.ndarray:
    """Value change of ``n`` independent attempts from ``level`` (float64).

    Success gains ``cp_{i+1} - cp_i``; failure trades the NFT for the burn
    reward, a change of ``p_i I cp_{i+1} - cp_i``.
    """
    p = ladder.levels[level].p
    cur = float(value_exact(ladder, level))
    nxt = float(value_exact(ladder, level + 1))
    reward = float(p * as_fraction(inflation)) * nxt
    rng = np.random.Generator(np.random.PCG64(seed))
    success = rng.random(n) < float(p)
    return np.where(success, nxt - cur, reward - cur)


def simulate_trajectories(ps: Sequence[RatioLike], n: int, seed: int) -> np.ndarray:
    """Run ``n`` NFTs from level 0 until they burn or top out.

    Returns counts of length ``len(ps) + 1``: entry ``i - 1`` for burns while
    attempting level ``i``, the last entry for NFTs that reached the top.
    """
    probs = np.array([float(as_fraction(p)) for p in ps])
    rng = np.random.Generator(np.random.PCG64(seed))
    counts = np.zeros(len(probs) + 1, dtype=np.int64)
    alive = n
    for i, p in enumerate(probs):
        upgraded = int((rng.random(alive) < p).sum())
        counts[i] = alive - upgraded
        alive = upgraded
    counts[-1] = alive
    return counts


def fig4_rows(
    p_grid: Iterable[RatioLike], inflations: Iterable[RatioLike] = ("1/2", 1, 2)
) -> list[tuple[Fraction, Fraction, Fraction]]:
    """(p, I, max factor) for every grid point, grouped by I."""
    ps = [as_fraction(p) for p in p_grid]
    if not ps:
        raise ValueError("empty p grid")
    infl = [as_fraction(i) for i in inflations]
    if not infl:
        raise ValueError("empty inflation set")
    return [(p, i, max_rarity_factor(p, i)) for i in infl for p in ps]


def write_fig4_csv(target, rows: Sequence[tuple[Fraction, Fraction, Fraction]]) -> None:
    with open_text(target) as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["p", "I", "max_r"])
        for p, i, r in rows:
            writer.writerow([format_fraction(p), format_fraction(i), format_fraction(r)])
