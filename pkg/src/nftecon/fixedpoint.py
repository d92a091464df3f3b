"""Unsigned 18-digit fixed-point token amounts and exact ratio helpers.

Every balance, reserve and reward in the engine is a :class:`TokenAmount`,
an integer count of 10**-18 token units.  Ratios (prices, probabilities,
inflation factors) are :class:`fractions.Fraction` so that analytic checks
are exact; conversion back to amounts always names its rounding direction.
"""

from __future__ import annotations

import contextlib
from dataclasses import dataclass
from decimal import Decimal, InvalidOperation
from fractions import Fraction
from numbers import Rational
from typing import Union

DECIMALS = 18
SCALE = 10**DECIMALS
MAX_UNITS = 2**256 - 1

RatioLike = Union[Fraction, int, float, str, Decimal]


def ceil_div(a: int, b: int) -> int:
    return -(-a // b)


def as_fraction(value: RatioLike) -> Fraction:
    """Exact rational from a user-facing number.

    Floats go through their shortest repr, so ``0.1`` becomes ``1/10``
    rather than the nearest binary fraction.
    """
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise TypeError("bool is not a ratio")
    if isinstance(value, (int, Rational)):
        return Fraction(value)
    if isinstance(value, float):
        return Fraction(repr(value))
    if isinstance(value, Decimal):
        return Fraction(value)
    if isinstance(value, str):
        try:
            return Fraction(value.strip())
        except ValueError as exc:
            raise ValueError(f"not a number: {value!r}") from exc
    raise TypeError(f"cannot interpret {type(value).__name__} as a ratio")


def format_fraction(value: Fraction, digits: int = DECIMALS) -> str:
    """Decimal string truncated toward zero at ``digits`` places."""
    value = Fraction(value)
    sign = "-" if value < 0 else ""
    scaled = abs(value.numerator) * 10**digits // value.denominator
    whole, frac = divmod(scaled, 10**digits)
    if digits == 0:
        return f"{sign}{whole}"
    return f"{sign}{whole}.{frac:0{digits}d}"


@dataclass(frozen=True, order=True)
class TokenAmount:
    """Non-negative amount with 18 fractional digits, stored as integer units."""

    units: int

    def __post_init__(self) -> None:
        if not isinstance(self.units, int) or isinstance(self.units, bool):
            raise TypeError("units must be an int")
        if self.units < 0:
            raise ValueError(f"token amount cannot be negative ({self.units} units)")
        if self.units > MAX_UNITS:
            raise OverflowError("token amount exceeds 256-bit range")

    @classmethod
    def of(cls, value: "TokenAmount | RatioLike") -> "TokenAmount":
        """Exact conversion; raises if ``value`` needs more than 18 digits."""
        if isinstance(value, TokenAmount):
            return value
        if isinstance(value, Decimal):
            try:
                frac = Fraction(value)
            except (InvalidOperation, ValueError) as exc:
                raise ValueError(f"not a finite amount: {value!r}") from exc
        else:
            frac = as_fraction(value)
        scaled = frac * SCALE
        if scaled.denominator != 1:
            raise ValueError(f"{value!r} is not representable with {DECIMALS} decimals")
        return cls(int(scaled))

    @classmethod
    def from_fraction(cls, value: Fraction, rounding: str = "down") -> "TokenAmount":
        scaled = Fraction(value) * SCALE
        if rounding == "down":
            return cls(scaled.numerator // scaled.denominator)
        if rounding == "up":
            return cls(ceil_div(scaled.numerator, scaled.denominator))
        raise ValueError(f"unknown rounding mode {rounding!r}")

    @classmethod
    def zero(cls) -> "TokenAmount":
        return cls(0)

    def __add__(self, other: "TokenAmount") -> "TokenAmount":
        if not isinstance(other, TokenAmount):
            return NotImplemented
        return TokenAmount(self.units + other.units)

    def __sub__(self, other: "TokenAmount") -> "TokenAmount":
        if not isinstance(other, TokenAmount):
            return NotImplemented
        if other.units > self.units:
            raise ValueError(f"subtraction underflow: {self} - {other}")
        return TokenAmount(self.units - other.units)

    def mul(self, ratio: RatioLike, rounding: str = "down") -> "TokenAmount":
        return TokenAmount.from_fraction(self.to_fraction() * as_fraction(ratio), rounding)

    def __bool__(self) -> bool:
        return self.units != 0

    def to_fraction(self) -> Fraction:
        return Fraction(self.units, SCALE)

    def to_decimal(self) -> Decimal:
        return Decimal(self.units).scaleb(-DECIMALS)

    def __float__(self) -> float:
        return self.units / SCALE

    def __str__(self) -> str:
        whole, frac = divmod(self.units, SCALE)
        return f"{whole}.{frac:0{DECIMALS}d}"

    def __repr__(self) -> str:
        return f"TokenAmount('{self}')"


def amount(value: "TokenAmount | RatioLike") -> TokenAmount:
    """Shorthand for :meth:`TokenAmount.of`."""
    return TokenAmount.of(value)


@contextlib.contextmanager
def open_text(target):
    """Yield a writable text stream for a path, or pass an open stream through."""
    if hasattr(target, "write"):
        yield target
        return
    with open(target, "w", newline="") as fh:
        yield fh
