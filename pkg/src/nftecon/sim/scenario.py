"""Scenario documents: schema, loading, validation and dotted-path overrides.

A scenario is a JSON or YAML mapping::

    seed: 42                      # required
    steps: 240                    # required, >= 0
    external_gov_price: 10        # or [{step: 0, price: 10}, {step: 100, price: 12}]
    inflation: {T: 24, clamp: [0.25, 4], initial: 1}
    groups:
      - id: A                     # required
        cp_total: 10000           # required
        q: 0.5                    # required, 0 < q < 1
        gov_liquidity: 5000       # required
        ideal_ratio: 1            # governance per CP
        fee_rate: 0
        cp0: 10                   # required, base NFT value in CP
        ladder:                   # required; r may be replaced by r_ceiling_scale
          - {p: 0.5, r: 1.2}
          - {p: 0.5, r_ceiling_scale: 0.9}
        initial_mint: 100
        inflationary: false
        launch_step: 0            # > 0: launched by the DAO at that step
    agents:
      - {id: u1, kind: upgrader, group: A, policy: always, threshold: 1,
         repurchase: false, cp: 0}
      - {id: t1, kind: trader, group: A, activity: 0.5, max_fraction: 0.1,
         gov: 100, cp: 100}
      - {id: arb, kind: arbitrageur, group: A, fiat_budget: null, cp: 1000}

``r_ceiling_scale`` puts the factor at that multiple of the inflation-safe
ceiling for ``I = 1``.  ``fiat_budget: null`` means unlimited.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any

import yaml

from ..fixedpoint import TokenAmount, as_fraction
from ..rarity import RarityLadder, RarityLevel, check_inflation_condition, max_rarity_factor

AGENT_KINDS = ("upgrader", "trader", "arbitrageur")
POLICIES = ("always", "expected_value")


class ScenarioError(Exception):
    """Malformed scenario; ``field`` names the offending path when known."""

    def __init__(self, message: str, field: str | None = None):
        self.field = field
        super().__init__(f"{field}: {message}" if field else message)


class ValidationError(ScenarioError):
    """Well-formed scenario that violates a mechanism constraint."""


@dataclass(frozen=True)
class GroupConfig:
    id: str
    cp_total: TokenAmount
    q: Fraction
    gov_liquidity: TokenAmount
    ladder: RarityLadder
    ideal_ratio: Fraction = Fraction(1)
    fee_rate: Fraction = Fraction(0)
    initial_mint: int = 0
    inflationary: bool = False
    launch_step: int = 0


@dataclass(frozen=True)
class AgentConfig:
    id: str
    kind: str
    group: str
    policy: str = "always"
    threshold: Fraction = Fraction(1)
    repurchase: bool = False
    activity: Fraction = Fraction(1, 2)
    max_fraction: Fraction = Fraction(1, 10)
    fiat_budget: Fraction | None = None
    cp: TokenAmount = TokenAmount(0)
    gov: TokenAmount = TokenAmount(0)


@dataclass(frozen=True)
class InflationConfig:
    period: int = 24
    clamp: tuple[Fraction, Fraction] = (Fraction(1, 4), Fraction(4))
    initial: Fraction = Fraction(1)


@dataclass(frozen=True)
class Scenario:
    seed: int
    steps: int
    groups: tuple[GroupConfig, ...]
    agents: tuple[AgentConfig, ...] = ()
    inflation: InflationConfig = field(default_factory=InflationConfig)
    gov_price: tuple[tuple[int, Fraction], ...] = ((0, Fraction(1)),)

    def gov_price_at(self, step: int) -> Fraction:
        price = self.gov_price[0][1]
        for start, value in self.gov_price:
            if start <= step:
                price = value
        return price

    def group(self, group_id: str) -> GroupConfig:
        for g in self.groups:
            if g.id == group_id:
                return g
        raise KeyError(group_id)


# -- parsing helpers ---------------------------------------------------------


def _get(data: dict, key: str, path: str, default: Any = ..., ) -> Any:
    if key in data and data[key] is not None:
        return data[key]
    if default is ...:
        raise ScenarioError("missing required field", f"{path}.{key}" if path else key)
    return default


def _ratio(value: Any, where: str) -> Fraction:
    try:
        return as_fraction(value)
    except (TypeError, ValueError, ZeroDivisionError) as exc:
        raise ScenarioError(f"expected a number, got {value!r}", where) from exc


def _amount(value: Any, where: str) -> TokenAmount:
    try:
        return TokenAmount.of(value)
    except (TypeError, ValueError, OverflowError) as exc:
        raise ScenarioError(f"expected a non-negative amount, got {value!r}", where) from exc


def _int(value: Any, where: str, minimum: int | None = 0) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ScenarioError(f"expected an integer, got {value!r}", where)
    if minimum is not None and value < minimum:
        raise ScenarioError(f"must be >= {minimum}", where)
    return value


def _bool(value: Any, where: str) -> bool:
    if not isinstance(value, bool):
        raise ScenarioError(f"expected true/false, got {value!r}", where)
    return value


def _parse_ladder(items: Any, cp0: TokenAmount, where: str) -> RarityLadder:
    if not isinstance(items, list) or not items:
        raise ScenarioError("expected a non-empty list of levels", where)
    levels = []
    for i, item in enumerate(items):
        at = f"{where}[{i}]"
        if not isinstance(item, dict):
            raise ScenarioError("expected a mapping with p and r", at)
        p = _ratio(_get(item, "p", at), f"{at}.p")
        if "r_ceiling_scale" in item:
            if not 0 < p < 1:
                raise ScenarioError("r_ceiling_scale needs 0 < p < 1", f"{at}.p")
            r = _ratio(item["r_ceiling_scale"], f"{at}.r_ceiling_scale") * max_rarity_factor(p, 1)
        else:
            r = _ratio(_get(item, "r", at), f"{at}.r")
        try:
            levels.append(RarityLevel(p, r))
        except ValueError as exc:
            raise ScenarioError(str(exc), at) from exc
    return RarityLadder(tuple(levels), cp0)


def _parse_group(data: Any, where: str) -> GroupConfig:
    if not isinstance(data, dict):
        raise ScenarioError("expected a mapping", where)
    cp0 = _amount(_get(data, "cp0", where), f"{where}.cp0")
    if not cp0:
        raise ScenarioError("must be positive", f"{where}.cp0")
    q = _ratio(_get(data, "q", where), f"{where}.q")
    if not 0 < q < 1:
        raise ScenarioError("must lie strictly between 0 and 1", f"{where}.q")
    cp_total = _amount(_get(data, "cp_total", where), f"{where}.cp_total")
    gov = _amount(_get(data, "gov_liquidity", where), f"{where}.gov_liquidity")
    if not cp_total:
        raise ScenarioError("must be positive", f"{where}.cp_total")
    if not gov:
        raise ScenarioError("must be positive", f"{where}.gov_liquidity")
    fee = _ratio(_get(data, "fee_rate", where, 0), f"{where}.fee_rate")
    if not 0 <= fee < 1:
        raise ScenarioError("must lie in [0, 1)", f"{where}.fee_rate")
    ideal = _ratio(_get(data, "ideal_ratio", where, 1), f"{where}.ideal_ratio")
    if ideal <= 0:
        raise ScenarioError("must be positive", f"{where}.ideal_ratio")
    return GroupConfig(
        id=str(_get(data, "id", where)),
        cp_total=cp_total,
        q=q,
        gov_liquidity=gov,
        ladder=_parse_ladder(_get(data, "ladder", where), cp0, f"{where}.ladder"),
        ideal_ratio=ideal,
        fee_rate=fee,
        initial_mint=_int(_get(data, "initial_mint", where, 0), f"{where}.initial_mint"),
        inflationary=_bool(_get(data, "inflationary", where, False), f"{where}.inflationary"),
        launch_step=_int(_get(data, "launch_step", where, 0), f"{where}.launch_step"),
    )


def _parse_agent(data: Any, where: str, index: int) -> AgentConfig:
    if not isinstance(data, dict):
        raise ScenarioError("expected a mapping", where)
    kind = _get(data, "kind", where)
    if kind not in AGENT_KINDS:
        raise ScenarioError(f"unknown agent kind {kind!r}; expected one of {AGENT_KINDS}", f"{where}.kind")
    policy = _get(data, "policy", where, "always")
    if policy not in POLICIES:
        raise ScenarioError(f"unknown policy {policy!r}", f"{where}.policy")
    budget = data.get("fiat_budget")
    activity = _ratio(_get(data, "activity", where, "1/2"), f"{where}.activity")
    max_fraction = _ratio(_get(data, "max_fraction", where, "1/10"), f"{where}.max_fraction")
    if not 0 <= activity <= 1:
        raise ScenarioError("must lie in [0, 1]", f"{where}.activity")
    if not 0 <= max_fraction <= 1:
        raise ScenarioError("must lie in [0, 1]", f"{where}.max_fraction")
    fiat = None if budget is None else _ratio(budget, f"{where}.fiat_budget")
    if fiat is not None and fiat < 0:
        raise ScenarioError("must be non-negative", f"{where}.fiat_budget")
    return AgentConfig(
        id=str(_get(data, "id", where, f"agent{index}")),
        kind=kind,
        group=str(_get(data, "group", where)),
        policy=policy,
        threshold=_ratio(_get(data, "threshold", where, 1), f"{where}.threshold"),
        repurchase=_bool(_get(data, "repurchase", where, False), f"{where}.repurchase"),
        activity=activity,
        max_fraction=max_fraction,
        fiat_budget=fiat,
        cp=_amount(_get(data, "cp", where, 0), f"{where}.cp"),
        gov=_amount(_get(data, "gov", where, 0), f"{where}.gov"),
    )


def _parse_price(value: Any) -> tuple[tuple[int, Fraction], ...]:
    where = "external_gov_price"
    if isinstance(value, list):
        if not value:
            raise ScenarioError("empty price series", where)
        series = []
        for i, item in enumerate(value):
            at = f"{where}[{i}]"
            if not isinstance(item, dict):
                raise ScenarioError("expected {step, price}", at)
            series.append(
                (_int(_get(item, "step", at), f"{at}.step"), _ratio(_get(item, "price", at), f"{at}.price"))
            )
        series.sort(key=lambda s: s[0])
    else:
        series = [(0, _ratio(value, where))]
    if any(price <= 0 for _, price in series):
        raise ScenarioError("prices must be positive", where)
    return tuple(series)


def parse_scenario(data: Any) -> Scenario:
    """Build a :class:`Scenario` from a decoded document, naming any bad field."""
    if not isinstance(data, dict):
        raise ScenarioError("scenario must be a mapping at top level")
    known = {"seed", "steps", "external_gov_price", "inflation", "groups", "agents"}
    for key in data:
        if key not in known:
            raise ScenarioError("unknown field", str(key))
    infl = _get(data, "inflation", "", {})
    if not isinstance(infl, dict):
        raise ScenarioError("expected a mapping", "inflation")
    clamp = _get(infl, "clamp", "inflation", ["1/4", 4])
    if not isinstance(clamp, list) or len(clamp) != 2:
        raise ScenarioError("expected [I_min, I_max]", "inflation.clamp")
    inflation = InflationConfig(
        period=_int(_get(infl, "T", "inflation", 24), "inflation.T", minimum=1),
        clamp=(_ratio(clamp[0], "inflation.clamp[0]"), _ratio(clamp[1], "inflation.clamp[1]")),
        initial=_ratio(_get(infl, "initial", "inflation", 1), "inflation.initial"),
    )
    lo, hi = inflation.clamp
    if not 0 < lo <= hi or not lo <= inflation.initial <= hi:
        raise ScenarioError("need 0 < I_min <= initial <= I_max", "inflation")

    groups_raw = _get(data, "groups", "")
    if not isinstance(groups_raw, list) or not groups_raw:
        raise ScenarioError("expected a non-empty list", "groups")
    groups = tuple(_parse_group(g, f"groups[{i}]") for i, g in enumerate(groups_raw))
    ids = [g.id for g in groups]
    if len(set(ids)) != len(ids):
        raise ScenarioError("duplicate group id", "groups")

    agents_raw = _get(data, "agents", "", [])
    if not isinstance(agents_raw, list):
        raise ScenarioError("expected a list", "agents")
    agents = tuple(_parse_agent(a, f"agents[{i}]", i) for i, a in enumerate(agents_raw))
    agent_ids = [a.id for a in agents]
    if len(set(agent_ids)) != len(agent_ids):
        raise ScenarioError("duplicate agent id", "agents")
    for i, a in enumerate(agents):
        if a.group not in ids:
            raise ScenarioError(f"unknown group {a.group!r}", f"agents[{i}].group")

    return Scenario(
        seed=_int(_get(data, "seed", ""), "seed"),
        steps=_int(_get(data, "steps", ""), "steps"),
        groups=groups,
        agents=agents,
        inflation=inflation,
        gov_price=_parse_price(_get(data, "external_gov_price", "", 1)),
    )


def read_document(path: str | Path) -> Any:
    """Decode a JSON or YAML file, reporting the line of any syntax error."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ScenarioError(f"cannot read {path}: {exc.strerror}") from exc
    if path.suffix.lower() in (".yaml", ".yml"):
        try:
            return yaml.safe_load(text)
        except yaml.YAMLError as exc:
            mark = getattr(exc, "problem_mark", None)
            where = f"line {mark.line + 1}, column {mark.column + 1}" if mark else "unknown position"
            raise ScenarioError(f"YAML syntax error at {where}: {getattr(exc, 'problem', exc)}") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"JSON syntax error at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc


def apply_overrides(data: Any, overrides: list[str]) -> Any:
    """Apply ``dotted.path=value`` overrides in place; values are parsed as YAML scalars."""
    for item in overrides:
        key, sep, raw = item.partition("=")
        if not sep or not key.strip():
            raise ScenarioError(f"malformed override {item!r}; expected key=value")
        parts = key.strip().split(".")
        target = data
        for depth, part in enumerate(parts[:-1]):
            target = _descend(target, part, ".".join(parts[: depth + 1]))
        last = parts[-1]
        try:
            value = yaml.safe_load(raw) if raw.strip() else None
        except yaml.YAMLError as exc:
            raise ScenarioError(f"cannot parse override value {raw!r}", key) from exc
        if isinstance(target, list):
            idx = _index(target, last, key)
            target[idx] = value
        elif isinstance(target, dict):
            target[last] = value
        else:
            raise ScenarioError("override path does not lead to a mapping or list", key)
    return data


def _index(seq: list, part: str, where: str) -> int:
    try:
        idx = int(part)
    except ValueError:
        raise ScenarioError(f"expected a list index, got {part!r}", where) from None
    if not 0 <= idx < len(seq):
        raise ScenarioError(f"index {idx} out of range", where)
    return idx


def _descend(node: Any, part: str, where: str) -> Any:
    if isinstance(node, list):
        return node[_index(node, part, where)]
    if isinstance(node, dict):
        if part not in node or not isinstance(node[part], (dict, list)):
            node[part] = {}
        return node[part]
    raise ScenarioError("override path does not lead to a mapping or list", where)


def load_scenario(path: str | Path, overrides: list[str] | None = None) -> Scenario:
    data = read_document(path)
    if overrides:
        data = apply_overrides(data, list(overrides))
    return parse_scenario(data)


def validate_scenario(scenario: Scenario) -> None:
    """Reject unflagged groups whose ladder is not inflation-safe at ``I = 1``."""
    for i, g in enumerate(scenario.groups):
        report = check_inflation_condition(g.ladder, 1)
        if not report.safe and not g.inflationary:
            raise ValidationError(
                f"ladder levels {report.failing} violate the expected-value condition "
                "(set inflationary: true to allow)",
                f"groups[{i}].ladder",
            )
