"""Discrete-time scenario engine.

Each step runs, in order: the DAO (inflation-factor updates and scheduled
group launches), every upgrader, every trader, then every arbitrageur, each
set in roster order.  One step stands for one hour, so the default update
period of 24 steps is a daily schedule.

Randomness: every agent gets a fresh ``numpy`` PCG64 generator per step,
seeded by ``SeedSequence(seed, spawn_key=(agent_key, step))`` where
``agent_key`` is the first 8 bytes of ``sha256(agent_id)``.  Draws therefore
depend only on (seed, agent id, step); adding or reordering agents does not
perturb anyone else's stream.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

import numpy as np

from ..amm import Side, execute_swap, spot_ratio, trade_to_ratio
from ..fixedpoint import SCALE, TokenAmount
from ..ledger import AccountId, Ledger
from ..rarity import attempt_upgrade, check_inflation_condition, expected_next_value, value_at, value_exact
from ..rewards import (
    InflationState,
    NftGroup,
    ReserveInsufficientError,
    RewardEvent,
    launch_group,
    purchase_nft,
    update_inflation_factor,
)
from .report import SimulationReport, StepRecord, summarize
from .scenario import AgentConfig, GroupConfig, Scenario, validate_scenario

GOV = "GOV"
EXTERNAL_MARKET = AccountId.from_label("external-market")


def agent_key(agent_id: str) -> int:
    return int.from_bytes(hashlib.sha256(agent_id.encode()).digest()[:8], "big")


def rng_for(seed: int, key: int, step: int) -> np.random.Generator:
    seq = np.random.SeedSequence(seed, spawn_key=(key, step))
    return np.random.Generator(np.random.PCG64(seq))


@dataclass
class AgentState:
    config: AgentConfig
    account: AccountId
    key: int
    fiat: Fraction | None = None  # None: unlimited budget
    profit: Fraction = Fraction(0)


@dataclass
class GroupState:
    config: GroupConfig
    group: NftGroup
    inflation: InflationState
    burns_by_level: list[int]
    launched_at: int
    initial_nfts: int = 0
    arb_profit: Fraction = Fraction(0)
    blocked_attempts: int = 0


@dataclass
class SimulationState:
    scenario: Scenario
    ledger: Ledger = field(default_factory=Ledger)
    groups: dict[str, GroupState] = field(default_factory=dict)
    agents: list[AgentState] = field(default_factory=list)
    events: list[RewardEvent] = field(default_factory=list)
    step: int = 0
    on_swap: Callable | None = None

    def system_accounts(self, g: GroupState) -> set[AccountId]:
        return {g.group.pool.account, g.group.reserve_account, EXTERNAL_MARKET}

    def swap(self, g: GroupState, trader: AccountId, side: Side, amount_in: TokenAmount) -> TokenAmount:
        pool = g.group.pool
        before = (pool.cp_reserve, pool.gov_reserve)
        out = execute_swap(pool, self.ledger, trader, side, amount_in)
        if self.on_swap is not None:
            self.on_swap(g.group.group_id, side, amount_in, before, (pool.cp_reserve, pool.gov_reserve))
        return out


def _event(state: SimulationState, g: GroupState, kind: str, amount: TokenAmount) -> None:
    state.events.append(
        RewardEvent(
            state.step,
            g.group.group_id,
            kind,
            amount,
            g.inflation.factor,
            g.group.reserve_balance(state.ledger),
        )
    )


def _launch(state: SimulationState, cfg: GroupConfig, step: int) -> None:
    sc = state.scenario
    ledger = state.ledger
    group = launch_group(
        ledger,
        cfg.id,
        cfg.ladder,
        cfg.cp_total,
        cfg.q,
        cfg.gov_liquidity,
        ideal_ratio=cfg.ideal_ratio,
        fee_rate=cfg.fee_rate,
        gov_token=GOV,
        inflationary=cfg.inflationary,
    )
    inflation = InflationState(
        factor=sc.inflation.initial,
        update_period=sc.inflation.period,
        clamp=sc.inflation.clamp,
        last_update_step=step,
    )
    g = GroupState(cfg, group, inflation, [0] * cfg.ladder.max_rarity, launched_at=step)
    state.groups[cfg.id] = g
    members = [a for a in state.agents if a.config.group == cfg.id]
    for a in members:
        if a.config.cp:
            ledger.mint_tokens(group.cp_token, a.account, a.config.cp)
    holders = [a.account for a in members if a.config.kind == "upgrader"]
    if not holders:
        holders = [AccountId.from_label(f"holders:{cfg.id}")]
    for n in range(cfg.initial_mint):
        ledger.mint_nft(cfg.id, holders[n % len(holders)], 0)
    g.initial_nfts = cfg.initial_mint


def initialize(scenario: Scenario) -> SimulationState:
    validate_scenario(scenario)
    state = SimulationState(scenario)
    state.ledger.register_token(GOV)
    for cfg in scenario.agents:
        account = AccountId.from_label(f"agent:{cfg.id}")
        state.agents.append(AgentState(cfg, account, agent_key(cfg.id), fiat=cfg.fiat_budget))
        if cfg.gov:
            state.ledger.mint_tokens(GOV, account, cfg.gov)
    for cfg in scenario.groups:
        if cfg.launch_step == 0:
            _launch(state, cfg, 0)
    return state


# -- agents ---------------------------------------------------------------------


def dao_agent_step(state: SimulationState, step: int) -> list[str]:
    """Scheduled inflation-factor updates, then scheduled group launches."""
    done = []
    for gid, g in state.groups.items():
        if g.inflation.is_due(step):
            g.inflation = update_inflation_factor(g.group.pool, g.inflation, step)
            _event(state, g, "I_update", TokenAmount(0))
            done.append(f"I_update:{gid}")
    for cfg in state.scenario.groups:
        if cfg.launch_step == step and step > 0 and cfg.id not in state.groups:
            _launch(state, cfg, step)
            done.append(f"launch:{cfg.id}")
    return done


def upgrader_agent_step(state: SimulationState, agent: AgentState, rng) -> list[str]:
    g = state.groups.get(agent.config.group)
    if g is None:
        return []
    ledger = state.ledger
    ladder = g.group.ladder
    policy = agent.config.policy
    factor = g.inflation.factor
    safe = check_inflation_condition(ladder, factor).safe if policy == "expected_value" else True
    done = []
    for record in ledger.nfts_of(agent.account, g.group.group_id):
        i = record.rarity_index
        if i >= ladder.max_rarity:
            continue
        if policy == "expected_value":
            if not safe:
                continue
            expected = expected_next_value(ladder, i, factor)
            if expected < agent.config.threshold * value_exact(ladder, i):
                continue
        try:
            outcome = attempt_upgrade(ledger, g.group, record.nft_id, agent.account, g.inflation, rng)
        except ReserveInsufficientError:
            g.blocked_attempts += 1
            done.append(f"blocked:{record.nft_id}")
            continue
        if outcome.success:
            done.append(f"upgrade:{record.nft_id}")
        else:
            g.burns_by_level[i] += 1
            _event(state, g, "burn", outcome.reward)
            done.append(f"burn:{record.nft_id}")
    if agent.config.repurchase:
        price = value_at(ladder, 0)
        if ledger.balance(g.group.cp_token, agent.account) >= price:
            nft_id = purchase_nft(ledger, g.group, agent.account, 0)
            _event(state, g, "purchase", price)
            done.append(f"purchase:{nft_id}")
    return done


def trader_agent_step(state: SimulationState, agent: AgentState, rng) -> list[str]:
    """Noise trader: random-direction swap of a random share of holdings."""
    g = state.groups.get(agent.config.group)
    if g is None:
        return []
    act, direction, size = rng.random(3)
    if act >= agent.config.activity:
        return []
    side = Side.CP_TO_GOV if direction < 0.5 else Side.GOV_TO_CP
    token_in = g.group.cp_token if side is Side.CP_TO_GOV else GOV
    have = state.ledger.balance(token_in, agent.account)
    amount_in = TokenAmount(int(have.units * Fraction(float(size)) * agent.config.max_fraction))
    if not amount_in:
        return []
    state.swap(g, agent.account, side, amount_in)
    return [f"swap:{side.value}"]


def arbitrageur_agent_step(state: SimulationState, agent: AgentState) -> list[str]:
    """Trade the pool back to its ideal ratio against the external market.

    CP is valued at its peg (ideal ratio times the external governance
    price), so profit is the fiat value received minus the fiat value paid.
    With a fee the trade stops where the post-fee marginal price meets the
    peg.
    """
    g = state.groups.get(agent.config.group)
    if g is None:
        return []
    ledger = state.ledger
    pool = g.group.pool
    ideal = pool.ideal_ratio
    keep = 1 - pool.fee_rate
    spot = spot_ratio(pool)
    if spot < ideal * keep:
        target = ideal * keep
    elif spot > ideal / keep:
        target = ideal / keep
    else:
        return []
    trade = trade_to_ratio(pool, target)
    if trade is None:
        return []
    side, amount_in = trade
    price = state.scenario.gov_price_at(state.step)
    if side is Side.GOV_TO_CP:
        have = ledger.balance(GOV, agent.account)
        if agent.fiat is not None:
            affordable = TokenAmount(int(agent.fiat / price * SCALE))
            amount_in = min(amount_in, have + affordable)
        if not amount_in:
            return []
        if amount_in > have:
            need = amount_in - have
            ledger.mint_tokens(GOV, EXTERNAL_MARKET, need)
            ledger.transfer_tokens(GOV, EXTERNAL_MARKET, agent.account, need)
            if agent.fiat is not None:
                agent.fiat -= need.to_fraction() * price
        out = state.swap(g, agent.account, side, amount_in)
        profit = (out.to_fraction() * ideal - amount_in.to_fraction()) * price
    else:
        amount_in = min(amount_in, ledger.balance(g.group.cp_token, agent.account))
        if not amount_in:
            return []
        out = state.swap(g, agent.account, side, amount_in)
        ledger.transfer_tokens(GOV, agent.account, EXTERNAL_MARKET, out)
        if agent.fiat is not None:
            agent.fiat += out.to_fraction() * price
        profit = (out.to_fraction() - amount_in.to_fraction() * ideal) * price
    agent.profit += profit
    g.arb_profit += profit
    return [f"arb:{side.value}"]


# -- recording --------------------------------------------------------------------


def _record(state: SimulationState, g: GroupState) -> StepRecord:
    ledger = state.ledger
    group = g.group
    pool = group.pool
    system = state.system_accounts(g)
    user_cp = sum(
        (amt.units for acct, amt in ledger.holders(group.cp_token) if acct not in system and not acct.is_zero),
        0,
    )
    circulating = tuple(ledger.nft_circulating(group.group_id, i) for i in range(group.ladder.max_rarity + 1))
    nft_value = sum(
        (n * value_exact(group.ladder, i) for i, n in enumerate(circulating)), Fraction(0)
    )
    return StepRecord(
        step=state.step,
        group=group.group_id,
        cp_reserve=pool.cp_reserve,
        gov_reserve=pool.gov_reserve,
        spot_ratio=spot_ratio(pool),
        k=pool.k,
        inflation=g.inflation.factor,
        reserve_balance=group.reserve_balance(ledger),
        circulating=circulating,
        user_cp=TokenAmount(user_cp),
        cumulative_burns=ledger.nft_burned(group.group_id),
        arb_profit=g.arb_profit,
        system_value=nft_value + Fraction(user_cp, SCALE),
    )


def run_scenario(
    scenario: Scenario,
    on_step: Callable[[SimulationState], None] | None = None,
    on_swap: Callable | None = None,
) -> SimulationReport:
    """Run a scenario to completion; the report is a pure function of the scenario."""
    state = initialize(scenario)
    state.on_swap = on_swap
    records = [_record(state, g) for g in state.groups.values()]
    if on_step is not None:
        on_step(state)
    upgraders = [a for a in state.agents if a.config.kind == "upgrader"]
    traders = [a for a in state.agents if a.config.kind == "trader"]
    arbs = [a for a in state.agents if a.config.kind == "arbitrageur"]
    for step in range(1, scenario.steps + 1):
        state.step = step
        dao_agent_step(state, step)
        for a in upgraders:
            upgrader_agent_step(state, a, rng_for(scenario.seed, a.key, step))
        for a in traders:
            trader_agent_step(state, a, rng_for(scenario.seed, a.key, step))
        for a in arbs:
            arbitrageur_agent_step(state, a)
        records.extend(_record(state, g) for g in state.groups.values())
        if on_step is not None:
            on_step(state)
    return SimulationReport(
        seed=scenario.seed,
        steps=scenario.steps,
        records=records,
        events=list(state.events),
        summary=summarize(state, records),
    )
