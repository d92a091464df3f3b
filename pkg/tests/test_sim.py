import copy
import json
import time
from fractions import Fraction

import numpy as np
import pytest

from nftecon.fixedpoint import amount
from nftecon.rarity import max_rarity_factor
from nftecon.sim import (
    ScenarioError,
    ValidationError,
    aggregate,
    apply_overrides,
    dao_agent_step,
    digest,
    initialize,
    load_scenario,
    monte_carlo,
    parse_scenario,
    rng_for,
    run_scenario,
    upgrader_agent_step,
    write_report,
)
from nftecon.sim.engine import agent_key


def group(gid="A", **kw):
    g = {
        "id": gid,
        "cp_total": 10000,
        "q": 0.5,
        "gov_liquidity": 5000,
        "cp0": 10,
        "ladder": [{"p": 0.5, "r_ceiling_scale": 0.9}],
        "initial_mint": 10,
    }
    g.update(kw)
    return g


def scenario(groups=None, agents=(), **kw):
    doc = {"seed": 1, "steps": 5, "external_gov_price": 10, "groups": groups or [group()],
           "agents": list(agents)}
    doc.update(kw)
    return parse_scenario(doc)


# -- parsing ----------------------------------------------------------------


def test_parse_base(scenario_dict):
    sc = parse_scenario(scenario_dict)
    g = sc.group("A")
    assert g.q == Fraction(1, 2) and g.cp_total == amount(10000)
    assert g.ladder.rs[0] == max_rarity_factor(Fraction(1, 2), 1)
    assert [a.kind for a in sc.agents] == ["upgrader", "trader", "arbitrageur"]
    assert sc.inflation.period == 24


def test_missing_field_is_named(scenario_dict):
    del scenario_dict["groups"][0]["q"]
    with pytest.raises(ScenarioError, match=r"groups\[0\]\.q"):
        parse_scenario(scenario_dict)


@pytest.mark.parametrize(
    "path,value,field",
    [
        ("groups.0.q", 1, "groups[0].q"),
        ("agents.0.kind", "whale", "agents[0].kind"),
        ("steps", -1, "steps"),
        ("agents.1.group", "Z", "agents[1].group"),
        ("groups.0.fee_rate", 1, "groups[0].fee_rate"),
    ],
)
def test_bad_values_are_named(scenario_dict, path, value, field):
    apply_overrides(scenario_dict, [f"{path}={value}"])
    with pytest.raises(ScenarioError) as err:
        parse_scenario(scenario_dict)
    assert err.value.field == field


def test_unknown_top_level_field(scenario_dict):
    scenario_dict["stpes"] = 3
    with pytest.raises(ScenarioError, match="stpes"):
        parse_scenario(scenario_dict)


def test_overrides_apply_yaml_scalars(scenario_dict):
    apply_overrides(scenario_dict, ["groups.0.q=0.4", "seed=9", "inflation.T=12", "agents.2.fiat_budget=null"])
    sc = parse_scenario(scenario_dict)
    assert sc.group("A").q == Fraction(2, 5) and sc.seed == 9 and sc.inflation.period == 12
    with pytest.raises(ScenarioError):
        apply_overrides(scenario_dict, ["groups.5.q=1"])
    with pytest.raises(ScenarioError):
        apply_overrides(scenario_dict, ["novalue"])


def test_yaml_syntax_error_reports_line(tmp_path):
    path = tmp_path / "bad.yaml"
    path.write_text("seed: 1\nsteps: [1, 2\ngroups: []\n")
    with pytest.raises(ScenarioError, match="line"):
        load_scenario(path)


def test_load_yaml_and_json_agree(tmp_path, scenario_dict):
    import yaml

    (tmp_path / "s.json").write_text(json.dumps(scenario_dict))
    (tmp_path / "s.yaml").write_text(yaml.safe_dump(scenario_dict))
    assert load_scenario(tmp_path / "s.json") == load_scenario(tmp_path / "s.yaml")


def test_stepwise_gov_price():
    sc = scenario(external_gov_price=[{"step": 10, "price": 12}, {"step": 0, "price": 10}])
    assert sc.gov_price_at(0) == 10 and sc.gov_price_at(9) == 10 and sc.gov_price_at(10) == 12


def test_unsafe_ladder_needs_flag():
    bad = group(ladder=[{"p": 0.5, "r_ceiling_scale": 1.1}])
    with pytest.raises(ValidationError, match=r"groups\[0\]\.ladder"):
        run_scenario(scenario([bad]))
    run_scenario(scenario([dict(bad, inflationary=True)]))


# -- engine -----------------------------------------------------------------


def test_steps_zero_reports_initial_state():
    rep = run_scenario(scenario(steps=0, agents=[{"id": "u", "kind": "upgrader", "group": "A"}]))
    assert [r.step for r in rep.records] == [0]
    assert rep.records[0].circulating == (10, 0)
    assert rep.events == []


def test_zero_agents_is_static():
    rep = run_scenario(scenario(steps=30))
    rows = [r.as_row() for r in rep.records]
    for row in rows:
        row.pop("step")
        row.pop("I")
    assert all(row == rows[0] for row in rows)
    assert len(rep.records) == 31


def test_same_seed_same_report(scenario_dict):
    sc = parse_scenario(scenario_dict)
    a, b = run_scenario(sc), run_scenario(sc)
    assert [r.as_row() for r in a.records] == [r.as_row() for r in b.records]
    assert a.summary == b.summary and a.events == b.events


def test_seed_changes_draws(scenario_dict):
    sc = parse_scenario(scenario_dict)
    other = parse_scenario(dict(scenario_dict, seed=8))
    assert [r.as_row() for r in run_scenario(sc).records] != [r.as_row() for r in run_scenario(other).records]


def test_rng_streams_are_keyed():
    a = rng_for(3, agent_key("u1"), 5).random(4)
    assert np.array_equal(a, rng_for(3, agent_key("u1"), 5).random(4))
    assert not np.array_equal(a, rng_for(3, agent_key("u2"), 5).random(4))
    assert not np.array_equal(a, rng_for(3, agent_key("u1"), 6).random(4))


def test_adding_agent_elsewhere_does_not_perturb():
    up = {"id": "u1", "kind": "upgrader", "group": "A"}
    base = run_scenario(scenario([group(), group("B")], [up]))
    more = run_scenario(scenario([group(), group("B")], [up, {"id": "u2", "kind": "upgrader", "group": "B"}]))
    assert [r.as_row() for r in base.series("A")] == [r.as_row() for r in more.series("A")]


def test_dao_schedule():
    state = initialize(scenario(steps=50, inflation={"T": 24}))
    assert dao_agent_step(state, 23) == []
    assert dao_agent_step(state, 24) == ["I_update:A"]
    assert dao_agent_step(state, 47) == []
    assert dao_agent_step(state, 48) == ["I_update:A"]
    short = initialize(scenario(steps=50, inflation={"T": 23}))
    assert dao_agent_step(short, 23) == ["I_update:A"]


def test_dao_launches_group():
    sc = scenario([group(), group("B", launch_step=5, cp_total=400, q=0.25, gov_liquidity=30)], steps=8)
    rep = run_scenario(sc)
    b = rep.series("B")
    assert [r.step for r in b] == [5, 6, 7, 8]
    assert b[0].cp_reserve == amount(100) and b[0].gov_reserve == amount(30)
    assert b[0].reserve_balance == amount(300)
    assert rep.summary["groups"]["B"]["launched_at"] == 5


def test_top_rarity_nft_is_not_attempted():
    sc = scenario(agents=[{"id": "u", "kind": "upgrader", "group": "A"}], groups=[group(initial_mint=0)])
    state = initialize(sc)
    agent = state.agents[0]
    state.ledger.mint_nft("A", agent.account, 1)
    assert upgrader_agent_step(state, agent, rng_for(1, agent.key, 1)) == []


def test_always_policy_binomial_first_step():
    agents = [{"id": f"u{i}", "kind": "upgrader", "group": "A"} for i in range(1000)]
    sc = scenario([group(initial_mint=1000, ladder=[{"p": 0.5, "r": 1}])], agents, steps=1)
    burns = run_scenario(sc).summary["groups"]["A"]["total_burns"]
    assert abs(burns - 500) <= 3 * (1000 * 0.25) ** 0.5


def test_expected_value_policy_gates_unsafe_ladder():
    bad = group(ladder=[{"p": 0.5, "r_ceiling_scale": 1.5}], inflationary=True)
    agents = [{"id": "u", "kind": "upgrader", "group": "A", "policy": "expected_value", "threshold": 0}]
    rep = run_scenario(scenario([bad], agents, steps=10))
    assert rep.records[-1].circulating == (10, 0)
    assert rep.events == []


def test_expected_value_policy_threshold():
    # at 0.9x ceiling E[next] = 0.9 cp_i: threshold 0.9 attempts, 0.95 does not
    for threshold, attempted in (("0.9", True), ("0.95", False)):
        agents = [{"id": "u", "kind": "upgrader", "group": "A", "policy": "expected_value",
                   "threshold": threshold}]
        rep = run_scenario(scenario(agents=agents, steps=1))
        assert (rep.records[-1].circulating != (10, 0)) is attempted


def test_repurchase_refills_reserve():
    agents = [{"id": "u", "kind": "upgrader", "group": "A", "repurchase": True}]
    rep = run_scenario(scenario(agents=agents, steps=20))
    kinds = {e.event for e in rep.events}
    assert {"burn", "purchase"} <= kinds
    assert rep.summary["groups"]["A"]["nfts_minted"] > 10


def _arb_scenario(**agent):
    cfg = {"id": "arb", "kind": "arbitrageur", "group": "A"}
    cfg.update(agent)
    return scenario([group(cp_total=200, q=0.5, gov_liquidity=25, initial_mint=0)], [cfg], steps=1)


def test_arbitrageur_closed_form_example():
    rep = run_scenario(_arb_scenario())
    first, last = rep.records
    assert (first.cp_reserve, first.gov_reserve) == (amount(100), amount(25))
    assert (last.cp_reserve, last.gov_reserve) == (amount(50), amount(50))
    assert last.spot_ratio == 1
    # paid 25 gov ($250), received 50 CP pegged at $10 each
    assert last.arb_profit == 250


def test_arbitrageur_zero_budget_does_nothing():
    rep = run_scenario(_arb_scenario(fiat_budget=0))
    assert rep.records[-1].cp_reserve == amount(100)
    assert rep.records[-1].arb_profit == 0


def test_arbitrageur_partial_budget():
    rep = run_scenario(_arb_scenario(fiat_budget=100))
    last = rep.records[-1]
    assert last.gov_reserve == amount(35)
    assert 1 / 4 < last.spot_ratio < 1


def test_arbitrageur_idle_at_ideal():
    sc = scenario([group(initial_mint=0)], [{"id": "arb", "kind": "arbitrageur", "group": "A"}], steps=3)
    rep = run_scenario(sc)
    assert all(r.arb_profit == 0 and r.spot_ratio == 1 for r in rep.records)
    assert rep.records[-1].cp_reserve == rep.records[0].cp_reserve


def test_arbitrageur_sells_cp_when_rich():
    sc = scenario([group(cp_total=200, q=0.5, gov_liquidity=400, initial_mint=0)],
                  [{"id": "arb", "kind": "arbitrageur", "group": "A", "cp": 1000}], steps=1)
    last = run_scenario(sc).records[-1]
    assert abs(last.spot_ratio - 1) <= Fraction(1, 10**6)
    assert last.arb_profit > 0


def test_arbitrageur_with_fee_stops_at_band():
    sc = scenario([group(cp_total=200, q=0.5, gov_liquidity=25, initial_mint=0, fee_rate=0.01)],
                  [{"id": "arb", "kind": "arbitrageur", "group": "A"}], steps=2)
    rows = run_scenario(sc).records
    assert abs(rows[1].spot_ratio - Fraction(99, 100)) < Fraction(1, 10**6)
    assert rows[2].cp_reserve == rows[1].cp_reserve


def test_write_report_files(tmp_path, scenario_dict):
    rep = run_scenario(parse_scenario(scenario_dict))
    paths = write_report(rep, tmp_path)
    assert sorted(p.name for p in paths) == ["events.csv", "pool_A.csv", "summary.json", "timeseries.csv"]
    lines = (tmp_path / "timeseries.csv").read_text().splitlines()
    assert len(lines) == 1 + scenario_dict["steps"] + 1
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["groups"]["A"]["failure_pmf"][0].startswith("0.5")


def test_conservation_holds_every_step(scenario_dict):
    def check(state):
        state.ledger.check_invariants()
        for g in state.groups.values():
            pool = g.group.pool
            assert state.ledger.balance(g.group.cp_token, pool.account) == pool.cp_reserve
            assert state.ledger.balance("GOV", pool.account) == pool.gov_reserve

    run_scenario(parse_scenario(dict(scenario_dict, steps=100)), on_step=check)


# -- Monte Carlo -----------------------------------------------------------


def test_monte_carlo_single_run_is_identity(scenario_dict):
    sc = parse_scenario(scenario_dict)
    rep = run_scenario(sc)
    agg = monte_carlo(sc, 1)
    for r in rep.records:
        assert agg.mean(r.step, r.group, "user_cp") == r.user_cp.to_fraction()
        assert agg.mean(r.step, r.group, "cumulative_burns") == r.cumulative_burns
        assert agg.stderr(r.step, r.group, "spot_ratio") == 0
    assert agg.burn_histogram["A"] == rep.summary["groups"]["A"]["burn_histogram"]


def test_monte_carlo_equals_offline_combination(scenario_dict):
    sc = parse_scenario(scenario_dict)
    agg = monte_carlo(sc, 4)
    from dataclasses import replace

    offline = aggregate([digest(run_scenario(replace(sc, seed=sc.seed + j))) for j in range(4)], sc)
    assert agg.rows == offline.rows and agg.burn_histogram == offline.burn_histogram
    reversed_ = aggregate([digest(run_scenario(replace(sc, seed=sc.seed + j))) for j in reversed(range(4))], sc)
    assert reversed_.rows == agg.rows


def test_monte_carlo_parallel_matches_serial(scenario_dict):
    sc = parse_scenario(scenario_dict)
    assert monte_carlo(sc, 4, workers=2).rows == monte_carlo(sc, 4).rows


def test_monte_carlo_rejects_zero_runs(scenario_dict):
    with pytest.raises(ValueError):
        monte_carlo(parse_scenario(scenario_dict), 0)


def test_burn_frequency_matches_pmf_over_many_runs():
    sc = scenario([group(initial_mint=1, ladder=[{"p": 0.5, "r": 1}])],
                  [{"id": "u", "kind": "upgrader", "group": "A"}], steps=1)
    n = 10_000
    agg = monte_carlo(sc, n)
    freq = agg.burn_frequency["A"][0]
    assert agg.failure_pmf["A"][0] == Fraction(1, 2)
    assert abs(freq - 0.5) <= 3 * (0.25 / n) ** 0.5


def test_inflationary_ladder_grows_value():
    ladder = [{"p": 0.5, "r_ceiling_scale": 2}, {"p": 0.5, "r_ceiling_scale": 2}]
    sc = scenario([group(ladder=ladder, inflationary=True, initial_mint=20, cp_total=10**6)],
                  [{"id": "u", "kind": "upgrader", "group": "A"}], steps=2)
    agg = monte_carlo(sc, 200)
    values = [agg.mean(s, "A", "system_value") for s in range(3)]
    assert values[0] < values[1] < values[2]
    assert agg.drift_mean["A"] > 3 * agg.drift_stderr["A"]


def test_compliant_scenario_has_no_positive_drift():
    ladder = [{"p": 0.5, "r_ceiling_scale": 1}, {"p": 0.3, "r_ceiling_scale": 0.9}]
    sc = scenario([group(ladder=ladder, initial_mint=5)],
                  [{"id": "u", "kind": "upgrader", "group": "A", "repurchase": True}], steps=4)
    agg = monte_carlo(sc, 1000)
    assert agg.drift_mean["A"] <= 3 * agg.drift_stderr["A"]
