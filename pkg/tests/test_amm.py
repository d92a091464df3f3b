import csv
from fractions import Fraction

import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from nftecon import AmmPool, Ledger, Side, amount, execute_swap, init_pool, quote_swap, spot_ratio
from nftecon.amm import (
    AmmError,
    PoolDrainError,
    csf_quote,
    pool_row,
    quote_exact_out,
    required_input,
    slippage_curve,
    trade_to_ratio,
    write_pool_csv,
)
from nftecon.fixedpoint import SCALE, TokenAmount, ceil_div

from .conftest import ALICE, make_group


def pool(cp, gov, **kw):
    return AmmPool(amount(cp), amount(gov), **kw)


def test_init_pool_splits_cp():
    p, reserve = init_pool(amount(100), "0.5", amount(50))
    assert p.cp_reserve == amount(50) and p.gov_reserve == amount(50)
    assert p.k == 2500
    assert reserve == amount(50)


@pytest.mark.parametrize("q", [0, 1, "1.5", "-0.1"])
def test_init_pool_rejects_q(q):
    with pytest.raises(ValueError):
        init_pool(amount(100), q, amount(50))


def test_init_pool_rejects_zero_liquidity():
    with pytest.raises(ValueError):
        init_pool(amount(100), "0.5", amount(0))


def test_buy_one_from_five_five_costs_one_and_a_quarter():
    assert required_input(pool(5, 5), Side.GOV_TO_CP, amount(1)) == amount("1.25")


def test_buy_one_from_deep_pool():
    exact = Fraction(250000, 499) - 500
    got = required_input(pool(500, 500), Side.GOV_TO_CP, amount(1)).to_fraction()
    assert abs(got - exact) <= Fraction(1, SCALE)
    assert abs(got - Fraction("1.002004")) < Fraction(1, 10**6)


def test_swap_five_cp_into_fifty_fifty():
    q = quote_swap(pool(50, 50), Side.CP_TO_GOV, amount(5))
    exact = 50 - Fraction(2500, 55)
    assert 0 <= exact - q.amount_out.to_fraction() < Fraction(1, SCALE)
    assert float(q.amount_out) == pytest.approx(4.545454545, abs=1e-9)


def test_execute_worked_example(ledger):
    group = make_group(ledger, cp_total=10, q="0.5", gov=5)
    ledger.mint_tokens("GOV", ALICE, amount(10))
    pay = required_input(group.pool, Side.GOV_TO_CP, amount(1))
    out = execute_swap(group.pool, ledger, ALICE, Side.GOV_TO_CP, pay)
    assert out == amount(1)
    assert (group.pool.cp_reserve, group.pool.gov_reserve) == (amount(4), amount("6.25"))
    assert ledger.balance("CP:A", group.pool.account) == group.pool.cp_reserve
    ledger.check_invariants()


def test_execute_rejects_zero_and_overdraft(ledger):
    group = make_group(ledger)
    with pytest.raises(AmmError):
        execute_swap(group.pool, ledger, ALICE, Side.CP_TO_GOV, amount(0))
    before = ledger.dumps()
    with pytest.raises(Exception):
        execute_swap(group.pool, ledger, ALICE, Side.CP_TO_GOV, amount(1))
    assert ledger.dumps() == before


def test_round_trip_recovers_input(ledger):
    group = make_group(ledger, cp_total=2000, gov=1000)
    ledger.mint_tokens("CP:A", ALICE, amount(10))
    got = execute_swap(group.pool, ledger, ALICE, Side.CP_TO_GOV, amount(7))
    back = execute_swap(group.pool, ledger, ALICE, Side.GOV_TO_CP, got)
    assert back <= amount(7)
    assert amount(7).units - back.units <= 2


def test_spot_ratio_examples():
    assert spot_ratio(pool(50, 50)) == 1
    assert spot_ratio(pool(100, 50)) == Fraction(1, 2)
    assert spot_ratio(pool(50, 100)) == 2


def test_csf_quote():
    assert csf_quote(pool(50, 50), Side.CP_TO_GOV, amount(1)) == amount(1)
    tenth = pool(100, 10, ideal_ratio="0.1")
    assert csf_quote(tenth, Side.GOV_TO_CP, amount(1)) == amount(10)
    with pytest.raises(PoolDrainError):
        csf_quote(pool(5, 5), Side.CP_TO_GOV, amount(6))


def test_exact_out_cannot_drain():
    with pytest.raises(PoolDrainError):
        quote_exact_out(pool(5, 5), Side.GOV_TO_CP, amount(5))


def test_slippage_curve_worked_points():
    pts = slippage_curve([5, 500], trade_size=1)
    assert pts[0].cpf_pay == amount("1.25") and pts[0].csf_pay == amount(1)
    assert pts[0].deviation == Fraction(1, 4)
    assert abs(pts[1].deviation - Fraction(2, 1000)) < Fraction(1, 10**5)


def test_slippage_curve_decreases_to_zero():
    levels = [5 * 10**i for i in range(10)]
    d = [pt.deviation for pt in slippage_curve(levels)]
    assert all(a > b for a, b in zip(d, d[1:]))
    assert d[-1] < Fraction(1, 10**8)


def test_trade_to_ratio_closed_form():
    p = pool(100, 25)
    side, amt = trade_to_ratio(p, 1)
    # reserves (sqrt(k/1), sqrt(k*1)) = (50, 50): add 25 gov
    assert side is Side.GOV_TO_CP and amt == amount(25)
    q = quote_swap(p, side, amt)
    assert q.amount_out == amount(50)
    assert trade_to_ratio(pool(50, 50), 1) is None


def test_pool_csv(tmp_path):
    path = tmp_path / "pool.csv"
    write_pool_csv(path, [pool_row(0, pool(50, 50))])
    rows = list(csv.DictReader(open(path)))
    assert list(rows[0]) == ["step", "cp_reserve", "gov_reserve", "spot_ratio", "k"]
    assert rows[0]["spot_ratio"].startswith("1.0")


reserve = st.integers(min_value=10**15, max_value=10**27)
trade = st.integers(min_value=1, max_value=10**26)


@settings(max_examples=200)
@given(reserve, reserve, trade, st.sampled_from(list(Side)))
def test_product_conserved_within_one_unit(x, y, a, side):
    p = AmmPool(TokenAmount(x), TokenAmount(y))
    q = quote_swap(p, side, TokenAmount(a))
    r_in, r_out = p.reserves_for(side)
    new_in = r_in.units + a
    new_out = r_out.units - q.amount_out.units
    exact_out = Fraction(r_in.units * r_out.units, new_in)
    assert 0 <= new_out - exact_out < 1
    assert new_in * new_out >= p.k_units


@settings(max_examples=200)
@given(reserve, reserve, trade, st.sampled_from(["0.003", "0.01", "0.3"]), st.sampled_from(list(Side)))
def test_fee_never_decreases_product(x, y, a, fee, side):
    p = AmmPool(TokenAmount(x), TokenAmount(y), fee_rate=fee)
    q = quote_swap(p, side, TokenAmount(a))
    r_in, r_out = p.reserves_for(side)
    assert (r_in.units + a) * (r_out.units - q.amount_out.units) >= p.k_units


@given(st.integers(1, 10**6), st.integers(1, 10**6))
def test_output_increasing_and_concave(a, step):
    p = pool(1000, 1000)
    f = lambda n: quote_swap(p, Side.CP_TO_GOV, TokenAmount(n * 10**12)).amount_out.units
    o1, o2, o3 = f(a), f(a + step), f(a + 2 * step)
    assert o1 < o2 < o3
    # concavity up to one unit of floor rounding per evaluation
    assert (o3 - o2) <= (o2 - o1) + 2


@settings(max_examples=100)
@given(reserve, reserve, trade)
def test_no_free_lunch(x, y, a):
    p = AmmPool(TokenAmount(x), TokenAmount(y))
    out = quote_swap(p, Side.CP_TO_GOV, TokenAmount(a)).amount_out
    assume(out.units > 0)
    r_in, r_out = p.reserves_for(Side.CP_TO_GOV)
    after = AmmPool(TokenAmount(r_in.units + a), TokenAmount(r_out.units - out.units))
    back = quote_swap(after, Side.GOV_TO_CP, out).amount_out
    assert back.units <= a


@given(st.integers(1, 1000))
def test_slippage_positive_and_decays_with_depth(scale):
    shallow = quote_swap(pool(100 * scale, 100 * scale), Side.CP_TO_GOV, amount(1))
    deep = quote_swap(pool(200 * scale, 200 * scale), Side.CP_TO_GOV, amount(1))
    assert shallow.slippage > deep.slippage > 0
    assert shallow.amount_out < csf_quote(pool(100 * scale, 100 * scale), Side.CP_TO_GOV, amount(1))


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 10**20), st.sampled_from(list(Side)))
def test_quote_matches_execute(a, side):
    ledger = Ledger()
    group = make_group(ledger, cp_total=2000, gov=1000)
    ledger.mint_tokens("CP:A", ALICE, amount(1000))
    ledger.mint_tokens("GOV", ALICE, amount(1000))
    q = quote_swap(group.pool, side, TokenAmount(a))
    out = execute_swap(group.pool, ledger, ALICE, side, TokenAmount(a))
    assert out == q.amount_out
    assert spot_ratio(group.pool) == q.spot_price_after
    ledger.check_invariants()


def test_required_input_is_minimal():
    p = pool(500, 500)
    need = required_input(p, Side.GOV_TO_CP, amount(1))
    assert quote_swap(p, Side.GOV_TO_CP, need).amount_out >= amount(1)
    assert quote_swap(p, Side.GOV_TO_CP, TokenAmount(need.units - 1)).amount_out < amount(1)
    assert need.units == ceil_div(500 * 500 * SCALE * SCALE, 499 * SCALE) - 500 * SCALE


@settings(max_examples=200)
@given(reserve, reserve, st.sampled_from(["0", "0.003", "0.01", "0.3"]),
       st.fractions(min_value=Fraction(1, 100), max_value=Fraction(100)))
def test_trade_to_ratio_lands_on_target(x, y, fee, target):
    p = AmmPool(TokenAmount(x), TokenAmount(y), fee_rate=fee)
    trade = trade_to_ratio(p, target)
    if trade is None:
        # already there up to one unit of rounding
        assert abs(spot_ratio(p) - target) <= target * Fraction(4, min(x, y))
        return
    side, amt = trade
    after = quote_swap(p, side, amt).spot_price_after
    if side is Side.GOV_TO_CP:
        assert spot_ratio(p) < after <= target
    else:
        assert spot_ratio(p) > after >= target
    assert abs(after - target) / target < Fraction(1, 10**9)
