import copy

import pytest

from nftecon import AccountId, Ledger, RarityLadder, amount, launch_group

ALICE = AccountId.from_label("alice")
BOB = AccountId.from_label("bob")


@pytest.fixture
def ledger():
    return Ledger()


def make_group(ledger, group_id="A", cp_total=100, q="0.5", gov=50, ladder=None, ideal=1, fee=0):
    ladder = ladder or RarityLadder.build(10, ["0.5"], [2])
    return launch_group(
        ledger, group_id, ladder, amount(cp_total), q, amount(gov), ideal_ratio=ideal, fee_rate=fee
    )


BASE_SCENARIO = {
    "seed": 7,
    "steps": 30,
    "external_gov_price": 10,
    "inflation": {"T": 24, "clamp": [0.25, 4], "initial": 1},
    "groups": [
        {
            "id": "A",
            "cp_total": 10000,
            "q": 0.5,
            "gov_liquidity": 5000,
            "ideal_ratio": 1,
            "cp0": 10,
            "ladder": [{"p": 0.5, "r_ceiling_scale": 1}, {"p": 0.5, "r_ceiling_scale": 0.9}],
            "initial_mint": 10,
        }
    ],
    "agents": [
        {"id": "u1", "kind": "upgrader", "group": "A", "repurchase": True},
        {"id": "t1", "kind": "trader", "group": "A", "gov": 200, "cp": 200},
        {"id": "arb", "kind": "arbitrageur", "group": "A", "cp": 2000},
    ],
}


@pytest.fixture
def scenario_dict():
    return copy.deepcopy(BASE_SCENARIO)


# -- acceptance report ---------------------------------------------------------

ACCEPTANCE_LINES: list[str] = []


def pytest_runtest_logreport(report):
    if report.when != "call" or "test_acceptance" not in report.nodeid:
        return
    for name, value in report.user_properties:
        if name == "criterion":
            verdict = "PASS" if report.passed else "FAIL"
            ACCEPTANCE_LINES.append(f"{verdict} {value}")


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1][1:].rstrip(":"))):
            terminalreporter.write_line(line)
