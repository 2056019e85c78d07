import json
from decimal import Decimal

import pytest

from stabcred import underwriting, scenario, _utils, _utils_tests
from stabcred.constants import FacilitatorKind
from stabcred.exceptions import OutOfRange, RangeError
from stabcred.rates import ControllerParams, PiecewiseRateParams

ISOLATED = PiecewiseRateParams(u_optimal="0.8", slope1="0.10", slope2="0.75")


def load(x) -> scenario.ScenarioConfig:
    return scenario.parse_scenario(json.dumps(x))


def test_max_credit_fraction():
    """At the default gain and kink the affordable X is 25 * slope1 / (3 + 20 * slope1)"""
    assert abs(underwriting.max_credit_fraction("0.10") - Decimal("0.5")) < Decimal("1e-12")
    assert abs(underwriting.max_credit_fraction("0.30") - Decimal(5) / 6) < Decimal("1e-12")
    for slope1 in ("0.01", "0.05", "0.2", "1"):
        s = Decimal(slope1)
        assert abs(underwriting.max_credit_fraction(s) - 25 * s / (3 + 20 * s)) < Decimal("1e-12")

    assert underwriting.max_credit_fraction(0) == 0
    with pytest.raises(OutOfRange):
        underwriting.max_credit_fraction("0.1", u_optimal=1)


def test_credit_line_amount():
    """The credit line is X times the pool counterassets"""
    assert underwriting.credit_line_amount("0.5", 1_000_000) == 500_000


def test_check_condition_binds_at_the_kink():
    """At X = 0.5 the affordability condition binds at the kink"""
    verdict = underwriting.check_condition("0.5", ISOLATED)
    assert verdict.satisfied
    assert verdict.binding_utilization == Decimal("0.8")
    assert verdict.min_margin == 0
    assert verdict.crossing_utilization is None
    assert len(verdict.margin_curve) == 102


def test_check_condition_rejects_an_oversized_line():
    """At X = 0.6 the controller outgrows the external curve below the kink"""
    verdict = underwriting.check_condition("0.6", ISOLATED)
    assert not verdict.satisfied
    assert verdict.min_margin < 0
    # 0.125 U = 0.09 U / (1 - 0.6 U) at U = 0.28 / 0.6
    assert abs(verdict.crossing_utilization - Decimal("0.28") / Decimal("0.6")) < Decimal("1e-9")


def test_check_condition_without_credit():
    """Without credit the condition holds trivially"""
    verdict = underwriting.check_condition(0, ISOLATED)
    assert verdict.satisfied
    assert verdict.min_margin == 0


def test_check_condition_boundary():
    """Just below the closed form X the condition holds, just above it fails"""
    x = underwriting.max_credit_fraction("0.10")
    grid = [Decimal("0.8")]
    assert underwriting.check_condition(x - Decimal("1e-6"), ISOLATED, u_grid=grid).satisfied
    assert not underwriting.check_condition(x + Decimal("1e-6"), ISOLATED, u_grid=grid).satisfied


def test_check_condition_rejects_grids_outside_the_unit_interval():
    """Utilization grids must lie in [0, 1)"""
    with pytest.raises(OutOfRange):
        underwriting.check_condition("0.5", ISOLATED, u_grid=[0, 1])
    with pytest.raises(OutOfRange):
        underwriting.utilization_grid(1)


def test_absorbable_liquidity_and_b2s_sizing():
    """The pool absorbs 400,000 at 10% and the B2S line is sized from the drawdown"""
    controller = ControllerParams(gain="0.15")
    absorbable = underwriting.absorbable_liquidity("0.10", controller, 1_000_000)
    assert absorbable == 400_000
    assert underwriting.absorbable_liquidity("0.15", controller, 1_000_000) == 500_000

    size = underwriting.b2s_credit_size(absorbable, "0.06")
    assert abs(size - Decimal("6666666.67")) < 1
    assert abs(size * Decimal("0.06") - absorbable) < Decimal("1e-30")

    with pytest.raises(OutOfRange):
        underwriting.b2s_credit_size(absorbable, 0)
    with pytest.raises(OutOfRange):
        underwriting.b2s_credit_size(absorbable, "1.5")


def test_endogenous_yield():
    """400,000 borrowed at 10% with a 20% reserve factor plus 1M Lend supply at 10%, on a 2M pool"""
    b = underwriting.yield_breakdown(400_000, "0.10", "0.2", 1_000_000, "0.10", 2_000_000)
    assert b.credit_interest == 40_000
    assert b.supplier_share == 32_000
    assert b.protocol_share == 8_000
    assert b.total_flow == 132_000
    assert b.endogenous_yield == Decimal("0.066")

    # the protocol keeps all credit interest
    assert underwriting.endogenous_yield(400_000, "0.10", 1, 1_000_000, "0.10", 2_000_000) == Decimal("0.05")

    with pytest.raises(OutOfRange):
        underwriting.endogenous_yield(0, 0, 0, 0, 0, 0)


def test_historical_worst_drawdown():
    """The worst drawdown is the deepest vault undercollateralization along the trader PnL, capped at an empty vault"""
    assert underwriting.historical_worst_drawdown(["0.02", "0.03", "-0.01", "0.02"]) == Decimal("0.06")
    assert underwriting.historical_worst_drawdown(["-0.1", "0.05"]) == 0
    assert underwriting.historical_worst_drawdown([]) == 0
    # the vault cannot go below empty
    assert underwriting.historical_worst_drawdown(["2"]) == 1


def test_resolve_credit_lines():
    """Auto credit lines resolve to sized facilitators"""
    config, lines = underwriting.resolve_credit_lines(load(_utils_tests.baseline_scenario()))

    market, perps = lines
    assert market.facilitator_kind == FacilitatorKind.B2F_LENDING_MARKET
    assert market.auto
    assert market.size == 500_000
    assert market.size_fraction_x == Decimal("0.5")
    assert config.market("isolated").credit_line == 500_000

    assert perps.facilitator_kind == FacilitatorKind.B2S_PERPS_VAULT
    assert perps.absorbable == 400_000
    assert abs(perps.size - Decimal("6666666.67")) < 1
    assert config.perps.credit_line == perps.size


def test_resolve_credit_lines_with_auto_drawdown():
    """An auto drawdown is taken from the PnL history"""
    x = _utils_tests.baseline_scenario()
    x["perps"]["worst_case_drawdown"] = "auto"
    x["perps"]["pnl_history"] = ["0.02", "0.03", "-0.01", "0.02"]
    config, lines = underwriting.resolve_credit_lines(load(x))
    assert config.perps.worst_case_drawdown == Decimal("0.06")

    x["perps"]["pnl_history"] = []
    with pytest.raises(RangeError) as e:
        underwriting.resolve_credit_lines(load(x))
    assert e.value.path == "perps.worst_case_drawdown"

    x["perps"]["pnl_history"] = ["-0.01"]
    with pytest.raises(RangeError):
        underwriting.resolve_credit_lines(load(x))


def test_underwrite():
    """Underwriting sizes and checks the market line and sizes the perps line"""
    results = underwriting.underwrite(load(_utils_tests.baseline_scenario()))
    assert len(results) == 2
    assert results[0].verdict.satisfied
    assert results[0].verdict.binding_utilization == Decimal("0.8")
    assert results[1].verdict is None

    d = results[0].to_dict()
    assert d["credit_line"]["size"] == Decimal("500000")
    assert d["caveats"] == list(underwriting.CAVEATS)


def test_scenario_yield():
    """The baseline market earns the endogenous yield of the core pool"""
    rows = underwriting.scenario_yield(load(_utils_tests.baseline_scenario()))
    assert len(rows) == 1
    assert rows[0]["market"] == "isolated"
    assert rows[0]["borrowed"] == 400_000
    assert rows[0]["supplier_share"] == 32_000
    assert rows[0]["total_flow"] == 132_000
    assert rows[0]["endogenous_yield"] == Decimal("0.066")


def test_scenario_yield_without_markets():
    """Yield inputs alone produce a row without a market"""
    rows = underwriting.scenario_yield(load(_utils_tests.minimal_scenario(
        endogenous_yield={"lend_supply": "1000000", "lend_rate": "0.10"}
    )))
    assert rows[0]["market"] is None
    assert rows[0]["endogenous_yield"] == Decimal("0.05")


def test_check_condition_marks_saturated_utilizations():
    """Utilizations where X * U reaches 1 are unsatisfied points of the margin curve"""
    # GIVEN a line larger than the core pool counterassets
    x = Decimal("1.2")

    # WHEN it is checked on the default grid
    verdict = underwriting.check_condition(x, ISOLATED)

    # THEN every point at or beyond U = 1 / X saturates the controller
    saturated = [u for u, m in verdict.margin_curve if m == underwriting.SATURATED]
    assert saturated
    assert all(u * x >= 1 for u in saturated)
    assert all(u * x < 1 for u, m in verdict.margin_curve if m != underwriting.SATURATED)
    assert not verdict.satisfied
    assert verdict.min_margin == underwriting.SATURATED
    assert verdict.crossing_utilization < 1 / x
    assert _utils.jsonable(verdict.to_dict())["min_margin"] == "-Infinity"


def test_underwrite_lines_that_saturate_the_controller():
    """Steep auto lines and explicit lines above the counterassets get unsatisfied verdicts"""
    x = _utils_tests.baseline_scenario()
    x["external_markets"][0]["rate_params"]["slope1"] = "1"
    market = underwriting.underwrite(load(x))[0]
    assert market.credit_line.size_fraction_x * Decimal("0.99") > 1
    assert not market.verdict.satisfied

    x = _utils_tests.baseline_scenario()
    x["external_markets"][0]["credit_line"] = "1500000"
    market = underwriting.underwrite(load(x))[0]
    assert market.verdict.x == Decimal("1.5")
    assert not market.verdict.satisfied
