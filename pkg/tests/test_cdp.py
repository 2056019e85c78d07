from decimal import Decimal

import pytest

from stabcred import cdp
from stabcred.cdp import Position, UNLEVERAGED
from stabcred.exceptions import ExceedsLTV, NotLiquidatable, OutOfRange


def test_health_factor():
    """Health factor is weighted collateral over debt, and unleveraged without debt"""
    assert cdp.health_factor(Position(10_000, "0.8", 8_000)) == 1
    assert cdp.health_factor(Position(10_000, "0.8", 4_000)) == 2
    assert cdp.health_factor(Position(10_000, "0.8")) == UNLEVERAGED


def test_position_at_health_factor_one_is_not_liquidatable():
    """Liquidation requires a health factor strictly below 1"""
    p = Position(10_000, "0.8", 8_000, owner="alice")
    assert not cdp.is_liquidatable(p)
    with pytest.raises(NotLiquidatable):
        cdp.liquidate(p)
    assert cdp.is_liquidatable(cdp.shock(p, "0.99"))


def test_mint():
    """Minting grows the debt up to the LTV cap and no further"""
    p = Position(10_000, "0.8", owner="alice")

    # GIVEN an empty position
    # WHEN minting up to the LTV cap
    # THEN the debt grows by the minted amount
    p = cdp.mint(p, 7_000, "0.75")
    assert p.debt == 7_000
    assert cdp.max_mint(p, "0.75") == 500

    # GIVEN a position with 500 of borrowing power left
    # WHEN minting more than that
    # THEN raise ExceedsLTV and leave the position unchanged
    with pytest.raises(ExceedsLTV):
        cdp.mint(p, 501, "0.75")
    assert p.debt == 7_000

    assert cdp.mint(p, 0, "0.75") is p


@pytest.mark.parametrize("p", [
    Position(10_000, "0", owner="zero-threshold"),
    Position(10_000, "1.5", owner="threshold-above-one"),
    Position(-1, "0.8", owner="negative-collateral"),
    Position(10_000, "0.8", -100, owner="negative-debt"),
])
def test_mint_rejects_invalid_positions(p):
    """Minting checks the position before touching its debt"""
    with pytest.raises(OutOfRange):
        cdp.mint(p, 1, "0.75")


def test_liquidate_with_enough_collateral():
    """A liquidation repays the whole debt and pays the liquidator its bonus"""
    p = cdp.shock(Position(10_000, "0.8", 8_000, owner="bob"), "0.9")
    assert p.collateral_value == 9_000

    outcome = cdp.liquidate(p, "0.05")
    assert outcome.debt_repaid == 8_000
    assert outcome.collateral_seized == 8_400
    assert outcome.liquidator_profit == 400
    assert outcome.bad_debt == 0


def test_liquidate_underwater_position_records_bad_debt():
    """Debt the collateral cannot cover becomes bad debt"""
    p = Position(6_000, "0.8", 8_000, owner="bob")
    outcome = cdp.liquidate(p)
    assert outcome.collateral_seized == 6_000
    assert outcome.liquidator_profit == 0
    assert outcome.bad_debt == 2_000


def test_accrue():
    """Interest accrues on the debt over the given fraction of a year"""
    p = Position(10_000, "0.8", 1_000)
    p = cdp.accrue(p, "0.05", 1)
    assert p.debt == 1_050

    p = cdp.accrue(Position(10_000, "0.8", 1_000), "0.0365", "0.01")
    assert p.debt == Decimal("1000.365")

    unleveraged = Position(10_000, "0.8")
    assert cdp.accrue(unleveraged, "0.05", 1) is unleveraged
