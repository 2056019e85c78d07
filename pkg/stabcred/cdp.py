"""
Collateralized debt positions: minting against collateral, health factors and liquidation.

Positions are immutable; every operation returns a new :class:`Position`. Ledger bookkeeping of minted
stablecoins is done by the caller through :class:`~stabcred.ledger.SupplyLedger` (see
:meth:`~stabcred.ledger.SupplyLedger.mint_backed`), and interest accrual is applied by the simulation loop.
"""

import logging
from dataclasses import dataclass, replace
from decimal import Decimal
from typing import Dict, Union

from stabcred import _utils
from stabcred.constants import DEFAULT_LIQUIDATION_BONUS, Numberish
from stabcred.exceptions import ExceedsLTV, NotLiquidatable, OutOfRange

lg = logging.getLogger(__name__)


class Unleveraged:
    """Health factor of a position without debt"""

    def __repr__(self) -> str:
        return "Unleveraged"

    def __eq__(self, other) -> bool:
        return isinstance(other, Unleveraged)

    def __hash__(self) -> int:
        return hash("Unleveraged")


UNLEVERAGED = Unleveraged()
HealthFactor = Union[Decimal, Unleveraged]


@dataclass(frozen=True)
class Position:
    """
    A collateralized debt position

    :param collateral_value: current value of the deposited collateral
    :param liquidation_threshold: share of the collateral value that counts towards the health factor
    :param debt: stablecoins minted against the collateral (plus accrued interest)
    :param owner: identifier of the position owner
    """
    collateral_value: Decimal
    liquidation_threshold: Decimal
    debt: Decimal = Decimal(0)
    owner: str = ""

    def __post_init__(self):
        for k in ("collateral_value", "liquidation_threshold", "debt"):
            object.__setattr__(self, k, _utils.to_decimal(getattr(self, k)))

    def __validate__(self) -> None:
        if self.collateral_value < 0:
            raise OutOfRange(f"{self.owner}: collateral_value must be >= 0")
        if self.debt < 0:
            raise OutOfRange(f"{self.owner}: debt must be >= 0")
        if not 0 < self.liquidation_threshold <= 1:
            raise OutOfRange(f"{self.owner}: liquidation_threshold must be in (0, 1]")

    def to_dict(self) -> Dict:
        return {
            "owner": self.owner,
            "collateral_value": self.collateral_value,
            "liquidation_threshold": self.liquidation_threshold,
            "debt": self.debt,
        }


@dataclass(frozen=True)
class LiquidationOutcome:
    debt_repaid: Decimal
    collateral_seized: Decimal
    liquidator_profit: Decimal
    bad_debt: Decimal

    def to_dict(self) -> Dict:
        return {
            "debt_repaid": self.debt_repaid,
            "collateral_seized": self.collateral_seized,
            "liquidator_profit": self.liquidator_profit,
            "bad_debt": self.bad_debt,
        }


@_utils.fixed_point
def health_factor(p: Position) -> HealthFactor:
    """``collateral_value * liquidation_threshold / debt``, or :data:`UNLEVERAGED` without debt"""
    if p.debt == 0:
        return UNLEVERAGED
    return p.collateral_value * p.liquidation_threshold / p.debt


def is_liquidatable(p: Position) -> bool:
    hf = health_factor(p)
    return hf != UNLEVERAGED and hf < 1


@_utils.fixed_point
def max_mint(p: Position, ltv_cap: Numberish) -> Decimal:
    """Remaining borrowing power of `p` under `ltv_cap`"""
    return max(Decimal(0), p.collateral_value * _utils.to_decimal(ltv_cap) - p.debt)


@_utils.fixed_point
def mint(p: Position, amount: Numberish, ltv_cap: Numberish) -> Position:
    """
    Mint `amount` stablecoins against the collateral of `p`

    :raises OutOfRange: if `p` is invalid or `amount` is negative
    :raises ExceedsLTV: if the debt after minting would exceed ``collateral_value * ltv_cap``
    """
    p.__validate__()
    amount = _utils.to_decimal(amount)
    ltv_cap = _utils.to_decimal(ltv_cap)
    if amount < 0:
        raise OutOfRange(f"mint amount must be >= 0, got {amount}")
    if amount == 0:
        return p

    new_debt = p.debt + amount
    if new_debt > p.collateral_value * ltv_cap:
        raise ExceedsLTV(
            f"{p.owner}: debt {new_debt} would exceed {p.collateral_value} * {ltv_cap} of borrowing power"
        )

    lg.debug(f"{p.owner}: minted {amount}")
    return replace(p, debt=new_debt)


@_utils.fixed_point
def liquidate(p: Position, bonus: Numberish = DEFAULT_LIQUIDATION_BONUS) -> LiquidationOutcome:
    """
    Liquidate the full debt of `p`. The liquidator repays the debt and seizes collateral worth the debt plus
    `bonus`, or all collateral if that is not enough; any debt exceeding the collateral value is bad debt.

    :raises NotLiquidatable: if the health factor is not below 1
    """
    if not is_liquidatable(p):
        raise NotLiquidatable(f"{p.owner}: health factor {health_factor(p)} is not below 1")

    bonus = _utils.to_decimal(bonus)
    seized = min(p.collateral_value, p.debt * (1 + bonus))
    outcome = LiquidationOutcome(
        debt_repaid=p.debt,
        collateral_seized=seized,
        liquidator_profit=max(Decimal(0), seized - p.debt),
        bad_debt=max(Decimal(0), p.debt - p.collateral_value),
    )
    lg.info(f"{p.owner}: liquidated {outcome.to_dict()}")
    return outcome


@_utils.fixed_point
def accrue(p: Position, rate: Numberish, dt: Numberish) -> Position:
    """Charge simple interest on the debt of `p` at `rate` per year for `dt` years"""
    interest = _utils.quantize(p.debt * _utils.to_decimal(rate) * _utils.to_decimal(dt))
    if interest == 0:
        return p
    return replace(p, debt=p.debt + interest)


@_utils.fixed_point
def shock(p: Position, k: Numberish) -> Position:
    """Scale the collateral value of `p` by `k`"""
    return replace(p, collateral_value=p.collateral_value * _utils.to_decimal(k))
