from decimal import Decimal

import pytest

from stabcred import rates
from stabcred.exceptions import Divergence, OutOfRange
from stabcred.rates import ControllerParams, PiecewiseRateParams


def test_controller_rate():
    """At E = 0.4 and the default gain the controller charges 10%"""
    assert rates.controller_rate("0.4") == Decimal("0.1")
    assert rates.controller_rate(0) == 0
    assert rates.controller_rate("0.5", ControllerParams(gain="0.2")) == Decimal("0.2")


def test_controller_rate_diverges():
    """The controller rate is unbounded at E >= 1 and undefined below zero"""
    with pytest.raises(Divergence):
        rates.controller_rate(1)
    with pytest.raises(Divergence):
        rates.controller_rate("1.5")
    with pytest.raises(OutOfRange):
        rates.controller_rate("-0.1")


def test_controller_rate_is_increasing():
    """The controller rate rises with E"""
    values = [rates.controller_rate(Decimal(i) / 100) for i in range(100)]
    assert all(a < b for a, b in zip(values, values[1:]))


def test_piecewise_rate():
    """The piecewise curve follows slope1 up to the kink and slope2 above it"""
    params = PiecewiseRateParams(u_optimal="0.8", slope1="0.10", slope2="0.75")

    assert rates.piecewise_rate(0, params) == 0
    assert rates.piecewise_rate("0.4", params) == Decimal("0.05")
    # the first branch owns the kink
    assert rates.piecewise_rate("0.8", params) == Decimal("0.1")
    assert rates.piecewise_rate("0.9", params) == Decimal("0.475")


def test_piecewise_rate_with_base_rate():
    """A base rate shifts the whole curve"""
    params = PiecewiseRateParams(u_optimal="0.5", slope1="0.04", slope2="1", base_rate="0.01")
    assert rates.piecewise_rate(0, params) == Decimal("0.01")
    assert rates.piecewise_rate("0.5", params) == Decimal("0.05")
    assert rates.piecewise_rate("0.75", params) == Decimal("0.55")
    assert params.optimal_rate == Decimal("0.05")


def test_piecewise_rate_rejects_utilization_outside_the_unit_interval():
    """Utilization must lie in [0, 1)"""
    params = PiecewiseRateParams()
    with pytest.raises(OutOfRange):
        rates.piecewise_rate(1, params)
    with pytest.raises(OutOfRange):
        rates.piecewise_rate("-0.01", params)


def test_PiecewiseRateParams_validation():
    """Curve parameters are range checked and can be updated field by field"""
    PiecewiseRateParams().__validate__()
    with pytest.raises(OutOfRange):
        PiecewiseRateParams(u_optimal=1).__validate__()
    with pytest.raises(OutOfRange):
        PiecewiseRateParams(slope1="-0.1").__validate__()

    updated = PiecewiseRateParams().updated(slope1=Decimal("0.3"))
    assert updated.slope1 == Decimal("0.3")
    assert updated.slope2 == Decimal("0.75")


def test_rate_from_ray():
    """Ray-scaled on-chain parameters are converted to plain rates"""
    assert rates.rate_from_ray(10 ** 27) == 1
    assert rates.rate_from_ray("40000000000000000000000000") == Decimal("0.04")

    params = PiecewiseRateParams.from_dict({
        "ray": True,
        "u_optimal": "0.9",
        "slope1": "40000000000000000000000000",
        "slope2": "600000000000000000000000000",
    })
    assert params.u_optimal == Decimal("0.9")
    assert params.slope1 == Decimal("0.04")
    assert params.slope2 == Decimal("0.6")


def test_supply_rate():
    """Suppliers earn the borrow rate times utilization net of the reserve factor"""
    params = PiecewiseRateParams(u_optimal="0.8", slope1="0.10", slope2="0.75")
    assert rates.supply_rate("0.8", params, "0.2") == Decimal("0.064")


def test_e_from_credit():
    """E from a credit line is X times utilization, and diverges at or above 1"""
    assert rates.e_from_credit("0.5", "0.8") == Decimal("0.4")
    with pytest.raises(Divergence):
        rates.e_from_credit(2, "0.5")
    with pytest.raises(OutOfRange):
        rates.e_from_credit("0.5", "1.1")


def test_e_from_pool():
    """E from the pool is the excess of stablecoins over counterassets"""
    assert rates.e_from_pool(1_400_000, 1_000_000, 1_000_000) == Decimal("0.4")
    # stablecoins bought out of the pool do not push the rate below zero
    assert rates.e_from_pool(900_000, 1_000_000, 1_000_000) == 0
