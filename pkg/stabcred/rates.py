"""
Interest rate curves.

  - :func:`piecewise_rate`: the two-slope utilization curve of an external (Aave-style) lending market.
  - :func:`controller_rate`: the facilitator controller's transfer function ``r = gain * E / (1 - E)``,
    evaluated at a single instant.
  - :func:`e_from_credit`: the controller input when a credit line of relative size X is utilized at U and
    everything borrowed is sold into the core pool.

All rates are annualized simple rates expressed as fractions (0.10 == 10% per year).
"""

import logging
from dataclasses import dataclass, replace
from decimal import Decimal
from typing import Dict

from stabcred import _utils
from stabcred.constants import DEFAULT_GAIN, DEFAULT_U_OPTIMAL, RAY, Numberish
from stabcred.exceptions import OutOfRange, Divergence

lg = logging.getLogger(__name__)


@dataclass(frozen=True)
class PiecewiseRateParams:
    """
    Parameters of a two-slope utilization rate curve

    :param u_optimal: kink of the curve, in (0, 1)
    :param slope1: rate added between zero and optimal utilization
    :param slope2: rate added between optimal and full utilization
    :param base_rate: rate at zero utilization
    """
    u_optimal: Decimal = DEFAULT_U_OPTIMAL
    slope1: Decimal = Decimal("0.10")
    slope2: Decimal = Decimal("0.75")
    base_rate: Decimal = Decimal(0)

    def __post_init__(self):
        for k in ("u_optimal", "slope1", "slope2", "base_rate"):
            object.__setattr__(self, k, _utils.to_decimal(getattr(self, k)))

    def __validate__(self) -> None:
        if not 0 < self.u_optimal < 1:
            raise OutOfRange(f"u_optimal must be in (0, 1), got {self.u_optimal}")
        if self.slope1 < 0 or self.slope2 < 0:
            raise OutOfRange(f"slopes must be >= 0, got {self.slope1} / {self.slope2}")
        if self.base_rate < 0:
            raise OutOfRange(f"base_rate must be >= 0, got {self.base_rate}")

    @property
    def optimal_rate(self) -> Decimal:
        """Rate at exactly optimal utilization"""
        return self.base_rate + self.slope1

    def updated(self, **kwargs) -> "PiecewiseRateParams":
        return replace(self, **kwargs)

    def to_dict(self) -> Dict:
        return {
            "u_optimal": self.u_optimal,
            "slope1": self.slope1,
            "slope2": self.slope2,
            "base_rate": self.base_rate,
        }

    @staticmethod
    def from_dict(x: Dict) -> "PiecewiseRateParams":
        """
        Create rate parameters from a dict. If `x["ray"]` is true, slopes and the base rate are on-chain
        ray-scaled integers (1e27 == 100%) and are normalized with :func:`rate_from_ray`.
        """
        ray = bool(x.get("ray", False))
        conv = rate_from_ray if ray else _utils.to_decimal
        return PiecewiseRateParams(
            u_optimal=_utils.to_decimal(x.get("u_optimal", DEFAULT_U_OPTIMAL)),
            slope1=conv(x["slope1"]),
            slope2=conv(x.get("slope2", 0)),
            base_rate=conv(x.get("base_rate", 0)),
        )


@dataclass(frozen=True)
class ControllerParams:
    """:param gain: scale of the controller transfer function"""
    gain: Decimal = DEFAULT_GAIN

    def __post_init__(self):
        object.__setattr__(self, "gain", _utils.to_decimal(self.gain))

    def __validate__(self) -> None:
        if self.gain <= 0:
            raise OutOfRange(f"gain must be > 0, got {self.gain}")

    def to_dict(self) -> Dict:
        return {"gain": self.gain}


@dataclass(frozen=True)
class ControllerInput:
    """Controller input for a credit line of relative size X utilized at U"""
    credit_fraction_x: Decimal
    utilization_u: Decimal

    @property
    def e_controller(self) -> Decimal:
        return e_from_credit(self.credit_fraction_x, self.utilization_u)


@_utils.fixed_point
def rate_from_ray(x: Numberish) -> Decimal:
    """Normalize a ray-scaled on-chain rate (1e27 == 1.0)"""
    return _utils.to_decimal(x) / RAY


@_utils.fixed_point
def piecewise_rate(u: Numberish, params: PiecewiseRateParams) -> Decimal:
    """
    Rate of the external market at utilization `u`. The first branch owns ``u == u_optimal``.

    :raises OutOfRange: if `u` is not in [0, 1)
    """
    u = _utils.to_decimal(u)
    if u < 0 or u >= 1:
        raise OutOfRange(f"utilization must be in [0, 1), got {u}")

    if u <= params.u_optimal:
        return params.base_rate + u / params.u_optimal * params.slope1
    else:
        excess = (u - params.u_optimal) / (1 - params.u_optimal)
        return params.base_rate + params.slope1 + excess * params.slope2


@_utils.fixed_point
def supply_rate(u: Numberish, params: PiecewiseRateParams, reserve_factor: Numberish) -> Decimal:
    """Rate earned by the supplier of the market's liquidity at utilization `u`"""
    u = _utils.to_decimal(u)
    return piecewise_rate(u, params) * u * (1 - _utils.to_decimal(reserve_factor))


@_utils.fixed_point
def controller_rate(e: Numberish, params: ControllerParams = ControllerParams()) -> Decimal:
    """
    Facilitator rate ``gain * e / (1 - e)``

    :raises Divergence: if e >= 1
    """
    e = _utils.to_decimal(e)
    if e >= 1:
        raise Divergence(f"controller diverges at E = {e}")
    if e < 0:
        raise OutOfRange(f"E must be >= 0, got {e}")
    return params.gain * e / (1 - e)


@_utils.fixed_point
def e_from_credit(x: Numberish, u: Numberish) -> Decimal:
    """
    Controller input assuming all utilization of a credit line of relative size `x` is sold into the core pool

    :raises Divergence: if x * u >= 1
    """
    x = _utils.to_decimal(x)
    u = _utils.to_decimal(u)
    if x < 0:
        raise OutOfRange(f"credit fraction must be >= 0, got {x}")
    if u < 0 or u > 1:
        raise OutOfRange(f"utilization must be in [0, 1], got {u}")

    e = x * u
    if e >= 1:
        raise Divergence(f"X * U = {e} saturates the controller")
    return e


@_utils.fixed_point
def e_from_pool(stable_reserve: Numberish, initial_stable: Numberish, initial_counter: Numberish) -> Decimal:
    """
    Observed controller input: stablecoins sold into the core pool relative to the pool's initial
    counterasset reserve. Never negative.
    """
    sold = _utils.to_decimal(stable_reserve) - _utils.to_decimal(initial_stable)
    return max(Decimal(0), sold / _utils.to_decimal(initial_counter))
