"""
Credit line underwriting.

A B2F line of credit of relative size X (credit / core pool counterassets) is affordable if, at every
utilization U of the external market, the market's rate is at least the rate the facilitator controller
would charge were everything borrowed sold into the core pool::

    piecewise_rate(U) >= gain * X*U / (1 - X*U)

:func:`check_condition` evaluates this on a utilization grid; :func:`max_credit_fraction` solves it in closed
form at the kink of the external curve, where it binds. B2S lines are sized from the liquidity the core pool
can absorb before the controller reaches a target rate (:func:`absorbable_liquidity`) and the worst
historical undercollateralization of the counterparty vault (:func:`b2s_credit_size`).
"""

import logging
from dataclasses import dataclass, replace
from decimal import Decimal
from typing import Dict, List, Optional, Sequence, Tuple

from stabcred import _utils, rates
from stabcred.constants import (
    ARBITRAGE_CAVEAT, DEFAULT_GAIN, DEFAULT_GRID_MAX, DEFAULT_GRID_POINTS, DEFAULT_U_OPTIMAL, REVISION_CAVEAT,
    FacilitatorKind, Numberish
)
from stabcred.exceptions import OutOfRange, RangeError
from stabcred.rates import ControllerParams, PiecewiseRateParams
from stabcred.scenario import AUTO, MarketConfig, ScenarioConfig, YieldConfig

lg = logging.getLogger(__name__)

CAVEATS = (REVISION_CAVEAT, ARBITRAGE_CAVEAT)
BISECTION_ROUNDS = 100
# margin at utilizations where X * U >= 1 and the controller rate is unbounded
SATURATED = Decimal("-Infinity")


@dataclass(frozen=True)
class CreditLine:
    """
    A sized line of unbacked credit

    :param size_fraction_x: size relative to the core pool counterassets (B2F only)
    :param cost_basis: the external rate parameters the line was underwritten against
    :param absorbable: liquidity the core pool can absorb (B2S only)
    :param worst_case_drawdown: vault drawdown the line was sized against (B2S only)
    """
    facilitator_kind: FacilitatorKind
    size: Decimal
    size_fraction_x: Optional[Decimal] = None
    cost_basis: str = ""
    name: str = ""
    auto: bool = False
    absorbable: Optional[Decimal] = None
    worst_case_drawdown: Optional[Decimal] = None

    def to_dict(self) -> Dict:
        res = {
            "name": self.name,
            "facilitator_kind": self.facilitator_kind.name,
            "size": _utils.quantize(self.size),
            "auto": self.auto,
            "cost_basis": self.cost_basis,
        }
        for k in ("size_fraction_x", "absorbable", "worst_case_drawdown"):
            v = getattr(self, k)
            if v is not None:
                res[k] = v
        return res


@dataclass(frozen=True)
class UnderwritingVerdict:
    """
    :param satisfied: whether the external rate covers the controller rate at every evaluated utilization
    :param binding_utilization: utilization with the smallest margin
    :param margin_curve: (utilization, external rate - controller rate) pairs
    :param crossing_utilization: smallest utilization at which the margin turns negative, if any
    """
    x: Decimal
    satisfied: bool
    binding_utilization: Decimal
    min_margin: Decimal
    margin_curve: Tuple[Tuple[Decimal, Decimal], ...]
    crossing_utilization: Optional[Decimal] = None
    caveats: Tuple[str, ...] = CAVEATS

    def to_dict(self) -> Dict:
        res = {
            "x": self.x,
            "satisfied": self.satisfied,
            "binding_utilization": self.binding_utilization,
            "min_margin": self.min_margin,
            "margin_curve": [[u, m] for u, m in self.margin_curve],
            "caveats": list(self.caveats),
        }
        if self.crossing_utilization is not None:
            res["crossing_utilization"] = self.crossing_utilization
        return res


@dataclass(frozen=True)
class UnderwritingResult:
    credit_line: CreditLine
    verdict: Optional[UnderwritingVerdict] = None

    def to_dict(self) -> Dict:
        res = {"credit_line": self.credit_line.to_dict(), "caveats": list(CAVEATS)}
        if self.verdict is not None:
            res["verdict"] = self.verdict.to_dict()
        return res


@dataclass(frozen=True)
class YieldBreakdown:
    """Interest flows directed to the core liquidity pool"""
    credit_interest: Decimal
    supplier_share: Decimal
    protocol_share: Decimal
    lend_interest: Decimal
    total_flow: Decimal
    pool_tvl: Decimal

    @property
    def endogenous_yield(self) -> Decimal:
        return self.total_flow / self.pool_tvl

    def to_dict(self) -> Dict:
        return {
            "credit_interest": self.credit_interest,
            "supplier_share": self.supplier_share,
            "protocol_share": self.protocol_share,
            "lend_interest": self.lend_interest,
            "total_flow": self.total_flow,
            "pool_tvl": self.pool_tvl,
            "endogenous_yield": self.endogenous_yield,
        }


def utilization_grid(points: int = DEFAULT_GRID_POINTS, u_max: Numberish = DEFAULT_GRID_MAX) -> List[Decimal]:
    """`points` uniformly spaced utilizations on [0, u_max]"""
    if points < 2:
        raise OutOfRange(f"a utilization grid needs at least 2 points, got {points}")
    u_max = _utils.to_decimal(u_max)
    return [u_max * i / (points - 1) for i in range(points)]


def _margin(u: Decimal, x: Decimal, external: PiecewiseRateParams, controller: ControllerParams) -> Decimal:
    if x * u >= 1:
        return SATURATED
    return rates.piecewise_rate(u, external) - rates.controller_rate(rates.e_from_credit(x, u), controller)


@_utils.fixed_point
def check_condition(
        x: Numberish,
        external: PiecewiseRateParams,
        controller: ControllerParams = ControllerParams(),
        u_grid: Optional[Sequence[Numberish]] = None
) -> UnderwritingVerdict:
    """
    Check whether a B2F line of relative size `x` is affordable at every utilization of `u_grid` (default: 101
    points on [0, 0.99]). The kink of the external curve is always evaluated as well.

    The binding utilization is the argmin of the margin (ties go to the larger utilization). It is refined by
    bisection on the slope of the margin between the neighbouring grid points, and the refined point replaces
    the grid point only if its margin is strictly lower.

    Utilizations with ``x * U >= 1`` saturate the controller. Their margin is ``-Infinity`` and the verdict
    is unsatisfied.
    """
    x = _utils.to_decimal(x)
    if u_grid is None:
        u_grid = utilization_grid()
    grid = sorted({_utils.to_decimal(u) for u in u_grid})
    if not grid:
        raise OutOfRange("utilization grid is empty")
    if grid[0] < 0 or grid[-1] >= 1:
        raise OutOfRange(f"utilization grid must lie within [0, 1), got [{grid[0]}, {grid[-1]}]")
    if len(grid) > 1 and grid[0] <= external.u_optimal <= grid[-1] and external.u_optimal not in grid:
        grid = sorted(grid + [external.u_optimal])

    curve = tuple((u, _margin(u, x, external, controller)) for u in grid)

    i_min = 0
    for i, (u, m) in enumerate(curve):
        if m <= curve[i_min][1]:
            i_min = i
    binding, min_margin = curve[i_min]

    lo = grid[max(i_min - 1, 0)]
    hi = grid[min(i_min + 1, len(grid) - 1)]
    if lo < hi:
        u_ref, m_ref = _refine_minimum(lo, hi, x, external, controller)
        if m_ref < min_margin:
            binding, min_margin = u_ref, m_ref

    satisfied = min_margin >= 0 and all(m >= 0 for _, m in curve)
    crossing = None
    if not satisfied:
        crossing = _crossing(curve, x, external, controller)

    lg.debug(f"X={x}: satisfied={satisfied}, binding U={binding}, margin={min_margin}")
    return UnderwritingVerdict(
        x=x,
        satisfied=satisfied,
        binding_utilization=binding,
        min_margin=min_margin,
        margin_curve=curve,
        crossing_utilization=crossing,
    )


def _refine_minimum(lo, hi, x, external, controller) -> Tuple[Decimal, Decimal]:
    h = (hi - lo) / 10 ** 12
    for _ in range(BISECTION_ROUNDS):
        mid = (lo + hi) / 2
        if mid + h >= hi:
            break
        if _margin(mid + h, x, external, controller) < _margin(mid, x, external, controller):
            lo = mid
        else:
            hi = mid
    u = (lo + hi) / 2
    return u, _margin(u, x, external, controller)


def _crossing(curve, x, external, controller) -> Optional[Decimal]:
    for (u0, m0), (u1, m1) in zip(curve, curve[1:]):
        if m0 >= 0 > m1:
            lo, hi = u0, u1
            for _ in range(BISECTION_ROUNDS):
                mid = (lo + hi) / 2
                if _margin(mid, x, external, controller) >= 0:
                    lo = mid
                else:
                    hi = mid
            return hi
    if curve and curve[0][1] < 0:
        return curve[0][0]
    return None


@_utils.fixed_point
def max_credit_fraction(
        slope1: Numberish,
        u_optimal: Numberish = DEFAULT_U_OPTIMAL,
        gain: Numberish = DEFAULT_GAIN,
        base_rate: Numberish = 0
) -> Decimal:
    """
    Largest X for which the external rate at the kink, ``base_rate + slope1``, covers the controller rate
    ``gain * X*u_optimal / (1 - X*u_optimal)``. At the defaults this is ``25*slope1 / (3 + 20*slope1)``.
    """
    r = _utils.to_decimal(base_rate) + _utils.to_decimal(slope1)
    u_optimal = _utils.to_decimal(u_optimal)
    gain = _utils.to_decimal(gain)
    if r < 0:
        raise OutOfRange(f"slope1 must be >= 0, got {slope1}")
    if not 0 < u_optimal < 1:
        raise OutOfRange(f"u_optimal must be in (0, 1), got {u_optimal}")
    return r / (u_optimal * (gain + r))


def credit_line_amount(x: Numberish, counterassets: Numberish) -> Decimal:
    x = _utils.to_decimal(x)
    counterassets = _utils.to_decimal(counterassets)
    if x < 0 or counterassets < 0:
        raise OutOfRange("credit fraction and counterassets must be >= 0")
    return _utils.quantize(x * counterassets)


@_utils.fixed_point
def absorbable_liquidity(
        target_rate: Numberish,
        controller: ControllerParams = ControllerParams(),
        counterassets: Numberish = 0
) -> Decimal:
    """Stablecoins the core pool absorbs before the controller rate reaches `target_rate`"""
    target = _utils.to_decimal(target_rate)
    if target < 0:
        raise OutOfRange(f"target rate must be >= 0, got {target}")
    e = target / (controller.gain + target)
    return e * _utils.to_decimal(counterassets)


@_utils.fixed_point
def b2s_credit_size(absorbable: Numberish, worst_case_drawdown: Numberish) -> Decimal:
    """
    Size a counterparty vault deposit so that its worst case drawdown releases at most `absorbable`
    unbacked stablecoins

    :raises OutOfRange: if the drawdown is not in (0, 1]
    """
    d = _utils.to_decimal(worst_case_drawdown)
    if not 0 < d <= 1:
        raise OutOfRange(f"worst case drawdown must be in (0, 1], got {d}")
    return _utils.to_decimal(absorbable) / d


@_utils.fixed_point
def historical_worst_drawdown(pnl_history: Sequence[Numberish], credit_line: Numberish = 1) -> Decimal:
    """
    Deepest undercollateralization of a vault funded with `credit_line` along a historical trader P&L series
    (positive values: traders win)
    """
    credit_line = _utils.to_decimal(credit_line)
    if credit_line <= 0:
        raise OutOfRange(f"credit line must be > 0, got {credit_line}")

    vault = credit_line
    worst = Decimal(0)
    for pnl in pnl_history:
        vault = max(Decimal(0), vault - _utils.to_decimal(pnl))
        worst = max(worst, 1 - vault / credit_line)
    return worst


@_utils.fixed_point
def yield_breakdown(
        credit_borrowed: Numberish,
        external_rate: Numberish,
        reserve_factor: Numberish,
        lend_supply: Numberish,
        lend_rate: Numberish,
        pool_tvl: Numberish
) -> YieldBreakdown:
    """
    :raises OutOfRange: if `pool_tvl` is not positive
    """
    tvl = _utils.to_decimal(pool_tvl)
    if tvl <= 0:
        raise OutOfRange(f"pool TVL must be > 0, got {tvl}")
    credit_interest = _utils.to_decimal(credit_borrowed) * _utils.to_decimal(external_rate)
    protocol_share = credit_interest * _utils.to_decimal(reserve_factor)
    supplier_share = credit_interest - protocol_share
    lend_interest = _utils.to_decimal(lend_supply) * _utils.to_decimal(lend_rate)
    return YieldBreakdown(
        credit_interest=credit_interest,
        supplier_share=supplier_share,
        protocol_share=protocol_share,
        lend_interest=lend_interest,
        total_flow=supplier_share + lend_interest,
        pool_tvl=tvl,
    )


def endogenous_yield(
        credit_borrowed: Numberish,
        external_rate: Numberish,
        reserve_factor: Numberish,
        lend_supply: Numberish,
        lend_rate: Numberish,
        pool_tvl: Numberish
) -> Decimal:
    """Annual yield of the core pool sustained by the credit line's interest and the Lend market"""
    return yield_breakdown(credit_borrowed, external_rate, reserve_factor, lend_supply, lend_rate, pool_tvl).endogenous_yield


# scenario level -------------------------------------------------------------------------------------------

def _cost_basis(m: MarketConfig) -> str:
    p = m.rate_params
    return (
        f"{m.name}: u_optimal={_utils.fmt(p.u_optimal)} slope1={_utils.fmt(p.slope1)} "
        f"slope2={_utils.fmt(p.slope2)} base_rate={_utils.fmt(p.base_rate)} "
        f"reserve_factor={_utils.fmt(m.reserve_factor)}"
    )


@_utils.fixed_point
def resolve_credit_lines(config: ScenarioConfig) -> Tuple[ScenarioConfig, List[CreditLine]]:
    """
    Resolve every ``"auto"`` credit line and drawdown of `config`.

      - B2F markets: :func:`max_credit_fraction` at the market's kink, times the pool counterassets
      - B2S vault: :func:`absorbable_liquidity` at the perps target rate, divided by the worst case
        drawdown (from :func:`historical_worst_drawdown` if ``"auto"``)

    :return: the resolved config and the credit lines in market order (perps last)
    :raises RangeError: if an ``"auto"`` drawdown cannot be resolved
    """
    counter = config.pool.counter
    markets = []
    lines = []

    for i, m in enumerate(config.external_markets):
        auto = m.credit_line == AUTO
        if auto:
            x = max_credit_fraction(m.rate_params.slope1, m.rate_params.u_optimal, config.controller.gain, m.rate_params.base_rate)
            size = credit_line_amount(x, counter)
            lg.info(f"{m.name}: auto credit line {size} (X={x})")
            m = replace(m, credit_line=size)
        else:
            x = m.credit_line / counter
        markets.append(m)
        lines.append(CreditLine(
            facilitator_kind=FacilitatorKind.B2F_LENDING_MARKET,
            size=m.credit_line,
            size_fraction_x=x,
            cost_basis=_cost_basis(m),
            name=m.name,
            auto=auto,
        ))

    if sum(1 for line in lines if line.auto) > 1:
        lg.warning("several auto credit lines are sized independently against the same core pool")

    perps = config.perps
    if perps is not None:
        drawdown = perps.worst_case_drawdown
        if drawdown == AUTO:
            if not perps.pnl_history:
                raise RangeError("\"auto\" requires a pnl_history", path="perps.worst_case_drawdown")
            drawdown = historical_worst_drawdown(perps.pnl_history)
            if drawdown == 0:
                raise RangeError("the P&L history never undercollateralizes the vault", path="perps.worst_case_drawdown")

        absorbable = absorbable_liquidity(perps.absorb_target_rate, config.controller, counter)
        auto = perps.credit_line == AUTO
        if auto:
            size = _utils.quantize(b2s_credit_size(absorbable, drawdown))
            lg.info(f"perps: auto credit line {size} (absorbable {absorbable}, drawdown {drawdown})")
        else:
            size = perps.credit_line
        perps = replace(perps, credit_line=size, worst_case_drawdown=drawdown)
        lines.append(CreditLine(
            facilitator_kind=FacilitatorKind.B2S_PERPS_VAULT,
            size=size,
            cost_basis=f"perps: absorb_target_rate={_utils.fmt(perps.absorb_target_rate)}",
            name="perps",
            auto=auto,
            absorbable=absorbable,
            worst_case_drawdown=drawdown,
        ))

    return replace(config, external_markets=tuple(markets), perps=perps), lines


def underwrite(config: ScenarioConfig) -> List[UnderwritingResult]:
    """Resolve the credit lines of `config` and check every B2F line against its market's rate curve"""
    config, lines = resolve_credit_lines(config)
    grid = utilization_grid(config.grid_points)
    res = []
    for line in lines:
        if line.facilitator_kind == FacilitatorKind.B2F_LENDING_MARKET:
            m = config.market(line.name)
            verdict = check_condition(line.size_fraction_x, m.rate_params, config.controller, grid)
            res.append(UnderwritingResult(line, verdict))
        else:
            res.append(UnderwritingResult(line))
    return res


@_utils.fixed_point
def scenario_yield(config: ScenarioConfig) -> List[Dict]:
    """
    Endogenous yield of the core pool with every external market borrowed to its kink. Lend flows are
    attributed once, to the first market (or stand alone when there are no markets).

    :return: one breakdown dict per market
    """
    config, _ = resolve_credit_lines(config)
    tvl = config.pool.stable + config.pool.counter
    lend = config.endogenous_yield or YieldConfig()
    res = []

    if not config.external_markets:
        b = yield_breakdown(0, 0, 0, lend.lend_supply, lend.lend_rate, tvl)
        return [{"market": None, "borrowed": Decimal(0), "external_rate": Decimal(0), **b.to_dict()}]

    for i, m in enumerate(config.external_markets):
        borrowed = m.credit_line * m.rate_params.u_optimal
        rate = rates.piecewise_rate(m.rate_params.u_optimal, m.rate_params)
        supply, lend_rate = (lend.lend_supply, lend.lend_rate) if i == 0 else (0, 0)
        b = yield_breakdown(borrowed, rate, m.reserve_factor, supply, lend_rate, tvl)
        res.append({"market": m.name, "borrowed": borrowed, "external_rate": rate, **b.to_dict()})
    return res

