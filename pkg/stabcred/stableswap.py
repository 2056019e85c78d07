"""
StableSwap math for the two-asset core liquidity pool: invariant solving, fee-less swaps, spot price and
balance fractions.

Amounts are Decimals with 18 fractional digits. The invariant is

    Ann * (x + y) + D = Ann * D + D**3 / (4 * x * y),    Ann = A * n

which is the StableSwap form ``A n^n sum(x) + D = A D n^n + D^(n+1) / (n^n prod(x))`` with the amplification
coefficient scaled the way deployed pools store it (``Ann = A * N_COINS``). Both D and the output reserve
are found with Newton iteration capped at :data:`~stabcred.constants.MAX_ITERATIONS` rounds; iteration stops
once successive iterates differ by at most one fixed-point unit.
"""

import logging
from dataclasses import dataclass
from decimal import Decimal, ROUND_DOWN
from typing import Dict, Tuple

from stabcred import _utils
from stabcred.constants import Direction, MAX_ITERATIONS, N_COINS, UNIT, Numberish
from stabcred.exceptions import InvalidPool, NonConvergence, DrainedPool, OutOfRange

lg = logging.getLogger(__name__)


@dataclass(frozen=True)
class PoolState:
    """
    Reserves and amplification of a two-asset StableSwap pool

    :param stable_reserve: amount of the native stablecoin in the pool
    :param counter_reserve: amount of counterassets in the pool
    :param amplification: amplification coefficient A (>= 1)
    """
    stable_reserve: Decimal
    counter_reserve: Decimal
    amplification: int

    @staticmethod
    def from_amounts(stable: Numberish, counter: Numberish, amplification: int) -> "PoolState":
        """Create a PoolState, quantizing reserves to 18 fractional digits"""
        return PoolState(_utils.quantize(stable), _utils.quantize(counter), int(amplification))

    @property
    def reserves(self) -> Tuple[Decimal, Decimal]:
        return self.stable_reserve, self.counter_reserve

    @property
    def ann(self) -> int:
        return self.amplification * N_COINS

    def __validate__(self) -> None:
        if self.stable_reserve <= 0 or self.counter_reserve <= 0:
            raise InvalidPool(f"reserves must be positive, got {self.stable_reserve} / {self.counter_reserve}")
        if self.amplification < 1:
            raise InvalidPool(f"amplification must be >= 1, got {self.amplification}")

    def to_dict(self) -> Dict:
        return {
            "stable_reserve": self.stable_reserve,
            "counter_reserve": self.counter_reserve,
            "amplification": self.amplification,
        }

    @staticmethod
    def from_dict(x: Dict) -> "PoolState":
        return PoolState.from_amounts(x["stable_reserve"], x["counter_reserve"], x["amplification"])


@dataclass(frozen=True)
class SwapQuote:
    """Result of a fee-less swap against a :class:`PoolState`"""
    amount_in: Decimal
    amount_out: Decimal
    direction: Direction
    pre_state: PoolState
    post_state: PoolState
    post_fraction_stable: Decimal
    post_spot_price: Decimal

    @property
    def effective_price(self) -> Decimal:
        """Average execution price of the trade (out / in)"""
        if self.amount_in == 0:
            return self.post_spot_price
        return self.amount_out / self.amount_in

    def to_dict(self) -> Dict:
        return {
            "amount_in": self.amount_in,
            "amount_out": self.amount_out,
            "amount_out_rounded": _utils.round_tokens(self.amount_out),
            "direction": self.direction.to_str(),
            "effective_price": self.effective_price,
            "post_fraction_stable": self.post_fraction_stable,
            "post_spot_price": self.post_spot_price,
            "post_state": self.post_state.to_dict(),
        }


@_utils.fixed_point
def compute_invariant(pool: PoolState) -> Decimal:
    """
    Solve the StableSwap invariant D for `pool`

    :raises InvalidPool: if a reserve is not positive
    :raises NonConvergence: if Newton iteration does not converge
    """
    pool.__validate__()
    return _get_d(pool.stable_reserve, pool.counter_reserve, pool.ann)


def _get_d(x: Decimal, y: Decimal, ann: int) -> Decimal:
    s = x + y
    d = s
    for i in range(MAX_ITERATIONS):
        d_p = d * d / (x * N_COINS) * d / (y * N_COINS)
        d_prev = d
        d = (ann * s + d_p * N_COINS) * d / ((ann - 1) * d + (N_COINS + 1) * d_p)
        if abs(d - d_prev) <= UNIT:
            return d
    raise NonConvergence(f"invariant did not converge after {MAX_ITERATIONS} iterations")


def _get_y(x: Decimal, d: Decimal, ann: int) -> Decimal:
    """Reserve on the other side of the pool when one side holds `x`, keeping D fixed"""
    c = d * d / (x * N_COINS) * d / (ann * N_COINS)
    b = x + d / ann
    y = d
    for i in range(MAX_ITERATIONS):
        y_prev = y
        y = (y * y + c) / (2 * y + b - d)
        if abs(y - y_prev) <= UNIT:
            return y
    raise NonConvergence(f"output reserve did not converge after {MAX_ITERATIONS} iterations")


def invariant_residual(pool: PoolState, d: Decimal) -> Decimal:
    """Left minus right hand side of the invariant for a given D. Zero on the curve."""
    x, y = pool.reserves
    ann = pool.ann
    return ann * (x + y) + d - ann * d - d ** 3 / (4 * x * y)


@_utils.fixed_point
def swap(pool: PoolState, amount_in: Numberish, direction: Direction) -> SwapQuote:
    """
    Quote a fee-less swap of `amount_in` into `pool`. D is held fixed and the invariant is solved for the
    output-side reserve. The output is rounded down to 18 fractional digits.

    :raises InvalidPool: if a reserve is not positive
    :raises DrainedPool: if the output reserve would not stay positive
    """
    pool.__validate__()
    amount_in = _utils.quantize(amount_in)
    direction = Direction(direction)
    if amount_in < 0:
        raise OutOfRange(f"amount_in must be >= 0, got {amount_in}")

    if amount_in == 0:
        return SwapQuote(
            amount_in=amount_in,
            amount_out=Decimal(0).quantize(UNIT),
            direction=direction,
            pre_state=pool,
            post_state=pool,
            post_fraction_stable=fraction_stable(pool),
            post_spot_price=spot_price(pool),
        )

    if direction == Direction.STABLE_IN:
        x_old, y_old = pool.stable_reserve, pool.counter_reserve
    else:
        x_old, y_old = pool.counter_reserve, pool.stable_reserve

    d = _get_d(pool.stable_reserve, pool.counter_reserve, pool.ann)
    x_new = x_old + amount_in
    y_new = _get_y(x_new, d, pool.ann)
    amount_out = (y_old - y_new).quantize(UNIT, rounding=ROUND_DOWN)
    if amount_out < 0:
        amount_out = Decimal(0).quantize(UNIT)

    y_post = y_old - amount_out
    if y_new <= 0 or y_post <= 0:
        raise DrainedPool(f"swapping {amount_in} would drain the output reserve of {y_old}")

    if direction == Direction.STABLE_IN:
        post = PoolState(x_new, y_post, pool.amplification)
    else:
        post = PoolState(y_post, x_new, pool.amplification)

    lg.debug(f"swap {amount_in} {direction.to_str()} -> {amount_out}")
    return SwapQuote(
        amount_in=amount_in,
        amount_out=amount_out,
        direction=direction,
        pre_state=pool,
        post_state=post,
        post_fraction_stable=fraction_stable(post),
        post_spot_price=spot_price(post),
    )


@_utils.fixed_point
def spot_price(pool: PoolState) -> Decimal:
    """
    Marginal price of the stablecoin in counterassets, i.e. the limit of out / in for an infinitesimal
    stable-in trade. Derived from the gradient of the invariant.

    Not to be confused with :attr:`SwapQuote.effective_price`, the average price of a finite trade. After
    selling 400,000 stablecoins into a balanced 1M/1M pool at A=100 the trade averaged ~0.995 while the
    marginal price left behind is ~0.989.
    """
    pool.__validate__()
    x, y = pool.reserves
    ann = pool.ann
    d = _get_d(x, y, ann)
    d3 = d ** 3
    dx = ann + d3 / (4 * x * x * y)
    dy = ann + d3 / (4 * x * y * y)
    return dx / dy


@_utils.fixed_point
def fraction_stable(pool: PoolState) -> Decimal:
    """Share of the stablecoin in the pool's reserves"""
    pool.__validate__()
    return pool.stable_reserve / (pool.stable_reserve + pool.counter_reserve)
