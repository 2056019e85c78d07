"""
Scenario files: a single JSON document describing the core pool, the controller, the external lending markets,
the perps vault, the CDP book and the scripted actions of a simulation run. The schema is documented in
``docs/scenario.md``.

:func:`load_scenario` parses and validates a file into a frozen :class:`ScenarioConfig` tree with defaults
applied; :func:`emit_scenario` is its inverse. Numbers may be given as JSON numbers or decimal strings; JSON
numbers are parsed straight into :class:`~decimal.Decimal` so no value passes through a binary float.
Credit lines and the perps drawdown may be ``"auto"``; they are resolved by
:func:`stabcred.underwriting.resolve_credit_lines` before simulation.
"""

import json
import logging
from dataclasses import dataclass
from decimal import Decimal
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

from stabcred import _utils
from stabcred.constants import (
    DEFAULT_DT, DEFAULT_GAIN, DEFAULT_GRID_POINTS, DEFAULT_HORIZON, DEFAULT_LIQUIDATION_BONUS, DEFAULT_U_OPTIMAL,
    Direction, Pathish
)
from stabcred.exceptions import ParseError, SchemaError, RangeError, InvalidEntry
from stabcred.rates import ControllerParams, PiecewiseRateParams, rate_from_ray
from stabcred.risk import RiskRegisterEntry
from stabcred.stableswap import PoolState

lg = logging.getLogger(__name__)

AUTO = "auto"
CreditSize = Union[Decimal, str]

PRICE_PATH_KINDS = ("fixed", "gbm")
UTILIZATION_PATH_KINDS = ("fixed", "random_walk")
PNL_MODEL_KINDS = ("fixed", "bernoulli", "gaussian")
RNG_ALGORITHMS = ("philox", "pcg64")
ACTION_KINDS = ("psm_swap_in", "psm_redeem", "amo_trade", "backfill", "set_rate_params", "set_controller_gain")
RATE_FIELDS = ("u_optimal", "slope1", "slope2", "base_rate")

_MISSING = object()


@dataclass(frozen=True)
class PoolConfig:
    stable: Decimal
    counter: Decimal
    amplification: int

    def to_pool_state(self) -> PoolState:
        return PoolState.from_amounts(self.stable, self.counter, self.amplification)

    def to_dict(self) -> Dict:
        return {"stable": self.stable, "counter": self.counter, "amplification": self.amplification}


@dataclass(frozen=True)
class UtilizationPathConfig:
    """
    Borrow demand of a lending market as a utilization path

      - fixed: ``values[t]`` at step t, the last value holds afterwards
      - random_walk: starts at `start`, moves by a normal step of `step_sigma` and stays in [lower, upper]
    """
    kind: str = "fixed"
    values: Tuple[Decimal, ...] = (Decimal(0),)
    start: Decimal = Decimal(0)
    step_sigma: Decimal = Decimal(0)
    lower: Decimal = Decimal(0)
    upper: Decimal = Decimal("0.99")

    def to_dict(self) -> Dict:
        if self.kind == "fixed":
            return {"kind": self.kind, "values": list(self.values)}
        return {
            "kind": self.kind, "start": self.start, "step_sigma": self.step_sigma,
            "lower": self.lower, "upper": self.upper
        }


@dataclass(frozen=True)
class MarketConfig:
    name: str
    rate_params: PiecewiseRateParams
    reserve_factor: Decimal = Decimal(0)
    credit_line: CreditSize = AUTO
    utilization_path: UtilizationPathConfig = UtilizationPathConfig()
    sell_to_pool: bool = False

    def to_dict(self) -> Dict:
        return {
            "name": self.name,
            "rate_params": self.rate_params.to_dict(),
            "reserve_factor": self.reserve_factor,
            "credit_line": self.credit_line,
            "utilization_path": self.utilization_path.to_dict(),
            "sell_to_pool": self.sell_to_pool,
        }


@dataclass(frozen=True)
class PnlModelConfig:
    """
    Trader profit and loss per step, in stablecoins (positive: traders win)

      - fixed: ``values[t]`` at step t, zero after the sequence ends
      - bernoulli: `win_size` with probability `p`, otherwise ``-loss_size``
      - gaussian: normal with mean `mu` and standard deviation `sigma`
    """
    kind: str = "fixed"
    values: Tuple[Decimal, ...] = ()
    p: Decimal = Decimal("0.5")
    win_size: Decimal = Decimal(0)
    loss_size: Decimal = Decimal(0)
    mu: Decimal = Decimal(0)
    sigma: Decimal = Decimal(0)

    def to_dict(self) -> Dict:
        if self.kind == "fixed":
            return {"kind": self.kind, "values": list(self.values)}
        elif self.kind == "bernoulli":
            return {"kind": self.kind, "p": self.p, "win_size": self.win_size, "loss_size": self.loss_size}
        return {"kind": self.kind, "mu": self.mu, "sigma": self.sigma}


@dataclass(frozen=True)
class PerpsConfig:
    """
    :param pnl_history: historical trader P&L per step as fractions of the credit line, used to resolve
        an ``"auto"`` worst case drawdown
    :param absorb_target_rate: controller rate the core pool may be pushed to when sizing an ``"auto"`` line
    """
    credit_line: CreditSize = AUTO
    pnl_model: PnlModelConfig = PnlModelConfig()
    worst_case_drawdown: CreditSize = AUTO
    pnl_history: Tuple[Decimal, ...] = ()
    absorb_target_rate: Decimal = Decimal("0.10")

    def to_dict(self) -> Dict:
        return {
            "credit_line": self.credit_line,
            "pnl_model": self.pnl_model.to_dict(),
            "worst_case_drawdown": self.worst_case_drawdown,
            "pnl_history": list(self.pnl_history),
            "absorb_target_rate": self.absorb_target_rate,
        }


@dataclass(frozen=True)
class PositionConfig:
    owner: str
    collateral_value: Decimal
    liquidation_threshold: Decimal
    ltv_cap: Decimal
    debt: Decimal = Decimal(0)

    def to_dict(self) -> Dict:
        return {
            "owner": self.owner,
            "collateral_value": self.collateral_value,
            "liquidation_threshold": self.liquidation_threshold,
            "ltv_cap": self.ltv_cap,
            "debt": self.debt,
        }


@dataclass(frozen=True)
class PricePathConfig:
    """
    Collateral price level relative to the start of the run

      - fixed: ``values[t]`` at step t, the last value holds afterwards
      - gbm: geometric Brownian motion with annual drift `mu` and volatility `sigma`
    """
    kind: str = "fixed"
    values: Tuple[Decimal, ...] = (Decimal(1),)
    mu: Decimal = Decimal(0)
    sigma: Decimal = Decimal(0)

    def to_dict(self) -> Dict:
        if self.kind == "fixed":
            return {"kind": self.kind, "values": list(self.values)}
        return {"kind": self.kind, "mu": self.mu, "sigma": self.sigma}


@dataclass(frozen=True)
class CdpBookConfig:
    positions: Tuple[PositionConfig, ...] = ()
    price_path: PricePathConfig = PricePathConfig()
    interest_rate: Decimal = Decimal(0)
    liquidation_bonus: Decimal = DEFAULT_LIQUIDATION_BONUS

    def to_dict(self) -> Dict:
        return {
            "positions": [p.to_dict() for p in self.positions],
            "price_path": self.price_path.to_dict(),
            "interest_rate": self.interest_rate,
            "liquidation_bonus": self.liquidation_bonus,
        }


@dataclass(frozen=True)
class PsmConfig:
    stable_reserve: Decimal
    counter_reserve: Decimal = Decimal(0)

    def to_dict(self) -> Dict:
        return {"stable_reserve": self.stable_reserve, "counter_reserve": self.counter_reserve}


@dataclass(frozen=True)
class YieldConfig:
    """Supply and rate of the protocol's own lending market (Lend) directing interest to the core pool"""
    lend_supply: Decimal = Decimal(0)
    lend_rate: Decimal = Decimal(0)

    def to_dict(self) -> Dict:
        return {"lend_supply": self.lend_supply, "lend_rate": self.lend_rate}


@dataclass(frozen=True)
class ActionConfig:
    """
    A scripted action executed before the facilitators advance at `step`. Which of the optional fields
    are set depends on `kind`.
    """
    step: int
    kind: str
    amount: Optional[Decimal] = None
    direction: Optional[Direction] = None
    market: Optional[str] = None
    rate_updates: Tuple[Tuple[str, Decimal], ...] = ()
    gain: Optional[Decimal] = None

    def to_dict(self) -> Dict:
        res = {"step": self.step, "kind": self.kind}
        if self.amount is not None:
            res["amount"] = self.amount
        if self.direction is not None:
            res["direction"] = self.direction.to_str()
        if self.market is not None:
            res["market"] = self.market
        if self.rate_updates:
            res["rate_params"] = dict(self.rate_updates)
        if self.gain is not None:
            res["gain"] = self.gain
        return res


@dataclass(frozen=True)
class RngConfig:
    algorithm: str = "philox"
    seed: int = 0

    def to_dict(self) -> Dict:
        return {"algorithm": self.algorithm, "seed": self.seed}


@dataclass(frozen=True)
class ScenarioConfig:
    pool: PoolConfig
    controller: ControllerParams = ControllerParams()
    external_markets: Tuple[MarketConfig, ...] = ()
    perps: Optional[PerpsConfig] = None
    cdp_book: Optional[CdpBookConfig] = None
    psm: Optional[PsmConfig] = None
    endogenous_yield: Optional[YieldConfig] = None
    actions: Tuple[ActionConfig, ...] = ()
    risks: Tuple[RiskRegisterEntry, ...] = ()
    horizon: int = DEFAULT_HORIZON
    dt: Decimal = DEFAULT_DT
    grid_points: int = DEFAULT_GRID_POINTS
    rng: RngConfig = RngConfig()

    def market(self, name: str) -> MarketConfig:
        for m in self.external_markets:
            if m.name == name:
                return m
        raise KeyError(name)

    def to_dict(self) -> Dict:
        res = {
            "pool": self.pool.to_dict(),
            "controller": self.controller.to_dict(),
            "external_markets": [m.to_dict() for m in self.external_markets],
            "actions": [a.to_dict() for a in self.actions],
            "risks": [r.to_dict() for r in self.risks],
            "horizon": self.horizon,
            "dt": self.dt,
            "grid_points": self.grid_points,
            "rng": self.rng.to_dict(),
        }
        for k in ("perps", "cdp_book", "psm", "endogenous_yield"):
            v = getattr(self, k)
            if v is not None:
                res[k] = v.to_dict()
        return res

    @staticmethod
    def from_dict(x: Dict) -> "ScenarioConfig":
        return _parse_config(_Fields(x, ""))

    @property
    def hash(self) -> str:
        """sha256 of the canonical JSON representation"""
        return _utils.sha256(self.to_dict())


# loading --------------------------------------------------------------------------------------------------

def load_scenario(path: Pathish) -> ScenarioConfig:
    """
    Load and validate a scenario file

    :raises ParseError: if the file cannot be read or is not well-formed JSON
    :raises SchemaError: on a missing, unknown or mistyped field
    :raises RangeError: on a field value outside its valid range
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ParseError(f"cannot read scenario file: {e}", path=str(path))
    lg.debug(f"loading scenario {path}")
    return parse_scenario(text)


def parse_scenario(text: str) -> ScenarioConfig:
    try:
        x = json.loads(text, parse_float=Decimal)
    except json.JSONDecodeError as e:
        raise ParseError(f"malformed JSON at line {e.lineno} column {e.colno}: {e.msg}")
    return ScenarioConfig.from_dict(x)


def emit_scenario(config: ScenarioConfig, indent: Optional[int] = 2) -> str:
    """Serialize `config` so that ``parse_scenario(emit_scenario(config)) == config``"""
    return _utils.canonical_json(config.to_dict(), indent=indent)


class _Fields:
    """Typed access to the fields of a JSON object that reports errors with the field path"""

    def __init__(self, x: Any, path: str) -> None:
        if not isinstance(x, dict):
            raise SchemaError("expected an object", path=path or "<root>")
        self.x = x
        self.path = path

    def sub(self, key: Union[str, int]) -> str:
        if isinstance(key, int):
            return f"{self.path}[{key}]"
        return f"{self.path}.{key}" if self.path else key

    def has(self, key: str) -> bool:
        return key in self.x

    def check_keys(self, allowed) -> None:
        for k in self.x.keys():
            if k not in allowed:
                raise SchemaError("unknown field", path=self.sub(k))

    def get(self, key: str, default=_MISSING) -> Any:
        if key not in self.x:
            if default is _MISSING:
                raise SchemaError("required field is missing", path=self.sub(key))
            return default
        return self.x[key]

    def obj(self, key: str) -> "_Fields":
        return _Fields(self.get(key), self.sub(key))

    def objects(self, key: str) -> List["_Fields"]:
        items = self.get(key, [])
        if not isinstance(items, list):
            raise SchemaError("expected a list", path=self.sub(key))
        return [_Fields(v, f"{self.sub(key)}[{i}]") for i, v in enumerate(items)]

    def decimal(self, key: str, default=_MISSING, lo=None, hi=None, lo_open=False, hi_open=False) -> Decimal:
        value = self.get(key, default)
        return _decimal(value, self.sub(key), lo, hi, lo_open, hi_open)

    def decimals(self, key: str, default=_MISSING, lo=None, hi=None) -> Tuple[Decimal, ...]:
        values = self.get(key, default)
        if not isinstance(values, (list, tuple)):
            raise SchemaError("expected a list of numbers", path=self.sub(key))
        return tuple(_decimal(v, f"{self.sub(key)}[{i}]", lo, hi) for i, v in enumerate(values))

    def credit(self, key: str) -> CreditSize:
        value = self.get(key, AUTO)
        if value == AUTO:
            return AUTO
        return _decimal(value, self.sub(key), lo=0)

    def integer(self, key: str, default=_MISSING, lo=None) -> int:
        value = self.get(key, default)
        if isinstance(value, bool) or not isinstance(value, int):
            raise SchemaError("expected an integer", path=self.sub(key))
        if lo is not None and value < lo:
            raise RangeError(f"must be >= {lo}, got {value}", path=self.sub(key))
        return value

    def string(self, key: str, default=_MISSING, choices=None) -> str:
        value = self.get(key, default)
        if not isinstance(value, str):
            raise SchemaError("expected a string", path=self.sub(key))
        if choices is not None and value not in choices:
            raise SchemaError(f"must be one of {', '.join(choices)}; got '{value}'", path=self.sub(key))
        return value

    def boolean(self, key: str, default=_MISSING) -> bool:
        value = self.get(key, default)
        if not isinstance(value, bool):
            raise SchemaError("expected true or false", path=self.sub(key))
        return value


def _decimal(value: Any, path: str, lo=None, hi=None, lo_open=False, hi_open=False) -> Decimal:
    if isinstance(value, bool) or not isinstance(value, (Decimal, int, str)):
        raise SchemaError("expected a number or a decimal string", path=path)
    try:
        x = _utils.to_decimal(value)
    except ValueError:
        raise SchemaError(f"not a decimal number: '{value}'", path=path)
    if not x.is_finite():
        raise RangeError("must be finite", path=path)

    if lo is not None and (x < lo or (lo_open and x == lo)):
        raise RangeError(f"must be {'>' if lo_open else '>='} {lo}, got {x}", path=path)
    if hi is not None and (x > hi or (hi_open and x == hi)):
        raise RangeError(f"must be {'<' if hi_open else '<='} {hi}, got {x}", path=path)
    return x


def _parse_config(f: _Fields) -> ScenarioConfig:
    f.check_keys((
        "pool", "controller", "external_markets", "perps", "cdp_book", "psm", "endogenous_yield", "actions",
        "risks", "horizon", "dt", "grid_points", "rng"
    ))
    pool = _parse_pool(f.obj("pool"))

    controller = ControllerParams()
    if f.has("controller"):
        c = f.obj("controller")
        c.check_keys(("gain",))
        controller = ControllerParams(gain=c.decimal("gain", DEFAULT_GAIN, lo=0, lo_open=True))

    markets = tuple(_parse_market(m) for m in f.objects("external_markets"))
    names = [m.name for m in markets]
    if len(set(names)) != len(names):
        raise SchemaError("market names must be unique", path=f.sub("external_markets"))

    horizon = f.integer("horizon", DEFAULT_HORIZON, lo=1)
    actions = tuple(_parse_action(a, horizon) for a in f.objects("actions"))

    risks = []
    for i, r in enumerate(f.objects("risks")):
        try:
            entry = RiskRegisterEntry.from_dict(r.x)
        except KeyError as e:
            raise SchemaError(f"missing or unknown value {e}", path=r.path)
        except (ValueError, TypeError) as e:
            raise SchemaError(str(e), path=r.path)
        try:
            entry.__validate__()
        except InvalidEntry as e:
            raise RangeError(str(e), path=r.path)
        risks.append(entry)

    rng = RngConfig()
    if f.has("rng"):
        r = f.obj("rng")
        r.check_keys(("algorithm", "seed"))
        rng = RngConfig(algorithm=r.string("algorithm", "philox", RNG_ALGORITHMS), seed=r.integer("seed", 0, lo=0))

    config = ScenarioConfig(
        pool=pool,
        controller=controller,
        external_markets=markets,
        perps=_parse_perps(f.obj("perps")) if f.has("perps") else None,
        cdp_book=_parse_cdp_book(f.obj("cdp_book")) if f.has("cdp_book") else None,
        psm=_parse_psm(f.obj("psm")) if f.has("psm") else None,
        endogenous_yield=_parse_yield(f.obj("endogenous_yield")) if f.has("endogenous_yield") else None,
        actions=actions,
        risks=tuple(risks),
        horizon=horizon,
        dt=f.decimal("dt", DEFAULT_DT, lo=0, lo_open=True),
        grid_points=f.integer("grid_points", DEFAULT_GRID_POINTS, lo=2),
        rng=rng,
    )
    _check_action_targets(config, f)
    return config


def _parse_pool(f: _Fields) -> PoolConfig:
    f.check_keys(("stable", "counter", "amplification"))
    return PoolConfig(
        stable=f.decimal("stable", lo=0, lo_open=True),
        counter=f.decimal("counter", lo=0, lo_open=True),
        amplification=f.integer("amplification", lo=1),
    )


def _parse_rate_params(f: _Fields) -> PiecewiseRateParams:
    f.check_keys(RATE_FIELDS + ("ray",))
    ray = f.boolean("ray", False)

    def rate(key, default=_MISSING):
        x = f.decimal(key, default, lo=0)
        return rate_from_ray(x) if ray else x

    return PiecewiseRateParams(
        u_optimal=f.decimal("u_optimal", DEFAULT_U_OPTIMAL, lo=0, hi=1, lo_open=True, hi_open=True),
        slope1=rate("slope1"),
        slope2=rate("slope2", Decimal(0)),
        base_rate=rate("base_rate", Decimal(0)),
    )


def _parse_utilization_path(f: _Fields) -> UtilizationPathConfig:
    kind = f.string("kind", "fixed", UTILIZATION_PATH_KINDS)
    if kind == "fixed":
        f.check_keys(("kind", "values"))
        values = f.decimals("values", (Decimal(0),), lo=0, hi=1)
        if not values:
            raise SchemaError("must not be empty", path=f.sub("values"))
        return UtilizationPathConfig(kind=kind, values=values)

    f.check_keys(("kind", "start", "step_sigma", "lower", "upper"))
    lower = f.decimal("lower", Decimal(0), lo=0, hi=1)
    upper = f.decimal("upper", Decimal("0.99"), lo=lower, hi=1)
    return UtilizationPathConfig(
        kind=kind,
        start=f.decimal("start", lower, lo=lower, hi=upper),
        step_sigma=f.decimal("step_sigma", lo=0),
        lower=lower,
        upper=upper,
    )


def _parse_market(f: _Fields) -> MarketConfig:
    f.check_keys(("name", "rate_params", "reserve_factor", "credit_line", "utilization_path", "sell_to_pool"))
    path = UtilizationPathConfig()
    if f.has("utilization_path"):
        path = _parse_utilization_path(f.obj("utilization_path"))
    return MarketConfig(
        name=f.string("name", f"market{f.path.rsplit('[', 1)[-1].rstrip(']')}"),
        rate_params=_parse_rate_params(f.obj("rate_params")),
        reserve_factor=f.decimal("reserve_factor", Decimal(0), lo=0, hi=1),
        credit_line=f.credit("credit_line"),
        utilization_path=path,
        sell_to_pool=f.boolean("sell_to_pool", False),
    )


def _parse_pnl_model(f: _Fields) -> PnlModelConfig:
    kind = f.string("kind", "fixed", PNL_MODEL_KINDS)
    if kind == "fixed":
        f.check_keys(("kind", "values"))
        return PnlModelConfig(kind=kind, values=f.decimals("values", ()))
    elif kind == "bernoulli":
        f.check_keys(("kind", "p", "win_size", "loss_size"))
        return PnlModelConfig(
            kind=kind,
            p=f.decimal("p", lo=0, hi=1),
            win_size=f.decimal("win_size", lo=0),
            loss_size=f.decimal("loss_size", lo=0),
        )
    f.check_keys(("kind", "mu", "sigma"))
    return PnlModelConfig(kind=kind, mu=f.decimal("mu", Decimal(0)), sigma=f.decimal("sigma", lo=0))


def _parse_perps(f: _Fields) -> PerpsConfig:
    f.check_keys(("credit_line", "pnl_model", "worst_case_drawdown", "pnl_history", "absorb_target_rate"))
    drawdown = f.get("worst_case_drawdown", AUTO)
    if drawdown != AUTO:
        drawdown = f.decimal("worst_case_drawdown", lo=0, hi=1, lo_open=True)
    pnl_model = PnlModelConfig()
    if f.has("pnl_model"):
        pnl_model = _parse_pnl_model(f.obj("pnl_model"))
    return PerpsConfig(
        credit_line=f.credit("credit_line"),
        pnl_model=pnl_model,
        worst_case_drawdown=drawdown,
        pnl_history=f.decimals("pnl_history", ()),
        absorb_target_rate=f.decimal("absorb_target_rate", Decimal("0.10"), lo=0),
    )


def _parse_price_path(f: _Fields) -> PricePathConfig:
    kind = f.string("kind", "fixed", PRICE_PATH_KINDS)
    if kind == "fixed":
        f.check_keys(("kind", "values"))
        values = f.decimals("values", (Decimal(1),), lo=0)
        if not values:
            raise SchemaError("must not be empty", path=f.sub("values"))
        return PricePathConfig(kind=kind, values=values)
    f.check_keys(("kind", "mu", "sigma"))
    return PricePathConfig(kind=kind, mu=f.decimal("mu", Decimal(0)), sigma=f.decimal("sigma", lo=0))


def _parse_position(f: _Fields) -> PositionConfig:
    f.check_keys(("owner", "collateral_value", "liquidation_threshold", "ltv_cap", "debt"))
    threshold = f.decimal("liquidation_threshold", lo=0, hi=1, lo_open=True)
    p = PositionConfig(
        owner=f.string("owner", f.path),
        collateral_value=f.decimal("collateral_value", lo=0),
        liquidation_threshold=threshold,
        ltv_cap=f.decimal("ltv_cap", threshold, lo=0, hi=1),
        debt=f.decimal("debt", Decimal(0), lo=0),
    )
    if p.debt > p.collateral_value * p.ltv_cap:
        raise RangeError(f"debt {p.debt} exceeds the borrowing power of the collateral", path=f.sub("debt"))
    return p


def _parse_cdp_book(f: _Fields) -> CdpBookConfig:
    f.check_keys(("positions", "price_path", "interest_rate", "liquidation_bonus"))
    price_path = PricePathConfig()
    if f.has("price_path"):
        price_path = _parse_price_path(f.obj("price_path"))
    return CdpBookConfig(
        positions=tuple(_parse_position(p) for p in f.objects("positions")),
        price_path=price_path,
        interest_rate=f.decimal("interest_rate", Decimal(0), lo=0),
        liquidation_bonus=f.decimal("liquidation_bonus", DEFAULT_LIQUIDATION_BONUS, lo=0),
    )


def _parse_psm(f: _Fields) -> PsmConfig:
    f.check_keys(("stable_reserve", "counter_reserve"))
    return PsmConfig(
        stable_reserve=f.decimal("stable_reserve", lo=0),
        counter_reserve=f.decimal("counter_reserve", Decimal(0), lo=0),
    )


def _parse_yield(f: _Fields) -> YieldConfig:
    f.check_keys(("lend_supply", "lend_rate"))
    return YieldConfig(lend_supply=f.decimal("lend_supply", lo=0), lend_rate=f.decimal("lend_rate", lo=0))


def _parse_action(f: _Fields, horizon: int) -> ActionConfig:
    kind = f.string("kind", choices=ACTION_KINDS)
    step = f.integer("step", lo=0)
    if step >= horizon:
        raise RangeError(f"must be < horizon ({horizon}), got {step}", path=f.sub("step"))

    if kind in ("psm_swap_in", "psm_redeem", "backfill"):
        f.check_keys(("step", "kind", "amount"))
        return ActionConfig(step=step, kind=kind, amount=f.decimal("amount", lo=0))
    elif kind == "amo_trade":
        f.check_keys(("step", "kind", "amount", "direction"))
        try:
            direction = Direction.from_str(f.string("direction"))
        except ValueError as e:
            raise SchemaError(str(e), path=f.sub("direction"))
        return ActionConfig(step=step, kind=kind, amount=f.decimal("amount", lo=0), direction=direction)
    elif kind == "set_rate_params":
        f.check_keys(("step", "kind", "market", "rate_params"))
        r = f.obj("rate_params")
        r.check_keys(RATE_FIELDS)
        updates = []
        for k in RATE_FIELDS:
            if r.has(k):
                if k == "u_optimal":
                    updates.append((k, r.decimal(k, lo=0, hi=1, lo_open=True, hi_open=True)))
                else:
                    updates.append((k, r.decimal(k, lo=0)))
        return ActionConfig(step=step, kind=kind, market=f.string("market"), rate_updates=tuple(updates))
    else:
        f.check_keys(("step", "kind", "gain"))
        return ActionConfig(step=step, kind=kind, gain=f.decimal("gain", lo=0, lo_open=True))


def _check_action_targets(config: ScenarioConfig, f: _Fields) -> None:
    names = {m.name for m in config.external_markets}
    for i, a in enumerate(config.actions):
        path = f"actions[{i}]"
        if a.kind in ("psm_swap_in", "psm_redeem") and config.psm is None:
            raise SchemaError(f"{a.kind} requires a psm block", path=path)
        if a.kind == "set_rate_params" and a.market not in names:
            raise SchemaError(f"unknown market '{a.market}'", path=f"{path}.market")
