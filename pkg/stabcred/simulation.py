"""
Discrete time simulation of all facilitators of a scenario.

Every step the scripted actions for the step run first, then the CDP book follows the collateral price path
(interest accrual and liquidations), the external lending markets follow their borrow demand paths and the perps
vault settles the step's trader P&L. The supply ledger is checked for conservation after every step.

Randomness comes only from the scenario's rng block: :func:`make_streams` derives independent price, demand
and P&L substreams from ``(master seed, path index)``. :func:`run_simulation` is path 0, :func:`monte_carlo`
runs paths 0..n-1, optionally in a :class:`multiprocessing.Pool`, and merges the results by path index, so
summaries do not depend on the number of processes.
"""

import logging
import math
import multiprocessing
from dataclasses import dataclass, replace
from decimal import Decimal, ROUND_CEILING
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from tqdm import tqdm

import stabcred
from stabcred import _utils, cdp, ledger, rates, risk, stableswap, underwriting
from stabcred.constants import DEFAULT_QUANTILES, Direction, EventType, Numberish
from stabcred.exceptions import Divergence, OutOfRange, ScenarioInvalid
from stabcred.ledger import SupplyLedger
from stabcred.rates import ControllerParams
from stabcred.reports import SimulationReport
from stabcred.scenario import (
    ActionConfig, PnlModelConfig, PricePathConfig, ScenarioConfig, UtilizationPathConfig
)

lg = logging.getLogger(__name__)

BIT_GENERATORS = {
    "philox": np.random.Philox,
    "pcg64": np.random.PCG64,
}


@dataclass(frozen=True)
class RngStreams:
    price: np.random.Generator
    demand: np.random.Generator
    pnl: np.random.Generator


def make_streams(master_seed: int, path_index: int, algorithm: str = "philox") -> RngStreams:
    """
    Derive the substreams of one simulation path::

        SeedSequence([master_seed, path_index])
          ├── price
          ├── demand
          └── pnl
    """
    try:
        bit_generator = BIT_GENERATORS[algorithm]
    except KeyError:
        raise ScenarioInvalid(f"unknown rng algorithm '{algorithm}'")
    if master_seed < 0 or path_index < 0:
        raise ScenarioInvalid(f"seed and path index must be >= 0, got {master_seed} / {path_index}")
    root = np.random.SeedSequence([master_seed, path_index])
    price, demand, pnl = root.spawn(3)
    return RngStreams(
        price=np.random.Generator(bit_generator(price)),
        demand=np.random.Generator(bit_generator(demand)),
        pnl=np.random.Generator(bit_generator(pnl)),
    )


def _held(values: Sequence[Decimal], t: int) -> Decimal:
    return values[t] if t < len(values) else values[-1]


def price_path(cfg: PricePathConfig, horizon: int, dt: Decimal, rng: np.random.Generator) -> List[Decimal]:
    """Collateral price level at the end of each step, relative to the start"""
    if cfg.kind == "fixed":
        return [_held(cfg.values, t) for t in range(horizon)]

    mu, sigma, dt_f = float(cfg.mu), float(cfg.sigma), float(dt)
    z = rng.standard_normal(horizon)
    log_levels = np.cumsum((mu - sigma ** 2 / 2) * dt_f + sigma * math.sqrt(dt_f) * z)
    return [_utils.to_decimal(float(v)) for v in np.exp(log_levels)]


def utilization_path(cfg: UtilizationPathConfig, horizon: int, rng: np.random.Generator) -> List[Decimal]:
    """Target utilization of a lending market at each step"""
    if cfg.kind == "fixed":
        return [_held(cfg.values, t) for t in range(horizon)]

    z = rng.standard_normal(horizon)
    u = float(cfg.start)
    lower, upper, sigma = float(cfg.lower), float(cfg.upper), float(cfg.step_sigma)
    res = []
    for t in range(horizon):
        u = min(max(u + sigma * z[t], lower), upper)
        res.append(_utils.to_decimal(u))
    return res


def pnl_path(cfg: PnlModelConfig, horizon: int, rng: np.random.Generator) -> List[Decimal]:
    """Trader P&L of each step (positive: traders win)"""
    if cfg.kind == "fixed":
        return [cfg.values[t] if t < len(cfg.values) else Decimal(0) for t in range(horizon)]
    elif cfg.kind == "bernoulli":
        wins = rng.random(horizon) < float(cfg.p)
        return [cfg.win_size if w else -cfg.loss_size for w in wins]
    elif cfg.kind == "gaussian":
        z = rng.normal(float(cfg.mu), float(cfg.sigma), horizon)
        return [_utils.to_decimal(float(v)) for v in z]
    raise ScenarioInvalid(f"unknown P&L model '{cfg.kind}'")


@dataclass(frozen=True)
class Event:
    step: int
    facilitator: str
    type: EventType
    amounts: Dict

    def to_dict(self) -> Dict:
        return {"step": self.step, "facilitator": self.facilitator, "event": self.type.name.lower(), **self.amounts}


class Simulation:
    """
    State of a single simulation path

    :param config: a scenario with all credit lines resolved
    :param streams: the path's random substreams
    :param record: keep the event log and per step snapshots
    """

    def __init__(self, config: ScenarioConfig, streams: RngStreams, record: bool = True) -> None:
        self.config = config
        self.record = record
        self.events: List[Event] = []
        self.snapshots: List[Dict] = []
        self.controller = config.controller
        self.step_no = -1

        horizon, dt = config.horizon, config.dt
        self.prices = price_path(config.cdp_book.price_path, horizon, dt, streams.price) if config.cdp_book else []
        self.utilizations = {
            m.name: utilization_path(m.utilization_path, horizon, streams.demand) for m in config.external_markets
        }
        self.pnls = pnl_path(config.perps.pnl_model, horizon, streams.pnl) if config.perps else []

        self.peak_circulating_unbacked = Decimal(0)
        self.peak_undercollateralization = Decimal(0)
        self.supplier_share_accrued = Decimal(0)
        self.protocol_share_accrued = Decimal(0)
        self.cdp_interest_accrued = Decimal(0)
        self.liquidations = 0

        self._deploy()

    def emit(self, facilitator: str, type: EventType, **amounts) -> None:
        if self.record:
            self.events.append(Event(self.step_no, facilitator, type, amounts))

    def _deploy(self) -> None:
        c = self.config
        self.ledger = SupplyLedger()
        self.amo, self.ledger = ledger.amo_deploy(c.pool.stable, c.pool.counter, c.pool.amplification, self.ledger)
        self.emit("amo", EventType.DEPLOY, stable=self.amo.pool.stable_reserve, counter=self.amo.pool.counter_reserve)

        self.psm = None
        if c.psm is not None:
            self.psm, self.ledger = ledger.psm_deploy(c.psm.stable_reserve + c.psm.counter_reserve, self.ledger)
            if c.psm.counter_reserve > 0:
                self.psm, self.ledger, _ = ledger.psm_swap_in(self.psm, self.ledger, c.psm.counter_reserve)
            self.emit("psm", EventType.DEPLOY, stable=self.psm.stable_reserve, counter=self.psm.counter_reserve)

        self.markets = {}
        self.sell_to_pool = {}
        for m in c.external_markets:
            market, self.ledger = ledger.lending_deploy(m.credit_line, m.rate_params, m.reserve_factor, self.ledger, m.name)
            self.markets[m.name] = market
            self.sell_to_pool[m.name] = m.sell_to_pool
            self.emit(m.name, EventType.DEPLOY, credit_line=market.credit_line)

        self.vault = None
        if c.perps is not None:
            self.vault, self.ledger = ledger.perps_deploy(c.perps.credit_line, self.ledger)
            self.emit("perps", EventType.DEPLOY, credit_line=self.vault.credit_line)

        self.positions: List[cdp.Position] = []
        self.initial_collateral: List[Decimal] = []
        self.ltv_caps: List[Decimal] = []
        if c.cdp_book is not None:
            for pc in c.cdp_book.positions:
                p = cdp.Position(pc.collateral_value, pc.liquidation_threshold, 0, pc.owner)
                p.__validate__()
                debt = _utils.quantize(pc.debt)
                p = cdp.mint(p, debt, pc.ltv_cap)
                self.ledger = self.ledger.mint_backed(debt)
                self.positions.append(p)
                self.initial_collateral.append(p.collateral_value)
                self.ltv_caps.append(pc.ltv_cap)
                if debt > 0:
                    self.emit(pc.owner, EventType.MINT, amount=debt)

        self.ledger.__validate__()

    # step ---------------------------------------------------------------------------------------------------

    def run(self) -> None:
        for t in range(self.config.horizon):
            self.step(t)

    def step(self, t: int) -> None:
        self.step_no = t
        for a in self.config.actions:
            if a.step == t:
                self._action(a)
        if self.config.cdp_book is not None:
            self._step_cdps(t)
        for name in self.markets:
            self._step_market(name, t)
        if self.vault is not None:
            self._step_perps(t)

        self.ledger.__validate__()
        self.peak_circulating_unbacked = max(self.peak_circulating_unbacked, self.ledger.circulating_unbacked)
        if self.vault is not None:
            self.peak_undercollateralization = max(self.peak_undercollateralization, self.vault.undercollateralization)
        if self.record:
            self.snapshots.append(self._snapshot())

    def _action(self, a: ActionConfig) -> None:
        if a.kind == "psm_swap_in":
            self.psm, self.ledger, out = ledger.psm_swap_in(self.psm, self.ledger, a.amount)
            self.emit("psm", EventType.PSM_SWAP_IN, counter_in=a.amount, stable_out=out)
        elif a.kind == "psm_redeem":
            self.psm, self.ledger, out = ledger.psm_redeem(self.psm, self.ledger, a.amount)
            self.emit("psm", EventType.PSM_REDEEM, stable_in=a.amount, counter_out=out)
        elif a.kind == "amo_trade":
            quote = stableswap.swap(self.amo.pool, a.amount, a.direction)
            self.amo, self.ledger = ledger.amo_pool_trade(self.amo, self.ledger, quote, a.direction)
            self.emit("amo", EventType.POOL_TRADE, direction=a.direction.to_str(), amount_in=quote.amount_in, amount_out=quote.amount_out)
        elif a.kind == "backfill":
            self.vault, self.ledger, used = ledger.backfill(self.vault, self.ledger, a.amount)
            self.emit("backfill", EventType.BACKFILL, fund=a.amount, used=used)
        elif a.kind == "set_rate_params":
            market = self.markets[a.market]
            params = market.rate_params.updated(**dict(a.rate_updates))
            params.__validate__()
            self.markets[a.market] = replace(market, rate_params=params)
            self.emit(a.market, EventType.RATE_UPDATE, **params.to_dict())
        elif a.kind == "set_controller_gain":
            self.controller = ControllerParams(a.gain)
            self.emit("controller", EventType.RATE_UPDATE, gain=a.gain)
        else:
            raise ScenarioInvalid(f"unknown action '{a.kind}'")

    def _step_cdps(self, t: int) -> None:
        book = self.config.cdp_book
        level = self.prices[t]
        for i, p in enumerate(self.positions):
            if p.debt == 0 and p.collateral_value == 0:
                continue
            p = replace(p, collateral_value=self.initial_collateral[i] * level)
            accrued = cdp.accrue(p, book.interest_rate, self.config.dt)
            if accrued.debt != p.debt:
                self.cdp_interest_accrued += accrued.debt - p.debt
                self.emit(p.owner, EventType.INTEREST, amount=accrued.debt - p.debt)
            p = accrued

            if cdp.is_liquidatable(p):
                outcome = cdp.liquidate(p, book.liquidation_bonus)
                self.ledger = self.ledger.burn(outcome.debt_repaid)
                if outcome.bad_debt > 0:
                    self.ledger = self.ledger.record_bad_debt(outcome.bad_debt)
                self.liquidations += 1
                self.emit(p.owner, EventType.LIQUIDATION, **outcome.to_dict())
                p = replace(p, debt=Decimal(0), collateral_value=Decimal(0))
                self.initial_collateral[i] = Decimal(0)
            self.positions[i] = p

    def _step_market(self, name: str, t: int) -> None:
        market = self.markets[name]
        target = _utils.quantize(self.utilizations[name][t] * market.credit_line)
        delta = target - market.borrowed
        market, interest, protocol_share, self.ledger = ledger.lending_step(market, delta, self.config.dt, self.ledger)
        self.markets[name] = market

        if delta > 0:
            self.emit(name, EventType.BORROW, amount=delta)
            if self.sell_to_pool[name]:
                quote = stableswap.swap(self.amo.pool, delta, Direction.STABLE_IN)
                self.amo, self.ledger = ledger.amo_pool_trade(self.amo, self.ledger, quote, Direction.STABLE_IN)
                self.emit("amo", EventType.POOL_TRADE, direction="stable-in", amount_in=quote.amount_in, amount_out=quote.amount_out)
        elif delta < 0:
            self.emit(name, EventType.REPAY, amount=-delta)

        if interest > 0:
            self.supplier_share_accrued += interest - protocol_share
            self.protocol_share_accrued += protocol_share
            self.emit(name, EventType.LENDING_INTEREST, interest=interest, protocol_share=protocol_share)

    def _step_perps(self, t: int) -> None:
        pnl = self.pnls[t]
        shortfall = self.vault.shortfall
        self.vault, self.ledger = ledger.perps_step(self.vault, self.ledger, pnl)
        if pnl != 0:
            self.emit("perps", EventType.TRADER_PNL, pnl=pnl, vault_assets=self.vault.vault_assets)
        if self.vault.shortfall > shortfall:
            self.emit("perps", EventType.VAULT_SHORTFALL, amount=self.vault.shortfall - shortfall)

    @property
    def controller_rate(self) -> Optional[Decimal]:
        """Controller rate observed in the core pool, None if saturated"""
        try:
            return rates.controller_rate(self.amo.e_controller, self.controller)
        except Divergence:
            return None

    def _snapshot(self) -> Dict:
        res = {
            "step": self.step_no,
            "ledger": self.ledger.to_dict(),
            "pool": {
                "stable_reserve": self.amo.pool.stable_reserve,
                "counter_reserve": self.amo.pool.counter_reserve,
                "fraction_stable": stableswap.fraction_stable(self.amo.pool),
            },
            "controller_rate": self.controller_rate,
            "markets": [
                {"name": m.name, "borrowed": m.borrowed, "utilization": m.utilization, "external_rate": m.borrow_rate}
                for m in self.markets.values()
            ],
        }
        if self.vault is not None:
            res["vault"] = {
                "vault_assets": self.vault.vault_assets,
                "shortfall": self.vault.shortfall,
                "undercollateralization": self.vault.undercollateralization,
            }
        return _utils.jsonable(res)

    def summary(self) -> Dict:
        res = {
            "steps": self.config.horizon,
            "peak_circulating_unbacked": self.peak_circulating_unbacked,
            "peak_undercollateralization": self.peak_undercollateralization,
            "final_ledger": self.ledger.to_dict(),
            "supplier_share_accrued": self.supplier_share_accrued,
            "protocol_share_accrued": self.protocol_share_accrued,
            "cdp_interest_accrued": self.cdp_interest_accrued,
            "liquidations": self.liquidations,
            "controller_rate": self.controller_rate,
        }
        if self.vault is not None:
            res["final_vault"] = self.vault.to_dict()
        return _utils.jsonable(res)


def _prepare(scenario: ScenarioConfig) -> Tuple[ScenarioConfig, List[underwriting.CreditLine]]:
    config, lines = underwriting.resolve_credit_lines(scenario)
    for m in config.external_markets:
        m.rate_params.__validate__()
    config.controller.__validate__()
    return config, lines


def _provenance(scenario: ScenarioConfig, seed: int, **kwargs) -> Dict:
    return {
        "version": stabcred.__version__,
        "scenario_hash": scenario.hash,
        "seed": seed,
        "rng": scenario.rng.algorithm,
        **kwargs
    }


@_utils.fixed_point
def run_simulation(scenario: ScenarioConfig, seed: Optional[int] = None) -> SimulationReport:
    """
    Simulate `scenario` along path 0 of `seed` (default: the scenario's master seed)

    :raises ScenarioInvalid: if the scenario cannot be resolved or simulated
    """
    seed = scenario.rng.seed if seed is None else seed
    config, lines = _prepare(scenario)
    sim = Simulation(config, make_streams(seed, 0, config.rng.algorithm))
    sim.run()

    verdicts = [r.verdict.to_dict() for r in underwriting.underwrite(config) if r.verdict is not None]
    register = list(risk.default_register()) + list(config.risks)
    return SimulationReport(
        provenance=_provenance(scenario, seed, path_index=0),
        credit_lines=_utils.jsonable(lines),
        verdicts=_utils.jsonable(verdicts),
        endogenous_yield=_utils.jsonable(underwriting.scenario_yield(config)),
        risk_register=_utils.jsonable(risk.register_rows(register)),
        snapshots=sim.snapshots,
        events=_utils.jsonable(sim.events),
        summary=sim.summary(),
    )


# monte carlo ----------------------------------------------------------------------------------------------

@dataclass(frozen=True)
class PathResult:
    index: int
    peak_undercollateralization: Decimal
    peak_circulating_unbacked: Decimal


@_utils.fixed_point
def simulate_path(config: ScenarioConfig, seed: int, index: int) -> PathResult:
    """Simulate one Monte Carlo path of a resolved scenario without recording events"""
    sim = Simulation(config, make_streams(seed, index, config.rng.algorithm), record=False)
    sim.run()
    return PathResult(index, sim.peak_undercollateralization, sim.peak_circulating_unbacked)


def _simulate_path_star(args) -> PathResult:
    return simulate_path(*args)


@dataclass(frozen=True)
class DistributionSummary:
    mean: Decimal
    max: Decimal
    quantiles: Tuple[Tuple[Decimal, Decimal], ...]

    def to_dict(self) -> Dict:
        return {
            "mean": self.mean,
            "max": self.max,
            "quantiles": {_utils.fmt(q): v for q, v in self.quantiles},
        }


@_utils.fixed_point
def quantile(values: Sequence[Decimal], q: Numberish) -> Decimal:
    """Nearest-rank quantile of `values`"""
    if not values:
        raise OutOfRange("no values")
    q = _utils.to_decimal(q)
    if not 0 <= q <= 1:
        raise OutOfRange(f"quantile must be in [0, 1], got {q}")
    xs = sorted(values)
    rank = max(1, int((q * len(xs)).to_integral_value(rounding=ROUND_CEILING)))
    return xs[rank - 1]


@_utils.fixed_point
def summarize(values: Sequence[Decimal], quantiles: Sequence[Decimal] = DEFAULT_QUANTILES) -> DistributionSummary:
    return DistributionSummary(
        mean=sum(values, Decimal(0)) / len(values),
        max=max(values),
        quantiles=tuple((q, quantile(values, q)) for q in quantiles),
    )


@dataclass(frozen=True)
class McSummary:
    """
    Distribution of per path peaks over a Monte Carlo run

    :param probability_undercollateralized: fraction of paths whose vault was ever undercollateralized
    :param standard_error: binomial standard error of that fraction
    """
    paths: int
    seed: int
    undercollateralization: DistributionSummary
    circulating_unbacked: DistributionSummary
    probability_undercollateralized: Decimal
    standard_error: Decimal
    provenance: Dict

    def to_dict(self) -> Dict:
        return {
            "paths": self.paths,
            "seed": self.seed,
            "peak_undercollateralization": self.undercollateralization.to_dict(),
            "peak_circulating_unbacked": self.circulating_unbacked.to_dict(),
            "probability_undercollateralized": self.probability_undercollateralized,
            "standard_error": self.standard_error,
            "provenance": self.provenance,
        }


def monte_carlo(
        scenario: ScenarioConfig,
        paths: int,
        seed: Optional[int] = None,
        processes: int = max(multiprocessing.cpu_count() - 1, 1),
        progress: bool = False
) -> McSummary:
    """
    Run `paths` independent simulations of `scenario`. Path i draws from substream i of the master seed.

    :param processes: worker processes; 1 runs all paths in this process
    :param progress: show a tqdm progress bar on stderr
    :raises ScenarioInvalid: if the scenario cannot be resolved or simulated
    """
    if paths < 1:
        raise OutOfRange(f"paths must be >= 1, got {paths}")
    seed = scenario.rng.seed if seed is None else seed
    config, _ = _prepare(scenario)
    jobs = [(config, seed, i) for i in range(paths)]
    lg.info(f"running {paths} paths with {processes} processes")

    if processes <= 1:
        results = [simulate_path(*job) for job in tqdm(jobs, disable=not progress)]
    else:
        with multiprocessing.Pool(processes) as pool:
            it = pool.imap_unordered(_simulate_path_star, jobs, chunksize=max(1, paths // (processes * 4)))
            results = list(tqdm(it, total=paths, disable=not progress))

    results.sort(key=lambda r: r.index)
    return _merge(results, seed, _provenance(scenario, seed, paths=paths))


@_utils.fixed_point
def _merge(results: List[PathResult], seed: int, provenance: Dict) -> McSummary:
    n = len(results)
    under = [r.peak_undercollateralization for r in results]
    circ = [r.peak_circulating_unbacked for r in results]
    p = Decimal(sum(1 for u in under if u > 0)) / n
    return McSummary(
        paths=n,
        seed=seed,
        undercollateralization=summarize(under),
        circulating_unbacked=summarize(circ),
        probability_undercollateralized=p,
        standard_error=(p * (1 - p) / n).sqrt(),
        provenance=provenance,
    )
