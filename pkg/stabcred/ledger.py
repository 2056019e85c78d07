"""
The stablecoin supply ledger and the facilitator state machines that move supply between its classes.

Every stablecoin minted is in exactly one of three classes:

  - *backed circulating*: in circulation and backed by collateral or counterassets,
  - *custodied unbacked*: minted but held by a facilitator contract (PSM, AMO pool, lending market, perps
    vault) and therefore functionally out of circulation,
  - *circulating unbacked*: in circulation without backing (B2F loans, B2S trader winnings).

so that ``total_minted == backed_circulating + custodied_unbacked + circulating_unbacked`` at all times.

States are immutable; every operation returns updated copies. Whenever stablecoins flow back into a
custody contract, circulating unbacked supply is retired before backed supply.
"""

import logging
from dataclasses import dataclass, replace
from decimal import Decimal
from typing import Dict, Optional, Tuple

from stabcred import _utils, rates, stableswap
from stabcred.constants import Direction, Numberish
from stabcred.exceptions import (
    StabcredError, InsufficientReserve, StaleQuote, ExceedsCreditLine, OutOfRange
)
from stabcred.rates import PiecewiseRateParams
from stabcred.stableswap import PoolState, SwapQuote

lg = logging.getLogger(__name__)

ZERO = Decimal(0)


class LedgerImbalance(StabcredError):
    """The ledger components do not add up to the total supply"""
    pass


def _check_amount(amount: Decimal) -> None:
    if amount < 0:
        raise OutOfRange(f"amounts moved through the ledger must be >= 0, got {amount}")


@dataclass(frozen=True)
class SupplyLedger:
    """
    Partition of the minted stablecoin supply.

    `externally_collateralized` annotates the part of `circulating_unbacked` that entered circulation as
    loans from an external lending market, `bad_debt` accumulates liquidation shortfalls absorbed by the
    redistribution sink. Neither is a supply class of its own.
    """
    backed_circulating: Decimal = ZERO
    custodied_unbacked: Decimal = ZERO
    circulating_unbacked: Decimal = ZERO
    total_minted: Decimal = ZERO
    externally_collateralized: Decimal = ZERO
    bad_debt: Decimal = ZERO

    def is_conserved(self) -> bool:
        return self.total_minted == self.backed_circulating + self.custodied_unbacked + self.circulating_unbacked

    def __validate__(self) -> None:
        if not self.is_conserved():
            raise LedgerImbalance(f"ledger does not add up: {self.to_dict()}")
        for k in ("backed_circulating", "custodied_unbacked", "circulating_unbacked", "total_minted"):
            if getattr(self, k) < 0:
                raise LedgerImbalance(f"{k} is negative: {self.to_dict()}")

    def to_dict(self) -> Dict:
        return {
            "backed_circulating": self.backed_circulating,
            "custodied_unbacked": self.custodied_unbacked,
            "circulating_unbacked": self.circulating_unbacked,
            "total_minted": self.total_minted,
            "externally_collateralized": self.externally_collateralized,
            "bad_debt": self.bad_debt,
        }

    @_utils.fixed_point
    def mint_backed(self, amount: Decimal) -> "SupplyLedger":
        """Mint stablecoins straight into backed circulation (CDP mints)"""
        _check_amount(amount)
        return replace(self, total_minted=self.total_minted + amount, backed_circulating=self.backed_circulating + amount)

    @_utils.fixed_point
    def mint_custodied(self, amount: Decimal) -> "SupplyLedger":
        """Mint unbacked stablecoins into the custody of a facilitator"""
        _check_amount(amount)
        return replace(self, total_minted=self.total_minted + amount, custodied_unbacked=self.custodied_unbacked + amount)

    @_utils.fixed_point
    def release_backed(self, amount: Decimal) -> "SupplyLedger":
        """Custodied stablecoins leave custody in exchange for counterassets"""
        _check_amount(amount)
        if amount > self.custodied_unbacked:
            raise InsufficientReserve(f"cannot release {amount}, only {self.custodied_unbacked} in custody")
        return replace(
            self,
            custodied_unbacked=self.custodied_unbacked - amount,
            backed_circulating=self.backed_circulating + amount,
        )

    @_utils.fixed_point
    def release_unbacked(self, amount: Decimal, external: bool = False) -> "SupplyLedger":
        """Custodied stablecoins enter circulation without backing"""
        _check_amount(amount)
        if amount > self.custodied_unbacked:
            raise InsufficientReserve(f"cannot release {amount}, only {self.custodied_unbacked} in custody")
        return replace(
            self,
            custodied_unbacked=self.custodied_unbacked - amount,
            circulating_unbacked=self.circulating_unbacked + amount,
            externally_collateralized=self.externally_collateralized + (amount if external else ZERO),
        )

    @_utils.fixed_point
    def return_to_custody(self, amount: Decimal, strict: bool = True) -> Tuple["SupplyLedger", Decimal]:
        """
        Circulating stablecoins flow into a custody contract. Unbacked supply is retired first.

        :param strict: raise if less than `amount` circulates, otherwise move what circulates
        :return: the updated ledger and the amount moved
        """
        _check_amount(amount)
        available = self.circulating_unbacked + self.backed_circulating
        if amount > available:
            if strict:
                raise InsufficientReserve(f"cannot return {amount} to custody, only {available} circulate")
            amount = available

        from_unbacked = min(amount, self.circulating_unbacked)
        from_backed = amount - from_unbacked
        circulating_unbacked = self.circulating_unbacked - from_unbacked
        return replace(
            self,
            circulating_unbacked=circulating_unbacked,
            backed_circulating=self.backed_circulating - from_backed,
            custodied_unbacked=self.custodied_unbacked + amount,
            externally_collateralized=min(self.externally_collateralized, circulating_unbacked),
        ), amount

    @_utils.fixed_point
    def retire_backed(self, amount: Decimal) -> "SupplyLedger":
        """Backed stablecoins are redeemed into custody. Unbacked supply covers any remainder."""
        _check_amount(amount)
        available = self.circulating_unbacked + self.backed_circulating
        if amount > available:
            raise InsufficientReserve(f"cannot redeem {amount}, only {available} circulate")

        from_backed = min(amount, self.backed_circulating)
        circulating_unbacked = self.circulating_unbacked - (amount - from_backed)
        return replace(
            self,
            backed_circulating=self.backed_circulating - from_backed,
            circulating_unbacked=circulating_unbacked,
            custodied_unbacked=self.custodied_unbacked + amount,
            externally_collateralized=min(self.externally_collateralized, circulating_unbacked),
        )

    @_utils.fixed_point
    def burn(self, amount: Decimal) -> "SupplyLedger":
        """Destroy circulating stablecoins, backed ones first"""
        _check_amount(amount)
        available = self.circulating_unbacked + self.backed_circulating
        amount = min(amount, available)
        from_backed = min(amount, self.backed_circulating)
        circulating_unbacked = self.circulating_unbacked - (amount - from_backed)
        return replace(
            self,
            total_minted=self.total_minted - amount,
            backed_circulating=self.backed_circulating - from_backed,
            circulating_unbacked=circulating_unbacked,
            externally_collateralized=min(self.externally_collateralized, circulating_unbacked),
        )

    @_utils.fixed_point
    def backfill(self, amount: Decimal) -> Tuple["SupplyLedger", Decimal]:
        """Counterassets back up to `amount` of circulating unbacked supply. Returns the amount used."""
        _check_amount(amount)
        used = min(amount, self.circulating_unbacked)
        circulating_unbacked = self.circulating_unbacked - used
        return replace(
            self,
            circulating_unbacked=circulating_unbacked,
            backed_circulating=self.backed_circulating + used,
            externally_collateralized=min(self.externally_collateralized, circulating_unbacked),
        ), used

    @_utils.fixed_point
    def record_bad_debt(self, amount: Decimal) -> "SupplyLedger":
        _check_amount(amount)
        return replace(self, bad_debt=self.bad_debt + amount)


# PSM ------------------------------------------------------------------------------------------------------

@dataclass(frozen=True)
class PsmState:
    """
    A peg stability module swapping stablecoins and counterassets 1:1

    :param stable_reserve: unbacked stablecoins in custody
    :param counter_reserve: counterassets received
    """
    stable_reserve: Decimal = ZERO
    counter_reserve: Decimal = ZERO

    def to_dict(self) -> Dict:
        return {"stable_reserve": self.stable_reserve, "counter_reserve": self.counter_reserve}


def psm_deploy(stable_reserve: Numberish, ledger: SupplyLedger) -> Tuple[PsmState, SupplyLedger]:
    """Mint `stable_reserve` unbacked stablecoins into a new PSM"""
    amount = _utils.quantize(stable_reserve)
    if amount < 0:
        raise OutOfRange(f"PSM reserve must be >= 0, got {amount}")
    return PsmState(stable_reserve=amount), ledger.mint_custodied(amount)


@_utils.fixed_point
def psm_swap_in(psm: PsmState, ledger: SupplyLedger, counter_in: Numberish) -> Tuple[PsmState, SupplyLedger, Decimal]:
    """
    Swap counterassets for stablecoins 1:1. The released stablecoins are backed by the counterassets.

    :return: updated PSM, updated ledger and the stablecoins paid out
    :raises InsufficientReserve: if the PSM holds less than `counter_in` stablecoins
    """
    amount = _utils.quantize(counter_in)
    if amount < 0:
        raise OutOfRange(f"amount must be >= 0, got {amount}")
    if amount > psm.stable_reserve:
        raise InsufficientReserve(f"PSM holds {psm.stable_reserve} stablecoins, cannot swap {amount}")

    lg.debug(f"PSM swap in {amount}")
    psm = PsmState(psm.stable_reserve - amount, psm.counter_reserve + amount)
    return psm, ledger.release_backed(amount), amount


@_utils.fixed_point
def psm_redeem(psm: PsmState, ledger: SupplyLedger, stable_in: Numberish) -> Tuple[PsmState, SupplyLedger, Decimal]:
    """
    Redeem stablecoins for counterassets 1:1. The stablecoins return to custody.

    :return: updated PSM, updated ledger and the counterassets paid out
    :raises InsufficientReserve: if the PSM holds less than `stable_in` counterassets
    """
    amount = _utils.quantize(stable_in)
    if amount < 0:
        raise OutOfRange(f"amount must be >= 0, got {amount}")
    if amount > psm.counter_reserve:
        raise InsufficientReserve(f"PSM holds {psm.counter_reserve} counterassets, cannot redeem {amount}")

    lg.debug(f"PSM redeem {amount}")
    psm = PsmState(psm.stable_reserve + amount, psm.counter_reserve - amount)
    return psm, ledger.retire_backed(amount), amount


# Liquidity AMO --------------------------------------------------------------------------------------------

@dataclass(frozen=True)
class LiquidityAmoState:
    """
    A liquidity AMO: all counterassets pooled with unbacked stablecoins in the core pool

    :param pool: current state of the core pool
    :param deployed_unbacked: stablecoins the AMO minted into the pool
    :param initial_pool: pool state at deployment, the reference for the observed controller input
    """
    pool: PoolState
    deployed_unbacked: Decimal
    initial_pool: PoolState

    @property
    def e_controller(self) -> Decimal:
        return rates.e_from_pool(self.pool.stable_reserve, self.initial_pool.stable_reserve, self.initial_pool.counter_reserve)

    def to_dict(self) -> Dict:
        return {
            "pool": self.pool.to_dict(),
            "deployed_unbacked": self.deployed_unbacked,
            "initial_pool": self.initial_pool.to_dict(),
        }


def amo_deploy(
        amount_stable: Numberish,
        amount_counter: Numberish,
        amplification: int,
        ledger: Optional[SupplyLedger] = None
) -> Tuple[LiquidityAmoState, SupplyLedger]:
    """
    Create the core pool from unbacked stablecoins and counterassets. The stablecoins are minted into custody,
    so deployment never increases circulating unbacked supply.

    :raises InvalidPool: if an amount is not positive or A < 1
    """
    if ledger is None:
        ledger = SupplyLedger()

    pool = PoolState.from_amounts(amount_stable, amount_counter, amplification)
    pool.__validate__()
    lg.info(f"deployed core pool {pool.stable_reserve} / {pool.counter_reserve}, A={pool.amplification}")
    amo = LiquidityAmoState(pool=pool, deployed_unbacked=pool.stable_reserve, initial_pool=pool)
    return amo, ledger.mint_custodied(pool.stable_reserve)


def amo_pool_trade(
        amo: LiquidityAmoState,
        ledger: SupplyLedger,
        quote: SwapQuote,
        direction: Direction
) -> Tuple[LiquidityAmoState, SupplyLedger]:
    """
    Settle a trade against the core pool.

      - counter-in: the stablecoins bought leave custody backed by the counterassets that entered the pool
      - stable-in: the stablecoins sold return to custody (circulating unbacked supply first)

    :raises StaleQuote: if `quote` was not computed against the AMO's current pool
    """
    direction = Direction(direction)
    if quote.pre_state != amo.pool or quote.direction != direction:
        raise StaleQuote("quote does not match the current pool state")

    if direction == Direction.COUNTER_IN:
        ledger = ledger.release_backed(quote.amount_out)
    else:
        ledger, _ = ledger.return_to_custody(quote.amount_in)

    return replace(amo, pool=quote.post_state), ledger


# B2F lending market ---------------------------------------------------------------------------------------

@dataclass(frozen=True)
class LendingMarketState:
    """
    An external lending market supplied with an unbacked line of credit

    :param credit_line: unbacked stablecoins supplied to the market
    :param borrowed: stablecoins currently borrowed
    :param rate_params: the market's utilization rate curve
    :param reserve_factor: the market's cut of borrower interest
    """
    credit_line: Decimal
    borrowed: Decimal
    rate_params: PiecewiseRateParams
    reserve_factor: Decimal = ZERO
    name: str = "market"

    @property
    def utilization(self) -> Decimal:
        if self.credit_line == 0:
            return ZERO
        return self.borrowed / self.credit_line

    @property
    def borrow_rate(self) -> Decimal:
        u = self.utilization
        if u >= 1:
            return self.rate_params.optimal_rate + self.rate_params.slope2
        return rates.piecewise_rate(u, self.rate_params)

    def to_dict(self) -> Dict:
        return {
            "name": self.name,
            "credit_line": self.credit_line,
            "borrowed": self.borrowed,
            "utilization": self.utilization,
            "rate_params": self.rate_params.to_dict(),
            "reserve_factor": self.reserve_factor,
        }


def lending_deploy(
        credit_line: Numberish,
        rate_params: PiecewiseRateParams,
        reserve_factor: Numberish,
        ledger: SupplyLedger,
        name: str = "market"
) -> Tuple[LendingMarketState, SupplyLedger]:
    """Supply an unbacked credit line to a lending market. The supply stays in custody until borrowed."""
    credit_line = _utils.quantize(credit_line)
    rate_params.__validate__()
    market = LendingMarketState(credit_line, ZERO, rate_params, _utils.to_decimal(reserve_factor), name)
    return market, ledger.mint_custodied(credit_line)


@_utils.fixed_point
def lending_step(
        market: LendingMarketState,
        borrow_delta: Numberish,
        dt: Numberish,
        ledger: Optional[SupplyLedger] = None
) -> Tuple[LendingMarketState, Decimal, Decimal, Optional[SupplyLedger]]:
    """
    Change the borrowed amount by `borrow_delta`, then accrue interest for `dt` years at the resulting
    utilization. Borrowed stablecoins enter circulation unbacked (annotated as externally collateralized);
    repayments return to custody.

    :return: updated market, interest accrued, protocol share of the interest, updated ledger
    :raises ExceedsCreditLine: if the borrowed amount would leave [0, credit_line]
    """
    delta = _utils.quantize(borrow_delta)
    dt = _utils.to_decimal(dt)
    borrowed = market.borrowed + delta
    if borrowed > market.credit_line or borrowed < 0:
        raise ExceedsCreditLine(f"{market.name}: borrowed {borrowed} outside [0, {market.credit_line}]")

    market = replace(market, borrowed=borrowed)
    interest = market.borrowed * market.borrow_rate * dt
    protocol_share = interest * market.reserve_factor

    if ledger is not None:
        if delta > 0:
            ledger = ledger.release_unbacked(delta, external=True)
        elif delta < 0:
            ledger, _ = ledger.return_to_custody(-delta)

    return market, interest, protocol_share, ledger


# B2S perps vault ------------------------------------------------------------------------------------------

@dataclass(frozen=True)
class PerpsVaultState:
    """
    Counterparty vault of a perpetuals exchange funded with an unbacked line of credit

    :param credit_line: the counterparty deposit
    :param vault_assets: assets currently in the vault
    :param open_liability: trader profits the vault could not pay (shortfall)
    """
    credit_line: Decimal
    vault_assets: Decimal
    open_liability: Decimal = ZERO

    @property
    def collateralization(self) -> Decimal:
        if self.credit_line == 0:
            return Decimal(1)
        return self.vault_assets / self.credit_line

    @property
    def undercollateralization(self) -> Decimal:
        return max(ZERO, 1 - self.collateralization)

    @property
    def shortfall(self) -> Decimal:
        return self.open_liability

    def to_dict(self) -> Dict:
        return {
            "credit_line": self.credit_line,
            "vault_assets": self.vault_assets,
            "open_liability": self.open_liability,
            "collateralization": self.collateralization,
        }


def perps_deploy(credit_line: Numberish, ledger: SupplyLedger) -> Tuple[PerpsVaultState, SupplyLedger]:
    """Deposit an unbacked credit line into a counterparty vault"""
    credit_line = _utils.quantize(credit_line)
    return PerpsVaultState(credit_line, credit_line), ledger.mint_custodied(credit_line)


@_utils.fixed_point
def perps_step(vault: PerpsVaultState, ledger: SupplyLedger, trader_pnl: Numberish) -> Tuple[PerpsVaultState, SupplyLedger]:
    """
    Settle one period of trader profit and loss against the vault.

      - traders win: the vault pays out what it holds; unpaid profit is recorded as shortfall and the
        paid stablecoins enter circulation unbacked
      - traders lose: their stablecoins flow into the vault, circulating unbacked supply first
    """
    pnl = _utils.quantize(trader_pnl)

    if pnl > 0:
        paid = min(pnl, vault.vault_assets)
        short = pnl - paid
        vault = replace(vault, vault_assets=vault.vault_assets - paid, open_liability=vault.open_liability + short)
        ledger = ledger.release_unbacked(min(paid, ledger.custodied_unbacked))
        if short > 0:
            lg.warning(f"perps vault short by {short}")
    elif pnl < 0:
        vault = replace(vault, vault_assets=vault.vault_assets - pnl)
        ledger, _ = ledger.return_to_custody(-pnl, strict=False)

    return vault, ledger


@_utils.fixed_point
def backfill(vault: PerpsVaultState, ledger: SupplyLedger, fund: Numberish) -> Tuple[PerpsVaultState, SupplyLedger, Decimal]:
    """
    Back realized trader profits with a counterasset fund of size `fund`

    :return: the vault, the updated ledger and the part of the fund used
    """
    fund = _utils.quantize(fund)
    if fund < 0:
        raise OutOfRange(f"fund must be >= 0, got {fund}")
    ledger, used = ledger.backfill(fund)
    lg.info(f"backfilled {used} of circulating unbacked supply ({fund - used} unused)")
    return vault, ledger, used
