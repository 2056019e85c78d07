"""
This module defines global constants and enums. The numeric values of the integer enums
are the ordinal values used when scoring risks and when serializing stabcred objects into
scenario files and reports.
"""

from decimal import Decimal
from enum import IntEnum
from typing import Union
from pathlib import Path

Pathish = Union[Path, str]
Numberish = Union[Decimal, int, str, float]


# fixed-point representation of token amounts
DECIMALS = 18
UNIT = Decimal(1).scaleb(-DECIMALS)  #: one fixed-point unit (1e-18)
PRECISION = 60  #: digits of the decimal context engine math runs under
RAY = Decimal(10) ** 27  #: on-chain rate scaling, 1e27 == 100%

# stableswap
N_COINS = 2
MAX_ITERATIONS = 255

# defaults
DEFAULT_GAIN = Decimal("0.15")
DEFAULT_U_OPTIMAL = Decimal("0.8")
DEFAULT_LIQUIDATION_BONUS = Decimal("0.05")
DEFAULT_GRID_POINTS = 101
DEFAULT_GRID_MAX = Decimal("0.99")
DEFAULT_DT = Decimal(1) / Decimal(365)
DEFAULT_HORIZON = 365
DEFAULT_QUANTILES = (Decimal("0.5"), Decimal("0.9"), Decimal("0.95"), Decimal("0.99"))

REVISION_CAVEAT = "credit lines should be regularly revised to account for shifts in market demand"
ARBITRAGE_CAVEAT = "demand from Arbitrage AMOs and other sources may justify increasing the line of credit"


class Likelihood(IntEnum):
    """Likelihood of an undesirable outcome. Ordered A < B < C."""
    LOW = 1
    MEDIUM = 2
    HIGH = 3

    @property
    def letter(self) -> str:
        return "ABC"[self - 1]

    @property
    def label(self) -> str:
        return f"{self.name.capitalize()} ({self.letter})"

    @property
    def definition(self) -> str:
        return {
            Likelihood.LOW: "Not expected to occur.",
            Likelihood.MEDIUM: "May foreseeably occur.",
            Likelihood.HIGH: "Certain to occur.",
        }[self]

    @staticmethod
    def from_letter(x: str) -> "Likelihood":
        try:
            return Likelihood("ABC".index(x.strip().upper()) + 1)
        except ValueError:
            raise ValueError(f"unknown likelihood '{x}'")


class Consequence(IntEnum):
    """Consequence of an undesirable outcome. Ordered 1 < 2 < 3."""
    LOW = 1
    MEDIUM = 2
    HIGH = 3

    @property
    def digit(self) -> str:
        return str(int(self))

    @property
    def label(self) -> str:
        return f"{self.name.capitalize()} ({self.digit})"

    @property
    def definition(self) -> str:
        return {
            Consequence.LOW: "Marginal, temporary impact to systemic health.",
            Consequence.MEDIUM: "Considerable, temporary impact to systemic health.",
            Consequence.HIGH: "Existential impact to systemic health.",
        }[self]


class Tier(IntEnum):
    """Color tiers of the risk quantifying matrix, least to most severe."""
    BLUE = 1
    GREEN = 2
    YELLOW = 3
    ORANGE = 4
    RED = 5


class CreditLayer(IntEnum):
    """Layers of the stablecoin credit spectrum, least to most risky."""
    OVERCOLLATERALIZED = 1
    AMO = 2
    B2F = 3
    B2S = 4
    B2B = 5


class Direction(IntEnum):
    """Swap direction relative to the stablecoin side of the core pool."""
    STABLE_IN = 1
    COUNTER_IN = 2

    @staticmethod
    def from_str(x: str) -> "Direction":
        x = x.strip().lower().replace("_", "-")
        if x == "stable-in":
            return Direction.STABLE_IN
        elif x == "counter-in":
            return Direction.COUNTER_IN
        raise ValueError(f"unknown direction '{x}'")

    def to_str(self) -> str:
        return self.name.lower().replace("_", "-")


class FacilitatorKind(IntEnum):
    """Kinds of unbacked credit lines that can be underwritten."""
    B2F_LENDING_MARKET = 1
    B2S_PERPS_VAULT = 2


class EventType(IntEnum):
    """Types of events recorded in the simulation event log."""
    MINT = 1
    INTEREST = 2
    LIQUIDATION = 3
    BORROW = 4
    REPAY = 5
    LENDING_INTEREST = 6
    POOL_TRADE = 7
    TRADER_PNL = 8
    VAULT_SHORTFALL = 9
    BACKFILL = 10
    PSM_SWAP_IN = 11
    PSM_REDEEM = 12
    RATE_UPDATE = 13
    DEPLOY = 14


class Status(IntEnum):
    """Status of a CLI command, also used as its exit code."""
    OK = 0
    FAIL = 1
    USAGE = 2
