"""
Exceptions
"""

from typing import Optional


class StabcredError(Exception):
    """Base class for all errors raised by stabcred engines"""
    pass


class InvalidEntry(StabcredError, ValueError):
    """A risk register entry whose mitigated rating exceeds its unmitigated rating"""
    pass


class InvalidPool(StabcredError, ValueError):
    pass


class NonConvergence(StabcredError, ArithmeticError):
    """Newton iteration did not converge within the iteration cap"""
    pass


class DrainedPool(StabcredError, ValueError):
    """A swap would drive the output reserve to zero or below"""
    pass


class StaleQuote(StabcredError):
    """A swap quote was computed against a different pool state"""
    pass


class OutOfRange(StabcredError, ValueError):
    pass


class Divergence(StabcredError, ArithmeticError):
    """The controller transfer function diverges (E >= 1)"""
    pass


class ExceedsLTV(StabcredError):
    pass


class NotLiquidatable(StabcredError):
    pass


class InsufficientReserve(StabcredError):
    pass


class ExceedsCreditLine(StabcredError):
    pass


class ScenarioInvalid(StabcredError):
    pass


class ScenarioError(ScenarioInvalid):
    """Errors raised while loading a scenario file"""

    def __init__(self, msg: str, path: Optional[str] = None) -> None:
        self.path = path
        if path is not None:
            msg = f"{path}: {msg}"
        super().__init__(msg)


class ParseError(ScenarioError):
    pass


class SchemaError(ScenarioError):
    pass


class RangeError(ScenarioError):
    pass
