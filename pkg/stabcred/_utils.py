"""
Internal utility functions
"""

import decimal
import functools
import hashlib
import json
from decimal import Decimal, ROUND_DOWN, ROUND_HALF_EVEN
from pathlib import Path
from typing import Any, Callable

from stabcred.constants import PRECISION, UNIT, Numberish


CONTEXT = decimal.Context(prec=PRECISION, rounding=ROUND_HALF_EVEN)


def get_project_root(*args) -> Path:
    """Returns project root folder."""
    return Path(__file__).parent.parent.joinpath(*args).resolve()


def fixed_point(fun: Callable) -> Callable:
    """Evaluate `fun` under the high precision decimal context"""
    @functools.wraps(fun)
    def wrapper(*args, **kwargs):
        with decimal.localcontext(CONTEXT):
            return fun(*args, **kwargs)
    return wrapper


def to_decimal(x: Numberish) -> Decimal:
    """
    Convert `x` to a Decimal. Floats go through their shortest repr so that 0.1 becomes
    Decimal("0.1") and not its binary expansion.
    """
    if isinstance(x, Decimal):
        return x
    if isinstance(x, bool):
        raise TypeError("booleans are not numbers")
    if isinstance(x, float):
        return Decimal(repr(x))
    if isinstance(x, (int, str)):
        try:
            return Decimal(x)
        except decimal.InvalidOperation:
            raise ValueError(f"not a decimal number: '{x}'")
    raise TypeError(f"cannot convert {type(x).__name__} to Decimal")


def quantize(x: Numberish, rounding=ROUND_DOWN) -> Decimal:
    """Quantize to the 18 fractional digits of a token amount"""
    with decimal.localcontext(CONTEXT):
        return to_decimal(x).quantize(UNIT, rounding=rounding)


def round_tokens(x: Decimal) -> Decimal:
    """Human readable rounding to whole tokens"""
    with decimal.localcontext(CONTEXT):
        return x.quantize(Decimal(1), rounding=ROUND_HALF_EVEN)


def fmt(x: Decimal) -> str:
    """Plain (non-scientific) string representation of a Decimal"""
    if x == 0:
        return "0"
    s = format(x, "f")
    if "." in s:
        s = s.rstrip("0").rstrip(".")
    return s


def jsonable(x: Any) -> Any:
    """Recursively convert Decimals to plain strings and objects with a to_dict method to dicts"""
    if isinstance(x, Decimal):
        return fmt(x)
    if isinstance(x, dict):
        return {str(k): jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [jsonable(v) for v in x]
    if hasattr(x, "to_dict"):
        return jsonable(x.to_dict())
    return x


def canonical_json(x: Any, indent=None) -> str:
    """Deterministic JSON: sorted keys, Decimals as strings"""
    separators = (",", ":") if indent is None else (",", ": ")
    return json.dumps(jsonable(x), sort_keys=True, indent=indent, separators=separators)


def sha256(x: Any) -> str:
    return hashlib.sha256(canonical_json(x).encode("utf-8")).hexdigest()
