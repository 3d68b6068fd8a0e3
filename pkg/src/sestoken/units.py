"""Addresses and token amounts.

Addresses are 20-byte identifiers rendered as 0x-prefixed lowercase hex.
Amounts are plain ints in base units (1 token = 10**18 base units) and are
range-checked at every operation boundary; no floats anywhere near money.
"""

import re

from .errors import MalformedRequestError, ZeroAddressError

DECIMALS = 18
UNIT = 10**DECIMALS
MAX_AMOUNT = 2**256 - 1

ZERO_ADDRESS = "0x" + "00" * 20

_ADDRESS_RE = re.compile(r"^0x[0-9a-f]{40}$")


def normalize_address(value: str) -> str:
    """Canonicalize an address string; raises on anything malformed."""
    if not isinstance(value, str):
        raise MalformedRequestError("address must be a string")
    addr = value.lower()
    if not _ADDRESS_RE.match(addr):
        raise MalformedRequestError(f"bad address: {value!r}")
    return addr


def address_from_int(n: int) -> str:
    """Deterministic test/demo address from a small integer."""
    if not 0 <= n < 2**160:
        raise ValueError("address integer out of range")
    return "0x" + n.to_bytes(20, "big").hex()


def require_nonzero(addr: str) -> str:
    if addr == ZERO_ADDRESS:
        raise ZeroAddressError("the zero address is not a valid party")
    return addr


def check_amount(value: int) -> int:
    """Validate an amount in base units."""
    if not isinstance(value, int) or isinstance(value, bool):
        raise MalformedRequestError("amount must be an integer")
    if not 0 <= value <= MAX_AMOUNT:
        raise MalformedRequestError("amount out of range")
    return value


def tokens(whole: int) -> int:
    """Whole tokens -> base units."""
    return check_amount(whole * UNIT)


def parse_token_amount(text: str) -> int:
    """Exact decimal token string -> base units. '1.5' -> 15*10**17.

    Rejects anything that does not convert exactly (more than 18 decimal
    places, exponents, signs, junk).
    """
    if not isinstance(text, str):
        raise MalformedRequestError("token amount must be a string")
    m = re.match(r"^(\d+)(?:\.(\d+))?$", text.strip())
    if not m:
        raise MalformedRequestError(f"bad token amount: {text!r}")
    whole, frac = m.group(1), m.group(2) or ""
    if len(frac) > DECIMALS:
        raise MalformedRequestError("too many decimal places for exact conversion")
    base = int(whole) * UNIT + int(frac.ljust(DECIMALS, "0") or "0")
    return check_amount(base)


def format_token_amount(base_units: int) -> str:
    """Base units -> exact decimal token string, no trailing zeros."""
    whole, frac = divmod(check_amount(base_units), UNIT)
    if frac == 0:
        return str(whole)
    return f"{whole}.{str(frac).zfill(DECIMALS).rstrip('0')}"


def parse_base_units(text: str) -> int:
    """Canonical base-unit rendering -> int (decimal digits only)."""
    if not isinstance(text, str) or not re.match(r"^(0|[1-9]\d*)$", text):
        raise MalformedRequestError(f"bad base-unit amount: {text!r}")
    return check_amount(int(text))
