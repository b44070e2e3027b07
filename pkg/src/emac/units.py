"""Duration parsing/formatting and pinned float formatting for emitted documents."""
from __future__ import annotations

import re
from decimal import Decimal

_DURATION_RE = re.compile(r"^\s*(\d+(?:\.\d+)?)\s*(ms|s|m|h|d)\s*$")

# Milliseconds per unit. Expression grammar admits ms/s only; policy windows
# additionally accept m/h/d.
_UNIT_MS = {"ms": 1, "s": 1000, "m": 60_000, "h": 3_600_000, "d": 86_400_000}

EXPR_UNITS = ("ms", "s")
WINDOW_UNITS = ("ms", "s", "m", "h", "d")


def parse_duration(text: str, units=WINDOW_UNITS) -> tuple[int, bool]:
    """Parse a duration literal into integer milliseconds.

    Returns (ms, exact). `exact` is False when the value had to be rounded
    to the nearest whole millisecond (callers emit a warning).
    """
    m = _DURATION_RE.match(text)
    if not m or m.group(2) not in units:
        raise ValueError(f"invalid duration {text!r}")
    qty = Decimal(m.group(1)) * _UNIT_MS[m.group(2)]
    ms = int(qty.to_integral_value(rounding="ROUND_HALF_EVEN"))
    return ms, qty == ms


def format_duration(ms: int) -> str:
    """Render integer milliseconds in the largest unit that divides exactly."""
    if ms <= 0:
        raise ValueError("duration must be positive")
    for unit in ("d", "h", "m", "s"):
        if ms % _UNIT_MS[unit] == 0:
            return f"{ms // _UNIT_MS[unit]}{unit}"
    return f"{ms}ms"


def fmt_float(x: float) -> str:
    """Shortest representation truncated at 12 significant digits.

    Pinned so that emitted documents are byte-stable across platforms.
    """
    if x != x or x in (float("inf"), float("-inf")):
        raise ValueError("non-finite value in emitted document")
    if x == int(x) and abs(x) < 1e15:
        return str(int(x))
    return repr(round_float(x))


def round_float(x: float) -> float:
    """Round to 12 significant digits (the value emitted in JSON payloads)."""
    return float(f"{x:.12g}")
