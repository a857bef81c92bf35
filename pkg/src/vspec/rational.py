"""Exact rational number parsing and rendering.

The whole pipeline is rational-valued: decimal literals in source files and
network weights are converted to exact ``Fraction`` values at the boundary
and never touch binary floating point again.
"""

from __future__ import annotations

from fractions import Fraction


def parse_decimal(text: str) -> Fraction:
    """Parse a decimal or integer literal string into an exact rational.

    ``"3.25"`` becomes 13/4, ``"2"`` becomes 2/1.
    """
    if "." in text:
        whole, _, frac = text.partition(".")
        whole = whole or "0"
        scale = 10 ** len(frac)
        value = Fraction(int(whole) * scale + int(frac or "0"), scale)
    else:
        value = Fraction(int(text))
    return value


def parse_rational(text: str) -> Fraction:
    """Parse ``p/q``, decimal, or integer notation (used by .vnet files)."""
    text = text.strip()
    neg = text.startswith("-")
    if neg:
        text = text[1:]
    if "/" in text:
        num, _, den = text.partition("/")
        value = Fraction(int(num), int(den))
    else:
        value = parse_decimal(text)
    return -value if neg else value


def _pow10_exponent(denominator: int) -> int | None:
    """Smallest k with denominator | 10^k, or None if no such k exists."""
    twos = fives = 0
    d = denominator
    while d % 2 == 0:
        d //= 2
        twos += 1
    while d % 5 == 0:
        d //= 5
        fives += 1
    if d != 1:
        return None
    return max(twos, fives)


def render_number(q: Fraction) -> str:
    """Render exactly: decimal when the denominator divides a power of 10,
    ``p/q`` otherwise.  13/4 -> "3.25", 2 -> "2", 1/3 -> "1/3"."""
    if q.denominator == 1:
        return str(q.numerator)
    k = _pow10_exponent(q.denominator)
    if k is None:
        return f"{q.numerator}/{q.denominator}"
    scaled = q.numerator * (10**k // q.denominator)
    digits = str(abs(scaled)).rjust(k + 1, "0")
    sign = "-" if scaled < 0 else ""
    return f"{sign}{digits[:-k]}.{digits[-k:]}"


def render_ratio(q: Fraction) -> str:
    """Render in fixed ``p/q`` form (proof-cache canonical rendering)."""
    return f"{q.numerator}/{q.denominator}"
