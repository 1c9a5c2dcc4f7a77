"""Rational <-> text conventions used by every file format: always ``"num/den"``."""

from __future__ import annotations

from fractions import Fraction


def frac_str(x) -> str:
    x = Fraction(x)
    return f"{x.numerator}/{x.denominator}"


def parse_frac(text) -> Fraction:
    if isinstance(text, Fraction):
        return text
    if isinstance(text, int):
        return Fraction(text)
    if isinstance(text, float):
        raise TypeError("floats are not accepted where an exact rational is required")
    return Fraction(str(text).strip())
