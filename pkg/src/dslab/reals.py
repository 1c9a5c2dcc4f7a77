"""Certified real numbers as rational enclosures.

A value is carried as a closed interval ``[lo, hi]`` with exact rational
endpoints.  Transcendental constants come from :mod:`mpmath`'s interval
arithmetic, whose results are converted to exact dyadic fractions, so every
decision taken from an enclosure is rigorous.  Comparisons that cannot be
decided double the working precision up to ``MAX_PREC`` and then raise
:class:`~dslab.errors.PrecisionError`.
"""

from __future__ import annotations

import math
import os
import threading
from contextlib import contextmanager
from dataclasses import dataclass, field
from fractions import Fraction

import mpmath
import numpy as np

from .errors import DomainError, PrecisionError

DEFAULT_PREC = int(os.environ.get("DSLAB_PRECISION", "256"))
MAX_PREC = 4096


_iv_lock = threading.RLock()


@contextmanager
def iv_precision(bits: int):
    """Run a block with mpmath's interval context at ``bits`` bits (process-wide, locked)."""
    with _iv_lock:
        old = mpmath.iv.prec
        mpmath.iv.prec = bits
        try:
            yield mpmath.iv
        finally:
            mpmath.iv.prec = old


def mpf_to_fraction(x) -> Fraction:
    """Exact value of a finite mpmath ``mpf`` as a Fraction."""
    man, exp = mpmath.mpf(x).man_exp
    man = int(man)
    return Fraction(man * 2**exp) if exp >= 0 else Fraction(man, 2**-exp)


def _raw_to_fraction(raw) -> Fraction:
    sign, man, exp, _ = raw
    if not man and exp:
        raise ArithmeticError("interval endpoint is not finite")
    man = -int(man) if sign else int(man)
    return Fraction(man * 2**exp) if exp >= 0 else Fraction(man, 2**-exp)


def round_fraction(x: Fraction, bits: int) -> Fraction:
    """Round ``x`` to the nearest multiple of ``2**-bits``."""
    scale = 1 << bits
    return Fraction(round(x * scale), scale)


@dataclass(frozen=True)
class CertifiedReal:
    """Closed interval ``[lo, hi]`` known to contain a real value."""

    lo: Fraction
    hi: Fraction

    def __post_init__(self):
        if self.lo > self.hi:
            raise ValueError("empty enclosure")

    @classmethod
    def exact(cls, x) -> "CertifiedReal":
        x = Fraction(x)
        return cls(x, x)

    @classmethod
    def from_iv(cls, v) -> "CertifiedReal":
        lo, hi = v._mpi_
        return cls(_raw_to_fraction(lo), _raw_to_fraction(hi))

    @property
    def mid(self) -> Fraction:
        return (self.lo + self.hi) / 2

    @property
    def radius(self) -> Fraction:
        return (self.hi - self.lo) / 2

    @property
    def is_exact(self) -> bool:
        return self.lo == self.hi

    def __float__(self) -> float:
        return float(self.mid)

    def __contains__(self, x) -> bool:
        return self.lo <= x <= self.hi

    def __str__(self) -> str:
        return f"{float(self.mid):.17g} +/- {float(self.radius):.3g}"


def exp_enclosure(x, prec: int) -> CertifiedReal:
    """Rigorous enclosure of ``e**x`` for rational ``x`` at ``prec`` bits."""
    x = Fraction(x)
    if x == 0:
        return CertifiedReal.exact(1)
    with iv_precision(prec) as iv:
        v = iv.exp(iv.mpf(x.numerator) / x.denominator)
        return CertifiedReal.from_iv(v)


def compare_exp(r, x, prec: int = DEFAULT_PREC) -> int:
    """Sign of ``r - e**x`` for rationals ``r`` and ``x``.

    ``e**x`` is irrational for rational ``x != 0``, so a tie is only possible at
    ``x == 0``, where the comparison is exact.
    """
    r, x = Fraction(r), Fraction(x)
    if x == 0:
        return (r > 1) - (r < 1)
    while prec <= MAX_PREC:
        enc = exp_enclosure(x, prec)
        if r < enc.lo:
            return -1
        if r > enc.hi:
            return 1
        prec *= 2
    raise PrecisionError(f"cannot separate {r} from exp({x}) at {MAX_PREC} bits")


def floor_exp(x, prec: int = DEFAULT_PREC) -> int:
    """``floor(e**x)`` for rational ``x``, certified."""
    x = Fraction(x)
    if x == 0:
        return 1
    while prec <= MAX_PREC:
        enc = exp_enclosure(x, prec)
        a, b = math.floor(enc.lo), math.floor(enc.hi)
        if a == b:
            return a
        prec *= 2
    raise PrecisionError(f"floor(exp({x})) undecided at {MAX_PREC} bits")


def prime_threshold_exp(j: int) -> int:
    """Smallest integer ``m`` with ``m >= e**j``; primes ``p >= e**j`` are ``p >= m``."""
    if j < 0:
        raise DomainError("j must be nonnegative")
    return 1 if j == 0 else floor_exp(j) + 1


# -- real samples ------------------------------------------------------------------


@dataclass(frozen=True)
class RealSample:
    """A real number that can be enclosed at any requested precision.

    ``kind`` is one of

    ``rational``   exact value ``Fraction(num, den)``;
    ``quadratic``  ``(a + b*sqrt(d)) / c`` with integers and ``d >= 0``;
    ``dyadic``     ``m / 2**bits``, typically produced by :func:`random_sample`;
    ``mpmath``     an mpmath expression string (e.g. ``"pi"``), enclosed with
                   interval arithmetic.
    """

    kind: str
    params: tuple
    provenance: str = ""
    precision: int = field(default=DEFAULT_PREC, compare=False)

    @classmethod
    def rational(cls, x) -> "RealSample":
        x = Fraction(x)
        return cls("rational", (x.numerator, x.denominator), f"rational {x}")

    @classmethod
    def quadratic(cls, a: int, b: int, d: int, c: int = 1) -> "RealSample":
        if d < 0 or c == 0:
            raise DomainError("quadratic surd needs d >= 0 and c != 0")
        r = math.isqrt(d)
        if r * r == d:
            return cls.rational(Fraction(a + b * r, c))
        return cls("quadratic", (a, b, d, c), f"({a}+{b}*sqrt({d}))/{c}")

    @classmethod
    def golden_ratio(cls) -> "RealSample":
        return cls.quadratic(1, 1, 5, 2)

    @classmethod
    def sqrt(cls, d: int) -> "RealSample":
        return cls.quadratic(0, 1, d, 1)

    @classmethod
    def dyadic(cls, m: int, bits: int, provenance: str = "") -> "RealSample":
        return cls("dyadic", (m, bits), provenance or f"{m}/2^{bits}", precision=bits)

    @classmethod
    def expression(cls, expr: str) -> "RealSample":
        return cls("mpmath", (expr,), f"mpmath {expr}")

    @property
    def exact_value(self) -> Fraction | None:
        if self.kind == "rational":
            return Fraction(*self.params)
        if self.kind == "dyadic":
            m, bits = self.params
            return Fraction(m, 1 << bits)
        return None

    def enclose(self, bits: int) -> CertifiedReal:
        """Enclosure of width at most ``2**-bits`` (times a small constant)."""
        exact = self.exact_value
        if exact is not None:
            return CertifiedReal.exact(exact)
        if self.kind == "quadratic":
            a, b, d, c = self.params
            k = bits + abs(b).bit_length() + 2
            s = math.isqrt(d << (2 * k))
            lo = Fraction(a) + Fraction(b * s, 1 << k)
            hi = Fraction(a) + Fraction(b * (s + 1), 1 << k)
            lo, hi = sorted((lo, hi))
            lo, hi = lo / c, hi / c
            return CertifiedReal(*sorted((lo, hi)))
        if self.kind == "mpmath":
            (expr,) = self.params
            with iv_precision(bits + 8) as iv:
                names = {k: getattr(iv, k) for k in dir(iv) if not k.startswith("_")}
                v = eval(expr, {"__builtins__": {}}, names)  # noqa: S307
                if not isinstance(v, mpmath.ctx_iv.ivmpf):
                    v = iv.mpf(v)
                return CertifiedReal.from_iv(v)
        raise ValueError(f"unknown real kind {self.kind!r}")

    def frac(self) -> "RealSample":
        """Fractional part as a new sample (certified floor)."""
        enc = self.enclose(64)
        fl = math.floor(enc.lo)
        if fl != math.floor(enc.hi):
            enc = self.enclose(MAX_PREC)
            fl = math.floor(enc.lo)
            if fl != math.floor(enc.hi):
                raise PrecisionError("cannot decide integer part")
        return self.shift(-fl)

    def shift(self, k: int) -> "RealSample":
        if k == 0:
            return self
        if self.kind == "rational":
            return RealSample.rational(Fraction(*self.params) + k)
        if self.kind == "dyadic":
            m, bits = self.params
            return RealSample.dyadic(m + (k << bits), bits, self.provenance)
        if self.kind == "quadratic":
            a, b, d, c = self.params
            return RealSample("quadratic", (a + k * c, b, d, c), self.provenance)
        (expr,) = self.params
        return RealSample("mpmath", (f"({expr})+({k})",), self.provenance)

    def __float__(self) -> float:
        return float(self.enclose(60).mid)

    def to_json(self) -> dict:
        return {"kind": self.kind, "params": [str(p) for p in self.params], "provenance": self.provenance}

    @classmethod
    def from_json(cls, obj: dict) -> "RealSample":
        kind = obj["kind"]
        params = obj["params"]
        if kind == "mpmath":
            return cls.expression(params[0])
        ints = tuple(int(p) for p in params)
        if kind == "dyadic":
            return cls.dyadic(*ints, provenance=obj.get("provenance", ""))
        return cls(kind, ints, obj.get("provenance", ""))


def parse_real(text: str) -> RealSample:
    """Parse a CLI real: ``golden``, ``sqrt(d)``, ``num/den``, or an mpmath expression."""
    t = text.strip()
    if t in ("golden", "phi"):
        return RealSample.golden_ratio()
    if t.startswith("sqrt(") and t.endswith(")") and t[5:-1].isdigit():
        return RealSample.sqrt(int(t[5:-1]))
    try:
        return RealSample.rational(Fraction(t))
    except ValueError:
        return RealSample.expression(t)


def random_sample(seed: int, index: int = 0, bits: int = DEFAULT_PREC) -> RealSample:
    """Uniform dyadic rational in [0, 1) drawn from a counter-based stream.

    The stream is Philox keyed by ``seed`` with the counter set from ``index``,
    so sample ``index`` does not depend on how many others were drawn.
    """
    gen = np.random.Generator(np.random.Philox(key=seed, counter=[0, 0, index, 0]))
    words = (bits + 63) // 64
    m = 0
    for w in gen.integers(0, 2**64, size=words, dtype=np.uint64, endpoint=False):
        m = (m << 64) | int(w)
    m >>= words * 64 - bits
    return RealSample.dyadic(m, bits, f"philox seed={seed} index={index} bits={bits}")
