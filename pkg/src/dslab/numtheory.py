"""Exact integer number theory on top of a lazily grown smallest-prime-factor sieve.

Everything here is exact: integers and :class:`fractions.Fraction`, no floats.
Inputs up to ``SIEVE_LIMIT`` (default 10**7) are factored from the sieve;
larger inputs fall back to Pollard rho with a deterministic Miller-Rabin test,
which is correct for all n < 3.3 * 10**24 and probabilistically sound beyond.
"""

from __future__ import annotations

import math
import random
import threading
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from itertools import combinations
from typing import Iterator

import numpy as np

from .errors import DomainError

SIEVE_LIMIT = 10**7

_sieve_lock = threading.Lock()
_spf = np.zeros(2, dtype=np.int32)


def _grow_sieve(n: int) -> np.ndarray:
    global _spf
    with _sieve_lock:
        if n < len(_spf):
            return _spf
        size = max(n + 1, 2 * len(_spf), 1 << 16)
        size = min(size, SIEVE_LIMIT + 1)
        spf = np.zeros(size, dtype=np.int32)
        spf[1] = 1
        for p in range(2, math.isqrt(size - 1) + 1):
            if spf[p] == 0:
                block = spf[p * p :: p]
                block[block == 0] = p
        rest = spf == 0
        rest[0] = False
        spf[rest] = np.nonzero(rest)[0]
        _spf = spf
        return spf


def spf_table(n: int) -> np.ndarray:
    """Smallest-prime-factor table covering ``0..n`` (read-only view).

    ``spf[0] == 0`` and ``spf[1] == 1``. Raises if ``n`` exceeds ``SIEVE_LIMIT``.
    """
    if n > SIEVE_LIMIT:
        raise DomainError(f"sieve bound {SIEVE_LIMIT} exceeded by {n}")
    spf = _spf if n < len(_spf) else _grow_sieve(n)
    view = spf[: n + 1]
    view.flags.writeable = False
    return view


def primes_upto(n: int) -> np.ndarray:
    if n < 2:
        return np.zeros(0, dtype=np.int64)
    spf = spf_table(n)
    idx = np.arange(n + 1)
    return idx[(spf == idx) & (idx >= 2)].astype(np.int64)


def primes_between(lo: int, hi: int) -> list[int]:
    """Primes p with lo <= p <= hi."""
    if hi < max(lo, 2):
        return []
    ps = primes_upto(hi)
    return [int(p) for p in ps[ps >= lo]]


@lru_cache(maxsize=None)
def nth_primes(count: int) -> tuple[int, ...]:
    """The first ``count`` primes."""
    bound = 16
    while True:
        ps = primes_upto(bound)
        if len(ps) >= count:
            return tuple(int(p) for p in ps[:count])
        bound *= 2


def totients_upto(n: int) -> np.ndarray:
    """Array ``phi`` with ``phi[k] = totient(k)`` for ``1 <= k <= n`` (``phi[0] = 0``)."""
    phi = np.arange(n + 1, dtype=np.int64)
    for p in primes_upto(n):
        phi[p::p] -= phi[p::p] // p
    return phi


# -- primality and factorization ------------------------------------------------

_MR_BASES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41)


def is_prime(n: int) -> bool:
    if n < 2:
        return False
    if n <= SIEVE_LIMIT and n < len(_spf):
        return int(_spf[n]) == n
    for p in _MR_BASES:
        if n % p == 0:
            return n == p
    d, s = n - 1, 0
    while d % 2 == 0:
        d //= 2
        s += 1
    for a in _MR_BASES:
        x = pow(a, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(s - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


def _pollard_rho(n: int) -> int:
    if n % 2 == 0:
        return 2
    rng = random.Random(n)
    while True:
        c = rng.randrange(1, n)
        y = rng.randrange(0, n)
        m, g, r, q = 128, 1, 1, 1
        x = ys = y
        while g == 1:
            x = y
            for _ in range(r):
                y = (y * y + c) % n
            k = 0
            while k < r and g == 1:
                ys = y
                for _ in range(min(m, r - k)):
                    y = (y * y + c) % n
                    q = q * abs(x - y) % n
                g = math.gcd(q, n)
                k += m
            r *= 2
        if g == n:
            g = 1
            while g == 1:
                ys = (ys * ys + c) % n
                g = math.gcd(abs(x - ys), n)
        if g != n:
            return g


def _factor_large(n: int, out: dict[int, int]) -> None:
    for p in (2, 3, 5, 7, 11, 13):
        while n % p == 0:
            out[p] = out.get(p, 0) + 1
            n //= p
    stack = [n] if n > 1 else []
    while stack:
        m = stack.pop()
        if m <= SIEVE_LIMIT:
            for p, e in _factor_small(m):
                out[p] = out.get(p, 0) + e
        elif is_prime(m):
            out[m] = out.get(m, 0) + 1
        else:
            d = _pollard_rho(m)
            stack.extend((d, m // d))


def _factor_small(n: int) -> list[tuple[int, int]]:
    spf = spf_table(n)
    out: list[tuple[int, int]] = []
    while n > 1:
        p = int(spf[n])
        e = 0
        while n % p == 0:
            n //= p
            e += 1
        out.append((p, e))
    return out


@dataclass(frozen=True)
class Factorization:
    """Prime factorization as a tuple of ``(prime, exponent)`` with increasing primes."""

    entries: tuple[tuple[int, int], ...]

    @property
    def value(self) -> int:
        return math.prod(p**e for p, e in self.entries)

    @property
    def primes(self) -> tuple[int, ...]:
        return tuple(p for p, _ in self.entries)

    @property
    def radical(self) -> int:
        return math.prod(self.primes)

    @property
    def is_squarefree(self) -> bool:
        return all(e == 1 for _, e in self.entries)

    def exponent(self, p: int) -> int:
        for q, e in self.entries:
            if q == p:
                return e
        return 0

    def __iter__(self) -> Iterator[tuple[int, int]]:
        return iter(self.entries)

    def __len__(self) -> int:
        return len(self.entries)


@lru_cache(maxsize=1 << 16)
def factorize(n: int) -> Factorization:
    """Factor ``n >= 1``; ``factorize(1)`` is the empty factorization."""
    n = int(n)
    if n < 1:
        raise DomainError(f"factorize needs n >= 1, got {n}")
    if n <= SIEVE_LIMIT:
        return Factorization(tuple(_factor_small(n)))
    found: dict[int, int] = {}
    _factor_large(n, found)
    return Factorization(tuple(sorted(found.items())))


def prime_divisors(n: int) -> tuple[int, ...]:
    return factorize(n).primes


def is_squarefree(n: int) -> bool:
    return factorize(n).is_squarefree


def radical(n: int) -> int:
    return factorize(n).radical


def divisors(n: int) -> list[int]:
    divs = [1]
    for p, e in factorize(n):
        divs = [d * p**k for d in divs for k in range(e + 1)]
    return sorted(divs)


def totient(n: int) -> int:
    n = int(n)
    if n < 1:
        raise DomainError(f"totient needs n >= 1, got {n}")
    result = n
    for p in prime_divisors(n):
        result -= result // p
    return result


def padic_valuation(x, p: int) -> int:
    """``v_p(x)`` for a nonzero rational ``x`` and prime ``p``."""
    x = Fraction(x)
    if x == 0:
        raise DomainError("p-adic valuation of 0 is undefined")
    if not is_prime(p):
        raise DomainError(f"{p} is not prime")

    def _v(m: int) -> int:
        m = abs(m)
        k = 0
        while m % p == 0:
            m //= p
            k += 1
        return k

    return _v(x.numerator) - _v(x.denominator)


def _as_threshold(t) -> Fraction:
    # exact comparison; floats are taken at their exact binary value
    return t if isinstance(t, Fraction) else Fraction(t)


def mertens_tail(y, x) -> Fraction:
    """Exact ``sum(1/p for primes y <= p <= x)``."""
    y, x = _as_threshold(y), _as_threshold(x)
    if y < 1:
        raise DomainError("mertens_tail needs y >= 1")
    lo, hi = math.ceil(y), math.floor(x)
    return sum((Fraction(1, p) for p in primes_between(lo, hi)), Fraction(0))


def prime_harmonic_of(n: int, t=1) -> Fraction:
    """Exact ``sum(1/p)`` over distinct primes ``p | n`` with ``p >= t``."""
    t = _as_threshold(t)
    return sum((Fraction(1, p) for p in prime_divisors(n) if p >= t), Fraction(0))


def _squarefree_divisors_with_mobius(n: int) -> list[tuple[int, int]]:
    ps = prime_divisors(n)
    out = []
    for k in range(len(ps) + 1):
        sign = -1 if k % 2 else 1
        for combo in combinations(ps, k):
            out.append((math.prod(combo), sign))
    return out


def coprime_count(X: int, n: int) -> int:
    """``#{1 <= c <= X : gcd(c, n) == 1}`` by Moebius inclusion-exclusion."""
    if n < 1:
        raise DomainError("coprime_count needs n >= 1")
    if X <= 0:
        return 0
    return sum(mu * (X // d) for d, mu in _squarefree_divisors_with_mobius(n))


def weighted_coprime_sum(X: int, n: int, g: int) -> Fraction:
    """``sum over 1 <= c <= X, gcd(c, n) = 1 of prod_{p | gcd(g, c)} (1 + 1/(p-1))``.

    The weight is multiplicative in ``gcd(g, c)``: it equals ``sum_{d | gcd(g,c)} h(d)``
    with ``h`` supported on squarefree ``d`` and ``h(p) = 1/(p-1)``.  Exchanging the
    sums leaves coprime counts over arithmetic progressions ``c = d*m``.
    """
    if n < 1 or g < 1:
        raise DomainError("weighted_coprime_sum needs n, g >= 1")
    if X <= 0:
        return Fraction(0)
    total = Fraction(0)
    # d must be coprime to n, otherwise no c = d*m is coprime to n
    gps = [p for p in prime_divisors(g) if n % p]
    for k in range(len(gps) + 1):
        for combo in combinations(gps, k):
            d = math.prod(combo)
            h = Fraction(1, math.prod(p - 1 for p in combo))
            total += h * coprime_count(X // d, n)
    return total


def coprime_counts_upto(Xmax: int, n: int) -> np.ndarray:
    """``coprime_count(X, n)`` for every ``0 <= X <= Xmax`` as one int64 array."""
    if n < 1:
        raise DomainError("coprime_count needs n >= 1")
    xs = np.arange(max(Xmax, 0) + 1, dtype=np.int64)
    out = np.zeros_like(xs)
    for d, mu in _squarefree_divisors_with_mobius(n):
        out += mu * (xs // d)
    return out


def weighted_coprime_sums_upto(Xmax: int, n: int, g: int) -> tuple[np.ndarray, int]:
    """``weighted_coprime_sum(X, n, g)`` for every ``0 <= X <= Xmax``.

    Returned as ``(numerators, denominator)`` over the common denominator
    ``prod (p - 1)`` for primes ``p | g`` not dividing ``n``.
    """
    if n < 1 or g < 1:
        raise DomainError("weighted_coprime_sum needs n, g >= 1")
    counts = coprime_counts_upto(Xmax, n)
    xs = np.arange(len(counts), dtype=np.int64)
    gps = [p for p in prime_divisors(g) if n % p]
    den = math.prod(p - 1 for p in gps)
    out = np.zeros_like(counts)
    for k in range(len(gps) + 1):
        for combo in combinations(gps, k):
            d = math.prod(combo)
            out += (den // math.prod(p - 1 for p in combo)) * counts[xs // d]
    return out, den
