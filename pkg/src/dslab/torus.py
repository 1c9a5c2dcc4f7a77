"""Finite unions of closed intervals on the torus [0, 1), with exact rational endpoints.

A :class:`TorusIntervalSet` stores its endpoints as integer numerators over a
single denominator.  The canonical form is sorted, pairwise disjoint (touching
intervals are merged), split at 0 so that ``0 <= left < right <= 1``, free of
zero-length pieces, and has the smallest possible common denominator, so two
equal sets always have identical representations.  Sets are therefore equal
exactly when they agree up to finitely many points.
"""

from __future__ import annotations

import bisect
import csv
import heapq
import math
from fractions import Fraction
from typing import Iterable, Iterator, Sequence

import numpy as np

from .errors import DomainError
from .serial import parse_frac

_INT64_SAFE = 1 << 60


class TorusIntervalSet:
    __slots__ = ("_lefts", "_rights", "_den")

    def __init__(self, lefts: Sequence[int], rights: Sequence[int], den: int):
        # Trusted constructor: arguments must already be canonical.
        self._lefts = tuple(lefts)
        self._rights = tuple(rights)
        self._den = den

    # -- construction ---------------------------------------------------------------

    @classmethod
    def empty(cls) -> "TorusIntervalSet":
        return cls((), (), 1)

    @classmethod
    def full(cls) -> "TorusIntervalSet":
        return cls((0,), (1,), 1)

    @classmethod
    def from_intervals(cls, intervals: Iterable[tuple[object, object]]) -> "TorusIntervalSet":
        """Canonical set from arbitrary closed intervals ``[l, r]`` of the real line, read mod 1."""
        pairs = [(parse_frac(l), parse_frac(r)) for l, r in intervals]
        for l, r in pairs:
            if l > r:
                raise DomainError(f"interval [{l}, {r}] has left > right")
        if not pairs:
            return cls.empty()
        den = math.lcm(*(x.denominator for p in pairs for x in p))
        L = [l.numerator * (den // l.denominator) for l, _ in pairs]
        R = [r.numerator * (den // r.denominator) for _, r in pairs]
        return cls._canonical(L, R, den)

    @classmethod
    def _canonical(cls, L, R, den: int) -> "TorusIntervalSet":
        """Canonicalize raw integer intervals ``[L_i, R_i] / den`` (any real position)."""
        if len(L) == 0:
            return cls.empty()
        if not (isinstance(L, np.ndarray) and L.dtype == np.int64):
            lo, hi = min(L), max(R)
            small = den < _INT64_SAFE and -_INT64_SAFE < lo and hi < _INT64_SAFE
            dtype = np.int64 if small else object
            L = np.asarray(L, dtype=dtype)
            R = np.asarray(R, dtype=dtype)
        dtype = L.dtype
        if np.any(R - L >= den):
            return cls.full()
        shift = L // den
        L = L - shift * den
        R = R - shift * den
        wraps = R > den
        if np.any(wraps):
            L = np.concatenate([L, np.zeros(int(wraps.sum()), dtype=dtype)])
            R = np.concatenate([np.where(wraps, den, R), R[wraps] - den])
        keep = R > L
        L, R = L[keep], R[keep]
        if len(L) == 0:
            return cls.empty()
        order = np.argsort(L, kind="stable")
        L, R = L[order], R[order]
        reach = np.maximum.accumulate(R)
        starts = np.ones(len(L), dtype=bool)
        starts[1:] = L[1:] > reach[:-1]
        idx = np.nonzero(starts)[0]
        lefts = L[idx]
        rights = reach[np.append(idx[1:] - 1, len(L) - 1)]
        return cls._normalized([int(x) for x in lefts], [int(x) for x in rights], den)

    @classmethod
    def _normalized(cls, lefts: list[int], rights: list[int], den: int) -> "TorusIntervalSet":
        if not lefts:
            return cls.empty()
        g = math.gcd(den, math.gcd(*lefts), math.gcd(*rights))
        if g > 1:
            lefts = [x // g for x in lefts]
            rights = [x // g for x in rights]
            den //= g
        return cls(lefts, rights, den)

    # -- accessors ------------------------------------------------------------------

    @property
    def denominator(self) -> int:
        return self._den

    @property
    def intervals(self) -> list[tuple[Fraction, Fraction]]:
        d = self._den
        return [(Fraction(l, d), Fraction(r, d)) for l, r in zip(self._lefts, self._rights)]

    def __len__(self) -> int:
        return len(self._lefts)

    def __iter__(self) -> Iterator[tuple[Fraction, Fraction]]:
        return iter(self.intervals)

    def __bool__(self) -> bool:
        return bool(self._lefts)

    def __eq__(self, other) -> bool:
        if not isinstance(other, TorusIntervalSet):
            return NotImplemented
        return (self._den, self._lefts, self._rights) == (other._den, other._lefts, other._rights)

    def __hash__(self) -> int:
        return hash((self._den, self._lefts, self._rights))

    def __repr__(self) -> str:
        body = ", ".join(f"[{l}, {r}]" for l, r in self.intervals[:6])
        more = f", ... ({len(self)} intervals)" if len(self) > 6 else ""
        return f"TorusIntervalSet({body}{more})"

    def measure(self) -> Fraction:
        return Fraction(sum(self._rights) - sum(self._lefts), self._den)

    def contains(self, x) -> bool:
        """Membership of ``x`` (closed endpoints); ``x`` is read mod 1."""
        x = parse_frac(x) % 1
        num = x.numerator * self._den
        d = x.denominator
        scaled = [l * d for l in self._lefts]
        i = bisect.bisect_right(scaled, num) - 1
        if i >= 0 and num <= self._rights[i] * d:
            return True
        # x == 0 also lies in an interval ending at 1
        return x == 0 and bool(self._rights) and self._rights[-1] == self._den

    def scaled_to(self, den: int) -> tuple[list[int], list[int]]:
        """Endpoint numerators over ``den`` (a multiple of the set's denominator)."""
        k, rem = divmod(den, self._den)
        if rem:
            raise ValueError("target denominator must be a multiple")
        return [l * k for l in self._lefts], [r * k for r in self._rights]

    def translate(self, c) -> "TorusIntervalSet":
        c = parse_frac(c)
        den = math.lcm(self._den, c.denominator)
        L, R = self.scaled_to(den)
        shift = c.numerator * (den // c.denominator)
        return self._canonical([l + shift for l in L], [r + shift for r in R], den)

    # -- set algebra ----------------------------------------------------------------

    def union(self, other: "TorusIntervalSet") -> "TorusIntervalSet":
        return union_all([self, other])

    def intersect(self, other: "TorusIntervalSet") -> "TorusIntervalSet":
        if not self or not other:
            return TorusIntervalSet.empty()
        den = math.lcm(self._den, other._den)
        L1, R1 = self.scaled_to(den)
        L2, R2 = other.scaled_to(den)
        out_l, out_r = [], []
        i = j = 0
        while i < len(L1) and j < len(L2):
            lo = max(L1[i], L2[j])
            hi = min(R1[i], R2[j])
            if lo < hi:
                out_l.append(lo)
                out_r.append(hi)
            if R1[i] < R2[j]:
                i += 1
            else:
                j += 1
        return TorusIntervalSet._normalized(out_l, out_r, den)

    def complement(self) -> "TorusIntervalSet":
        d = self._den
        out_l, out_r = [], []
        prev = 0
        for l, r in zip(self._lefts, self._rights):
            if l > prev:
                out_l.append(prev)
                out_r.append(l)
            prev = r
        if prev < d:
            out_l.append(prev)
            out_r.append(d)
        return TorusIntervalSet._normalized(out_l, out_r, d)

    __and__ = intersect
    __or__ = union
    __invert__ = complement

    def is_subset(self, other: "TorusIntervalSet") -> bool:
        return self.intersect(other) == self

    # -- export ---------------------------------------------------------------------

    def csv_rows(self) -> list[tuple[int, int, int, int]]:
        return [(l.numerator, l.denominator, r.numerator, r.denominator) for l, r in self.intervals]

    def write_csv(self, fh) -> None:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["left_num", "left_den", "right_num", "right_den"])
        w.writerows(self.csv_rows())


def union(s1: TorusIntervalSet, s2: TorusIntervalSet) -> TorusIntervalSet:
    return s1.union(s2)


def intersect(s1: TorusIntervalSet, s2: TorusIntervalSet) -> TorusIntervalSet:
    return s1.intersect(s2)


def complement(s: TorusIntervalSet) -> TorusIntervalSet:
    return s.complement()


def contains(s: TorusIntervalSet, x) -> bool:
    return s.contains(x)


def measure(s: TorusIntervalSet) -> Fraction:
    return s.measure()


def union_all(sets: Sequence[TorusIntervalSet]) -> TorusIntervalSet:
    """Union of many canonical sets by a k-way merge of their sorted interval lists."""
    sets = [s for s in sets if s]
    if not sets:
        return TorusIntervalSet.empty()
    den = math.lcm(*(s.denominator for s in sets))
    streams = [zip(*s.scaled_to(den)) for s in sets]
    out_l: list[int] = []
    out_r: list[int] = []
    for l, r in heapq.merge(*streams):
        if out_r and l <= out_r[-1]:
            if r > out_r[-1]:
                out_r[-1] = r
        else:
            out_l.append(l)
            out_r.append(r)
    return TorusIntervalSet._normalized(out_l, out_r, den)


def build_Aq(q: int, psi_q, coprime_only: bool = True, gamma=0) -> TorusIntervalSet:
    """Union over residues ``a`` of ``[(a + gamma - psi)/q, (a + gamma + psi)/q]`` mod 1.

    With ``coprime_only`` only ``gcd(a, q) == 1`` is used (the set ``A_q``);
    otherwise all residues (the set ``E_q``).  ``psi_q == 0`` gives the empty set.
    """
    q = int(q)
    if q < 1:
        raise DomainError(f"q must be positive, got {q}")
    psi = parse_frac(psi_q)
    gamma = parse_frac(gamma)
    if psi < 0:
        raise DomainError(f"psi(q) must be nonnegative, got {psi}")
    if not 0 <= gamma < 1:
        raise DomainError(f"gamma must lie in [0, 1), got {gamma}")
    if psi == 0:
        return TorusIntervalSet.empty()
    if 2 * psi >= 1 and not coprime_only:
        return TorusIntervalSet.full()
    gd, pd = gamma.denominator, psi.denominator
    den = q * gd * pd
    a = np.arange(q, dtype=np.int64)
    if coprime_only:
        a = a[np.gcd(a, q) == 1]
    rad = psi.numerator * gd
    if den * (q + 2) >= _INT64_SAFE or rad >= _INT64_SAFE:
        a = a.astype(object)
    centre = (a * gd + gamma.numerator) * pd
    return TorusIntervalSet._canonical(centre - rad, centre + rad, den)


def build_Eq(q: int, psi_q, gamma=0) -> TorusIntervalSet:
    return build_Aq(q, psi_q, coprime_only=False, gamma=gamma)


def coverage_moments(sets: Sequence[TorusIntervalSet]) -> tuple[Fraction, Fraction, Fraction]:
    """``(int f, int f**2, measure{f > 0})`` for ``f = sum of indicator functions``.

    ``int f**2`` equals ``sum_{i,j} measure(S_i & S_j)`` (diagonal included),
    computed with one sweep instead of a quadratic number of intersections.
    """
    sets = [s for s in sets if s]
    if not sets:
        return Fraction(0), Fraction(0), Fraction(0)
    den = math.lcm(*(s.denominator for s in sets))
    events: list[tuple[int, int]] = []
    for s in sets:
        L, R = s.scaled_to(den)
        events.extend((l, 1) for l in L)
        events.extend((r, -1) for r in R)
    events.sort()
    first = second = covered = 0
    level = 0
    prev = 0
    for x, step in events:
        if level:
            width = x - prev
            first += level * width
            second += level * level * width
            covered += width
        level += step
        prev = x
    return Fraction(first, den), Fraction(second, den), Fraction(covered, den)
