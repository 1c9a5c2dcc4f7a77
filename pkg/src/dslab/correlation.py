"""Overlaps of the sets A_q, variance sums, GCD sums and the finite Chung-Erdos bound."""

from __future__ import annotations

import csv
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable

import numpy as np

from .approx import HALF, ApproxFunction
from .errors import DomainError
from .numtheory import is_squarefree, prime_divisors, totient, totients_upto, weighted_coprime_sum
from .reals import CertifiedReal, iv_precision
from .serial import frac_str, parse_frac
from .torus import TorusIntervalSet, build_Aq, coverage_moments, union_all

log = logging.getLogger(__name__)


def _coprime_residues(q: int) -> np.ndarray:
    a = np.arange(q, dtype=np.int64)
    return a[np.gcd(a, q) == 1]


def pair_count_exact(q: int, r: int, delta) -> int:
    """``#{(a, b) in Z_q^* x Z_r^* : ||a/q - b/r|| <= delta}`` by enumerating all pairs.

    Distances are taken on the torus.
    """
    if q == r:
        raise DomainError("pair counting needs q != r")
    if q < 1 or r < 1:
        raise DomainError("q and r must be positive")
    delta = parse_frac(delta)
    if delta < 0:
        raise DomainError("delta must be nonnegative")
    qr = q * r
    # |a/q - b/r| = |a r - b q| / (q r); compare numerators over q r * den(delta)
    limit = delta.numerator * qr
    dd = delta.denominator
    A = _coprime_residues(q) * r
    B = _coprime_residues(r) * q
    big = qr * max(dd, 1) >= 1 << 62 or limit >= 1 << 62
    if big:
        A, B = A.astype(object), B.astype(object)
    total = 0
    chunk = max(1, (1 << 22) // max(len(B), 1))
    for i in range(0, len(A), chunk):
        m = (A[i : i + chunk, None] - B[None, :]) % qr
        dist = np.minimum(m, qr - m)
        total += int(np.count_nonzero(dist * dd <= limit))
    return total


def pair_count_incidence(q: int, r: int, delta) -> int:
    """Same count as :func:`pair_count_exact`, by listing for each ``a`` the integers ``b``
    whose point ``b/r`` falls in the window ``[a/q - delta, a/q + delta]``.
    """
    if q == r:
        raise DomainError("pair counting needs q != r")
    delta = parse_frac(delta)
    total = 0
    for a in range(q):
        if math.gcd(a, q) != 1:
            continue
        lo = math.ceil((Fraction(a, q) - delta) * r)
        hi = math.floor((Fraction(a, q) + delta) * r)
        hits = {b % r for b in range(lo, hi + 1) if math.gcd(b % r, r) == 1}
        total += len(hits)
    return total


def pair_count_formula(q: int, r: int, psi_r) -> Fraction:
    """Closed-form CRT count ``2 phi(g)^2/g * sum_{c <= q psi_r / g, (c, qr/g^2) = 1} prod (1 + 1/(p-1))``.

    This is compared against :func:`pair_count_exact` with ``delta = psi_r / r``;
    it is not assumed to be exact.
    """
    if q == r:
        raise DomainError("pair counting needs q != r")
    psi_r = parse_frac(psi_r)
    g = math.gcd(q, r)
    limit = math.floor(q * psi_r / g)
    phig = totient(g)
    return Fraction(2 * phig * phig, g) * weighted_coprime_sum(limit, q * r // (g * g), g)


def compute_D(q: int, r: int, psi: ApproxFunction) -> Fraction:
    return max(q * psi(r), r * psi(q)) / math.gcd(q, r)


def overlap_bound_product(q: int, r: int, D: Fraction) -> Fraction:
    """``prod (1 + 1/p)`` over primes ``p | qr/gcd(q,r)^2`` with ``p > D``."""
    g = math.gcd(q, r)
    out = Fraction(1)
    for p in prime_divisors(q * r // (g * g)):
        if p > D:
            out *= Fraction(p + 1, p)
    return out


@dataclass(frozen=True)
class OverlapReport:
    q: int
    r: int
    exact_overlap: Fraction
    measure_q: Fraction
    measure_r: Fraction
    D_value: Fraction
    bound_product: Fraction
    ratio: Fraction

    @property
    def product_measure(self) -> Fraction:
        return self.measure_q * self.measure_r

    @property
    def bound(self) -> Fraction:
        return self.product_measure * self.bound_product

    def csv_row(self) -> list:
        return [self.q, self.r, frac_str(self.exact_overlap), frac_str(self.bound), frac_str(self.ratio)]


def overlap_report(q: int, r: int, psi: ApproxFunction, squarefree_only: bool = False) -> OverlapReport:
    if q == r:
        raise DomainError("overlap_report needs q != r")
    if squarefree_only and not (is_squarefree(q) and is_squarefree(r)):
        raise DomainError(f"({q}, {r}) is not a pair of square-free integers")
    pq, pr = psi(q), psi(r)
    if pq > HALF or pr > HALF:
        raise DomainError("overlap_report assumes psi <= 1/2")
    Aq, Ar = build_Aq(q, pq), build_Aq(r, pr)
    overlap = Aq.intersect(Ar).measure()
    D = compute_D(q, r, psi)
    prod = overlap_bound_product(q, r, D)
    mq, mr = Aq.measure(), Ar.measure()
    denom = mq * mr * prod
    return OverlapReport(q, r, overlap, mq, mr, D, prod, overlap / denom if denom else Fraction(0))


def overlap_grid(psi: ApproxFunction, X: int, Y: int, threads: int = 1) -> list[OverlapReport]:
    """Reports for all ``X <= q < r <= Y`` in lexicographic order."""
    pairs = [(q, r) for q in range(X, Y + 1) for r in range(q + 1, Y + 1)]
    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            return list(ex.map(lambda qr: overlap_report(qr[0], qr[1], psi), pairs))
    return [overlap_report(q, r, psi) for q, r in pairs]


def _sets(psi: ApproxFunction, X: int, Y: int, coprime_only: bool) -> list[TorusIntervalSet]:
    return [build_Aq(q, v, coprime_only) for q, v in sorted(psi.values(X, Y).items())]


def variance_sum(psi: ApproxFunction, X: int, Y: int, coprime_only: bool = True) -> tuple[Fraction, Fraction]:
    """``(sum_{X<=q,r<=Y} measure(S_q & S_r), sum_{X<=q<=Y} measure(S_q))`` with the diagonal included."""
    if X > Y:
        raise DomainError(f"empty range [{X}, {Y}]")
    first, second, _ = coverage_moments(_sets(psi, X, Y, coprime_only))
    return second, first


def quasi_independence_ratio(psi: ApproxFunction, X: int, Y: int, coprime_only: bool = True) -> Fraction:
    double, single = variance_sum(psi, X, Y, coprime_only)
    if single == 0:
        raise DomainError("total measure is zero on the range")
    return double / (single * single)


@dataclass(frozen=True)
class ChungErdos:
    lower_bound: Fraction
    union_measure: Fraction
    holds: bool


def chung_erdos_check(psi: ApproxFunction, X: int, Y: int, coprime_only: bool = True) -> ChungErdos:
    """Finite Cauchy-Schwarz bound ``measure(union S_q) >= (sum measure)^2 / sum_{q,r} measure(S_q & S_r)``."""
    sets = _sets(psi, X, Y, coprime_only)
    first, second, _ = coverage_moments(sets)
    if second == 0:
        raise DomainError("sum of pairwise overlaps is zero")
    lower = first * first / second
    union = union_all(sets).measure()
    return ChungErdos(lower, union, union >= lower)


def gcd_sum(psi: ApproxFunction, Q: int, prec: int = 128) -> CertifiedReal:
    """``sum_{q,r<=Q} w_q w_r gcd(q,r)/sqrt(q r)`` with ``w_q = phi(q) psi(q)/q``, as a certified enclosure.

    Uses ``gcd(q, r) = sum_{d | q, d | r} phi(d)`` to rewrite the double sum as
    ``sum_d phi(d) (sum_{d | q} w_q / sqrt(q))**2``.
    """
    vals = psi.values(1, Q)
    if not vals:
        return CertifiedReal.exact(0)
    phi = totients_upto(Q)
    with iv_precision(prec + 16) as iv:
        s = [iv.mpf(0)] * (Q + 1)
        for q, v in vals.items():
            w = v * Fraction(int(phi[q]), q)
            s[q] = iv.mpf(w.numerator) / w.denominator / iv.sqrt(q)
        total = iv.mpf(0)
        for d in range(1, Q + 1):
            t = iv.mpf(0)
            hit = False
            for q in range(d, Q + 1, d):
                if q in vals:
                    t += s[q]
                    hit = True
            if hit:
                total += int(phi[d]) * t * t
        return CertifiedReal.from_iv(total)


@dataclass(frozen=True)
class CollapseReport:
    sum_of_measures: Fraction
    union_measure: Fraction
    ratio: Fraction


def overlap_collapse_report(psi: ApproxFunction) -> CollapseReport:
    """Union of the unrestricted sets ``E_q`` against the sum of their measures."""
    if not psi.is_finite:
        raise DomainError("overlap collapse needs a finite support")
    if not psi.support:
        raise DomainError("empty support")
    sets = [build_Aq(q, v, coprime_only=False) for q, v in psi.support.items()]
    total = sum((s.measure() for s in sets), Fraction(0))
    union = union_all(sets).measure()
    return CollapseReport(total, union, union / total)


def write_overlap_csv(fh, reports: Iterable[OverlapReport]) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["q", "r", "exact_overlap", "bound", "ratio"])
    for rep in reports:
        w.writerow(rep.csv_row())


def log_formula_discrepancy(q: int, r: int, psi_r, exact: int, formula: Fraction) -> None:
    if exact != formula:
        log.info("pair_count_formula deviates: q=%d r=%d psi_r=%s exact=%d formula=%s", q, r, psi_r, exact, formula)
