"""Weighted GCD graphs, prime compression and the anatomy counts.

A support ``V`` carries weights ``psi(v)`` and the measure
``mu_psi(v) = phi(v) psi(v) / v``.  For two supports the edge set
``E^{t,C}`` keeps the pairs with ``D(v, w) <= 1`` whose prime-harmonic sum
over ``vw / gcd(v, w)**2`` (primes ``>= t``) reaches ``C``.  All arithmetic is
exact; thresholds of the form ``e**j`` are decided with certified enclosures.
"""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from types import MappingProxyType
from typing import Iterable, Mapping

import numpy as np

from .errors import DomainError, UnsupportedInputError
from .numtheory import divisors, factorize, is_prime, is_squarefree, prime_harmonic_of, primes_between, totient
from .reals import CertifiedReal, compare_exp, exp_enclosure, floor_exp, iv_precision, prime_threshold_exp
from .serial import frac_str, parse_frac


@lru_cache(maxsize=1 << 16)
def _valuations(n: int) -> dict[int, int]:
    return dict(factorize(n))


def _reduced_lcm_primes(v: int, w: int) -> list[int]:
    """Primes dividing ``vw / gcd(v, w)**2``, i.e. those with ``v_p(v) != v_p(w)``."""
    fv, fw = _valuations(v), _valuations(w)
    return [p for p in fv.keys() | fw.keys() if fv.get(p, 0) != fw.get(p, 0)]


def _harmonic(primes: Iterable[int], t: Fraction) -> Fraction:
    return sum((Fraction(1, p) for p in primes if p >= t), Fraction(0))


@dataclass(frozen=True)
class WeightedSupport:
    """Finite map ``q -> psi(q) > 0``; zero weights are dropped on construction."""

    entries: Mapping[int, Fraction]
    squarefree_flag: bool

    @classmethod
    def of(cls, mapping: Mapping[int, object], squarefree: bool | None = None) -> "WeightedSupport":
        clean = {}
        for q, v in mapping.items():
            q, v = int(q), parse_frac(v)
            if q < 1:
                raise DomainError(f"support keys must be positive, got {q}")
            if v < 0:
                raise DomainError(f"weight at {q} is negative")
            if v:
                clean[q] = v
        all_sf = all(is_squarefree(q) for q in clean)
        if squarefree and not all_sf:
            bad = min(q for q in clean if not is_squarefree(q))
            raise DomainError(f"key {bad} is not square-free")
        flag = all_sf if squarefree is None else squarefree
        return cls(MappingProxyType(dict(sorted(clean.items()))), flag)

    def __call__(self, q: int) -> Fraction:
        return self.entries.get(q, Fraction(0))

    def __iter__(self):
        return iter(self.entries)

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, q) -> bool:
        return q in self.entries

    def weight(self, q: int) -> Fraction:
        """``mu(q) = phi(q) psi(q) / q``."""
        return Fraction(totient(q), q) * self.entries[q]

    def to_json(self) -> list:
        return [[q, frac_str(v)] for q, v in self.entries.items()]

    @classmethod
    def from_json(cls, rows) -> "WeightedSupport":
        return cls.of({int(q): parse_frac(v) for q, v in rows})


def mu(support: WeightedSupport, subset: Iterable[int] | None = None) -> Fraction:
    """``sum phi(v) psi(v) / v`` over ``subset`` (default: the whole support)."""
    keys = support.entries.keys() if subset is None else subset
    total = Fraction(0)
    for v in keys:
        if v not in support:
            raise DomainError(f"{v} is not in the support")
        total += support.weight(v)
    return total


def D_value(v: int, w: int, psi: WeightedSupport, theta: WeightedSupport) -> Fraction:
    """``max(w psi(v), v theta(w)) / gcd(v, w)``."""
    return max(w * psi(v), v * theta(w)) / math.gcd(v, w)


def prime_set(V: WeightedSupport, W: WeightedSupport) -> frozenset[int]:
    """Primes dividing ``vw`` for some ``(v, w)`` in ``V x W``."""
    if not len(V) or not len(W):
        return frozenset()
    out: set[int] = set()
    for q in list(V) + list(W):
        out.update(_valuations(q))
    return frozenset(out)


@dataclass(frozen=True)
class GcdGraph:
    V: WeightedSupport
    W: WeightedSupport
    t: Fraction
    C: Fraction
    edges: frozenset[tuple[int, int]]

    @classmethod
    def from_edges(cls, V, W, t, C, edges) -> "GcdGraph":
        """Graph on an explicit edge subset, checked against the defining conditions."""
        t, C = parse_frac(t), parse_frac(C)
        edges = frozenset((int(v), int(w)) for v, w in edges)
        for v, w in edges:
            if not is_edge(v, w, V, W, t, C):
                raise DomainError(f"({v}, {w}) is not an edge of E^(t,C)")
        return cls(V, W, t, C, edges)

    def edge_measure(self, edges: Iterable[tuple[int, int]] | None = None) -> Fraction:
        """``mu_{psi,theta}(E) = sum mu_psi(v) mu_theta(w)`` over the edges."""
        es = self.edges if edges is None else edges
        return sum((self.V.weight(v) * self.W.weight(w) for v, w in es), Fraction(0))

    def neighbours(self, v: int) -> list[int]:
        return sorted(w for a, w in self.edges if a == v)

    def prime_set(self) -> frozenset[int]:
        return prime_set(self.V, self.W)

    def sorted_edges(self) -> list[tuple[int, int]]:
        return sorted(self.edges)

    def to_json(self) -> dict:
        return {
            "V": self.V.to_json(),
            "W": self.W.to_json(),
            "t": frac_str(self.t),
            "C": frac_str(self.C),
            "edges": [list(e) for e in self.sorted_edges()],
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True)

    @classmethod
    def from_json(cls, obj: Mapping) -> "GcdGraph":
        V, W = WeightedSupport.from_json(obj["V"]), WeightedSupport.from_json(obj["W"])
        return cls.from_edges(V, W, obj["t"], obj["C"], [tuple(e) for e in obj["edges"]])


def is_edge(v: int, w: int, V: WeightedSupport, W: WeightedSupport, t: Fraction, C: Fraction) -> bool:
    if v not in V or w not in W:
        return False
    if D_value(v, w, V, W) > 1:
        return False
    return C <= 0 or _harmonic(_reduced_lcm_primes(v, w), t) >= C


def build_edges(V: WeightedSupport, W: WeightedSupport, t, C, threads: int = 1) -> GcdGraph:
    """All pairs of ``V x W`` with ``D <= 1`` and prime-harmonic sum ``>= C`` (primes ``>= t``)."""
    t, C = parse_frac(t), parse_frac(C)
    if t < 1:
        raise DomainError("t must be at least 1")
    ws = list(W)

    def row(v):
        return [(v, w) for w in ws if is_edge(v, w, V, W, t, C)]

    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            rows = list(ex.map(row, V))
    else:
        rows = [row(v) for v in V]
    return GcdGraph(V, W, t, C, frozenset(e for r in rows for e in r))


def _le_exp(x: Fraction, j: int, fl: int) -> bool:
    """``x <= e**j`` given ``fl = floor(e**j)``."""
    if x <= fl:
        return True
    if x >= fl + 1:
        return False
    return compare_exp(x, j) <= 0


def build_edges_ej(psi: WeightedSupport, j: int, threshold=10) -> frozenset[tuple[int, int]]:
    """Pairs ``(v, w)`` of the support with ``D(v, w) <= e**j`` and
    ``sum_{p | vw/gcd**2, p >= e**j} 1/p >= threshold``."""
    if j < 0:
        raise DomainError("j must be nonnegative")
    threshold = parse_frac(threshold)
    fl = floor_exp(j)
    pmin = prime_threshold_exp(j)
    keys = list(psi)
    out = set()
    for v in keys:
        for w in keys:
            if threshold > 0 and _harmonic(_reduced_lcm_primes(v, w), Fraction(pmin)) < threshold:
                continue
            if _le_exp(D_value(v, w, psi, psi), j, fl):
                out.add((v, w))
    return frozenset(out)


def prop54_sum(psi: WeightedSupport, j: int, threshold=10) -> Fraction:
    """``sum mu(v) mu(w)`` over the edge set of :func:`build_edges_ej`."""
    return sum((psi.weight(v) * psi.weight(w) for v, w in build_edges_ej(psi, j, threshold)), Fraction(0))


@dataclass(frozen=True)
class Prop54Report:
    j: int
    threshold: Fraction
    edge_count: int
    total: Fraction
    exp_minus_j: CertifiedReal
    scaled: CertifiedReal  # total * e**j


def prop54_report(psi: WeightedSupport, j: int, threshold=10, prec: int = 256) -> Prop54Report:
    threshold = parse_frac(threshold)
    edges = build_edges_ej(psi, j, threshold)
    total = sum((psi.weight(v) * psi.weight(w) for v, w in edges), Fraction(0))
    e = exp_enclosure(j, prec)
    inv = CertifiedReal(1 / e.hi, 1 / e.lo)
    return Prop54Report(j, threshold, len(edges), total, inv, CertifiedReal(total * e.lo, total * e.hi))


# -- compression -------------------------------------------------------------------------


@dataclass(frozen=True)
class CompressionStep:
    """Edge-measure split ``m_p(i, j)`` and the marginals ``alpha_i``, ``beta_j`` for one prime."""

    p: int
    m_matrix: tuple[tuple[Fraction, Fraction], tuple[Fraction, Fraction]]
    alpha: tuple[Fraction, Fraction]
    beta: tuple[Fraction, Fraction]

    def m(self, i: int, j: int) -> Fraction:
        return self.m_matrix[i][j]


def _require_squarefree(g: GcdGraph) -> None:
    if not (g.V.squarefree_flag and g.W.squarefree_flag):
        raise UnsupportedInputError("compression needs square-free supports")


def _check_prime(p: int) -> None:
    if not is_prime(p):
        raise DomainError(f"{p} is not prime")


def partition_by_prime(g: GcdGraph, p: int) -> CompressionStep:
    _require_squarefree(g)
    _check_prime(p)
    total = g.edge_measure()
    if total == 0:
        raise DomainError("edge measure is zero")
    cells = [[Fraction(0), Fraction(0)], [Fraction(0), Fraction(0)]]
    for v, w in g.edges:
        cells[int(v % p == 0)][int(w % p == 0)] += g.V.weight(v) * g.W.weight(w)
    m = tuple(tuple(c / total for c in row) for row in cells)
    muV, muW = mu(g.V), mu(g.W)
    a1 = mu(g.V, [v for v in g.V if v % p == 0]) / muV
    b1 = mu(g.W, [w for w in g.W if w % p == 0]) / muW
    return CompressionStep(p, m, (1 - a1, a1), (1 - b1, b1))


@dataclass(frozen=True)
class IdentityCheck:
    name: str
    lhs: Fraction
    rhs: Fraction

    @property
    def equal(self) -> bool:
        return self.lhs == self.rhs


@dataclass(frozen=True)
class CompressionResult:
    p: int
    i: int
    j: int
    psi: WeightedSupport
    theta: WeightedSupport
    edges: frozenset[tuple[int, int]]
    C: Fraction
    checks: tuple[IdentityCheck, ...]
    lost_primes: frozenset[int]

    @property
    def all_equal(self) -> bool:
        return all(c.equal for c in self.checks)

    def graph(self, t) -> GcdGraph:
        return GcdGraph(self.psi, self.theta, parse_frac(t), self.C, self.edges)

    def audit_rows(self) -> list[list]:
        return [[self.p, self.i, self.j, frac_str(c.lhs), frac_str(c.rhs), str(c.equal).lower()] for c in self.checks]


AUDIT_HEADER = ["p", "i", "j", "lhs_num/den", "rhs_num/den", "equal"]
AUDIT_ORDER = ("measure-V", "measure-W", "edge-measure", "edges-outside", "extra-primes")


def compress(g: GcdGraph, p: int, i: int, j: int) -> CompressionResult:
    """Remove ``p`` from the graph restricted to ``V_i x W_j`` and check the rescaling identities.

    Checks, in order: the two support measures, the edge measure, the number of
    compressed edges violating ``E^{t, C - [i != j]/t}`` (expected 0) and the
    number of compressed primes outside ``P \\ {p}`` (expected 0).
    """
    _require_squarefree(g)
    _check_prime(p)
    if i not in (0, 1) or j not in (0, 1):
        raise DomainError("i and j must be 0 or 1")
    lo = min(i, j)
    pi, pj = p**i, p**j
    sv, sw = Fraction(p ** (j - lo)), Fraction(p ** (i - lo))
    psi_t = WeightedSupport.of({v // pi: sv * g.V(v) for v in g.V if (v % p == 0) == bool(i)})
    theta_t = WeightedSupport.of({w // pj: sw * g.W(w) for w in g.W if (w % p == 0) == bool(j)})
    edges_ij = [(v, w) for v, w in g.edges if (v % p == 0) == bool(i) and (w % p == 0) == bool(j)]
    edges_t = frozenset((v // pi, w // pj) for v, w in edges_ij)
    C_t = g.C - (Fraction(1) / g.t if i != j else 0)

    Vi = [v for v in g.V if (v % p == 0) == bool(i)]
    Wj = [w for w in g.W if (w % p == 0) == bool(j)]
    rhs_v = sv * Fraction(pi, totient(pi)) * mu(g.V, Vi)
    rhs_w = sw * Fraction(pj, totient(pj)) * mu(g.W, Wj)
    lhs_e = sum((g.V.weight(v) * g.W.weight(w) for v, w in edges_ij), Fraction(0))
    inner = sum((psi_t.weight(v) * theta_t.weight(w) for v, w in edges_t), Fraction(0))
    rhs_e = Fraction(totient(pi) * totient(pj), pi * pj) / p ** abs(i - j) * inner
    outside = sum(1 for v, w in edges_t if not is_edge(v, w, psi_t, theta_t, g.t, C_t))
    P, P_t = g.prime_set(), prime_set(psi_t, theta_t)
    extra = P_t - (P - {p})
    checks = (
        IdentityCheck("measure-V", mu(psi_t), rhs_v),
        IdentityCheck("measure-W", mu(theta_t), rhs_w),
        IdentityCheck("edge-measure", lhs_e, rhs_e),
        IdentityCheck("edges-outside", Fraction(outside), Fraction(0)),
        IdentityCheck("extra-primes", Fraction(len(extra)), Fraction(0)),
    )
    return CompressionResult(p, i, j, psi_t, theta_t, edges_t, C_t, checks, frozenset((P - {p}) - P_t))


def write_audit_csv(fh, results: Iterable[CompressionResult]) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(AUDIT_HEADER)
    for r in results:
        w.writerows(r.audit_rows())


# -- structure factorization ---------------------------------------------------------------


@dataclass(frozen=True)
class StructureWitness:
    """``N = prod p**k_p`` with ``k_p in {0, 1}``."""

    exponents: Mapping[int, int]

    @property
    def N(self) -> int:
        return math.prod(p**k for p, k in self.exponents.items())

    @classmethod
    def of(cls, exponents: Mapping[int, int]) -> "StructureWitness":
        for p, k in exponents.items():
            if not is_prime(p) or k not in (0, 1):
                raise DomainError(f"bad exponent {k} at {p}")
        return cls(MappingProxyType(dict(sorted(exponents.items()))))

    def violations(self, v: int, w: int) -> tuple[int, ...]:
        return structure_violations(v, w, self.N)


@dataclass(frozen=True)
class StructureFactors:
    v_minus: int
    v_plus: int
    w_minus: int
    w_plus: int

    def as_tuple(self) -> tuple[int, int, int, int]:
        return (self.v_minus, self.v_plus, self.w_minus, self.w_plus)


@dataclass(frozen=True)
class StructureViolation:
    primes: tuple[int, ...]


def structure_violations(v: int, w: int, N: int) -> tuple[int, ...]:
    """Primes with ``|v_p(v/N)| + |v_p(w/N)| >= 2``."""
    fv, fw, fN = _valuations(v), _valuations(w), _valuations(N)
    bad = []
    for p in sorted(fv.keys() | fw.keys() | fN.keys()):
        n = fN.get(p, 0)
        if abs(fv.get(p, 0) - n) + abs(fw.get(p, 0) - n) >= 2:
            bad.append(p)
    return tuple(bad)


def structure_factorize(v: int, w: int, N: int) -> StructureFactors | StructureViolation:
    """``(N/gcd(N,v), v/gcd(N,v), N/gcd(N,w), w/gcd(N,w))`` when the valuation condition holds."""
    for x in (v, w, N):
        if x < 1:
            raise DomainError("v, w, N must be positive")
        if not is_squarefree(x):
            raise UnsupportedInputError(f"{x} is not square-free")
    bad = structure_violations(v, w, N)
    if bad:
        return StructureViolation(bad)
    gv, gw = math.gcd(N, v), math.gcd(N, w)
    out = StructureFactors(N // gv, v // gv, N // gw, w // gw)
    parts = out.as_tuple()
    g = math.gcd(v, w)
    ok = (
        all(math.gcd(a, b) == 1 for k, a in enumerate(parts) for b in parts[k + 1 :])
        and v * out.v_minus == N * out.v_plus
        and w * out.w_minus == N * out.w_plus
        and (v * w) // (g * g) == math.prod(parts)
    )
    if not ok:
        raise ArithmeticError(f"structure identities failed for v={v}, w={w}, N={N}")
    return out


# -- anatomy -------------------------------------------------------------------------------


def _harmonic_table(x: int, t: Fraction) -> np.ndarray:
    h = np.zeros(x + 1)
    for p in primes_between(max(2, math.ceil(t)), x):
        h[p::p] += 1.0 / p
    return h


def _anatomy_hits(x: int, t: Fraction, c: Fraction) -> np.ndarray:
    """Boolean ``h[n-1]``: does ``sum_{p | n, p >= t} 1/p >= c`` hold for ``n <= x``.

    Sums are accumulated in floating point; values within ``1e-9`` of ``c`` are
    recomputed exactly.
    """
    h = _harmonic_table(x, t)[1:]
    cf = float(c)
    hit = h >= cf + 1e-9
    for k in np.nonzero(np.abs(h - cf) < 1e-9)[0]:
        hit[k] = prime_harmonic_of(int(k) + 1, t) >= c
    return hit


def anatomy_count(x: int, t, c) -> int:
    """``#{n <= x : sum_{p | n, p >= t} 1/p >= c}``."""
    if x < 1:
        raise DomainError("x must be positive")
    t, c = parse_frac(t), parse_frac(c)
    if c <= 0:
        return x
    return int(np.count_nonzero(_anatomy_hits(x, t, c)))


def anatomy_counts_upto(x: int, t, c) -> np.ndarray:
    """``anatomy_count(y, t, c)`` for every ``1 <= y <= x`` (entry ``y - 1``)."""
    if x < 1:
        raise DomainError("x must be positive")
    t, c = parse_frac(t), parse_frac(c)
    if c <= 0:
        return np.arange(1, x + 1, dtype=np.int64)
    return np.cumsum(_anatomy_hits(x, t, c), dtype=np.int64)


def divisor_anatomy_sum(M: int, t, c) -> int:
    """``sum phi(n)`` over factorizations ``m n = M`` with ``sum_{p | m, p >= t} 1/p >= c``."""
    if M < 1:
        raise DomainError("M must be positive")
    t, c = parse_frac(t), parse_frac(c)
    if c <= 0:
        return M
    return sum(totient(M // m) for m in divisors(M) if prime_harmonic_of(m, t) >= c)


# -- main theorem diagnostics ---------------------------------------------------------------


@dataclass(frozen=True)
class MainTheoremReport:
    edge_measure: Fraction
    mu_V: Fraction
    mu_W: Fraction
    prime_count: int
    P_eps: int
    p0: int
    epsilon: Fraction
    bound: CertifiedReal
    ratio: CertifiedReal  # edge_measure / bound


def main_theorem_report(V: WeightedSupport, W: WeightedSupport, t, C, epsilon, p0: int = 100, prec: int = 256) -> MainTheoremReport:
    """Both sides of ``mu(E) <= 1000**P (mu(V) mu(W) e**(-C t))**(1/2 + eps)``; diagnostic only."""
    t, C, epsilon = parse_frac(t), parse_frac(C), parse_frac(epsilon)
    if not 0 < epsilon <= Fraction(2, 5):
        raise DomainError("epsilon must lie in (0, 2/5]")
    g = build_edges(V, W, t, C)
    lhs = g.edge_measure()
    muV, muW = mu(V), mu(W)
    P = g.prime_set()
    P_eps = p0 + sum(1 for p in P if p <= p0)
    prod = muV * muW
    if prod == 0:
        bound = CertifiedReal.exact(0)
    else:
        ct = C * t
        ex = Fraction(1, 2) + epsilon
        with iv_precision(prec) as iv:
            def q(x):
                return iv.mpf(x.numerator) / x.denominator
            val = iv.exp(P_eps * iv.log(1000) + q(ex) * (iv.log(q(prod)) - q(ct)))
            bound = CertifiedReal.from_iv(val)
    # lhs > 0 forces an edge, hence mu(V) mu(W) > 0 and a positive bound
    ratio = CertifiedReal.exact(0) if lhs == 0 else CertifiedReal(lhs / bound.hi, lhs / bound.lo)
    return MainTheoremReport(lhs, muV, muW, len(P), P_eps, p0, epsilon, bound, ratio)


def anatomy_count_bruteforce(x: int, t, c) -> int:
    """Direct count from the factorization of every ``n <= x``."""
    t, c = parse_frac(t), parse_frac(c)
    return sum(1 for n in range(1, x + 1) if prime_harmonic_of(n, t) >= c)


def divisor_anatomy_sum_bruteforce(M: int, t, c) -> int:
    """Direct sum over all ``m <= M`` dividing ``M``."""
    t, c = parse_frac(t), parse_frac(c)
    return sum(totient(M // m) for m in range(1, M + 1) if M % m == 0 and prime_harmonic_of(m, t) >= c)
