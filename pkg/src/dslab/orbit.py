"""Experiments along the orbit q*alpha mod 1.

Membership tests ``|q alpha - gamma - a| <= psi(q)`` are run in two stages:
a vectorized float64 pass with an explicit rounding margin decides almost all
q, and the few q whose float distance lies within the margin of the threshold
are re-decided exactly from certified rational enclosures of alpha.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from typing import TYPE_CHECKING

import numpy as np

from .errors import DegenerateInputError, DomainError, PrecisionError
from .numtheory import totients_upto
from .reals import DEFAULT_PREC, MAX_PREC, CertifiedReal, RealSample
from .serial import parse_frac

if TYPE_CHECKING:
    from .approx import ApproxFunction

HALF = Fraction(1, 2)
ULP = 2.0**-52
BLOCK = 1 << 16
EXACT_SUM_LIMIT = 5000


def nearest_int_distance(q: int, alpha: RealSample, prec: int = DEFAULT_PREC, require_positive: bool = False) -> CertifiedReal:
    """Certified enclosure of ``||q alpha||`` (distance to the nearest integer).

    ``||.||`` is 1-Lipschitz, so the enclosure radius is that of ``q alpha``.
    With ``require_positive`` the precision is raised until the enclosure
    excludes 0, and :class:`DegenerateInputError` is raised if it cannot.
    """
    if q < 1:
        raise DomainError("q must be positive")
    bits = prec
    while True:
        enc = alpha.enclose(bits + q.bit_length())
        m = q * enc.mid
        r = q * enc.radius
        d = abs(m - round(m))
        out = CertifiedReal(max(Fraction(0), d - r), min(HALF, d + r))
        if not require_positive or out.lo > 0:
            return out
        if out.is_exact or bits >= MAX_PREC:
            raise DegenerateInputError(f"||q beta|| = 0 at working precision for q={q}", q=q)
        bits *= 2


# -- continued fractions ---------------------------------------------------------------


def _cf_terms(x: Fraction, limit: int) -> list[int]:
    out = []
    while len(out) < limit:
        a = math.floor(x)
        out.append(a)
        x -= a
        if x == 0:
            break
        x = 1 / x
    return out


@dataclass(frozen=True)
class ConvergentList:
    """Continued fraction ``[a0; a1, ..., an]`` with convergents ``p_k / q_k``."""

    terms: tuple[int, ...]
    convergents: tuple[tuple[int, int], ...]

    @property
    def partial_quotients(self) -> tuple[int, ...]:
        return self.terms[1:]

    @classmethod
    def from_terms(cls, terms) -> "ConvergentList":
        convs = []
        p0, q0, p1, q1 = 1, 0, terms[0], 1
        convs.append((p1, q1))
        for a in terms[1:]:
            p0, q0, p1, q1 = p1, q1, a * p1 + p0, a * q1 + q0
            convs.append((p1, q1))
        return cls(tuple(terms), tuple(convs))

    def check_recurrence(self) -> bool:
        convs = self.convergents
        prev = [(1, 0), convs[0]]
        if convs[0] != (self.terms[0], 1):
            return False
        for k, a in enumerate(self.terms[1:], start=1):
            p = a * prev[-1][0] + prev[-2][0]
            q = a * prev[-1][1] + prev[-2][1]
            if (p, q) != convs[k] or math.gcd(p, q) != 1:
                return False
            prev.append((p, q))
        return True

    def check_error_bounds(self, alpha: RealSample, prec: int = DEFAULT_PREC) -> bool:
        """``|alpha - p_k/q_k| <= 1/(q_k q_{k+1})`` for every k with a successor."""
        enc = alpha.enclose(prec)
        convs = self.convergents
        for (p, q), (_, q_next) in zip(convs, convs[1:]):
            worst = max(abs(enc.lo - Fraction(p, q)), abs(enc.hi - Fraction(p, q)))
            if worst > Fraction(1, q * q_next):
                return False
        return True


def continued_fraction(alpha: RealSample, n: int, prec: int = DEFAULT_PREC) -> ConvergentList:
    """First ``n`` partial quotients after the integer part (fewer if alpha is rational).

    Quotients are certified: they are the common prefix of the expansions of
    both enclosure endpoints, excluding a final term of either.
    """
    if n < 1:
        raise DomainError("n must be positive")
    exact = alpha.exact_value
    if exact is not None:
        cl = ConvergentList.from_terms(_cf_terms(exact, n + 1))
    else:
        bits = prec
        while True:
            enc = alpha.enclose(bits)
            lo, hi = _cf_terms(enc.lo, n + 2), _cf_terms(enc.hi, n + 2)
            common = []
            for k in range(min(len(lo), len(hi)) - 1):
                if lo[k] != hi[k]:
                    break
                common.append(lo[k])
            if len(common) >= n + 1:
                cl = ConvergentList.from_terms(common[: n + 1])
                break
            if bits >= MAX_PREC:
                raise PrecisionError(f"only {len(common) - 1} partial quotients certified at {bits} bits; raise precision")
            bits *= 2
    if not cl.check_recurrence():
        raise ArithmeticError("convergent recurrence failed")
    return cl


# -- membership along the orbit ---------------------------------------------------------


def _exact_hit(q: int, psi_q: Fraction, enclose, coprime_only: bool, gamma: Fraction) -> bool:
    """Decide ``exists a (coprime to q): |q x - gamma - a| <= psi_q`` from enclosures of x."""
    bits = DEFAULT_PREC
    while True:
        enc = enclose(bits + q.bit_length())
        lo, hi = q * enc.lo - gamma, q * enc.hi - gamma
        undecided = False
        for a in range(math.floor(lo - psi_q), math.ceil(hi + psi_q) + 1):
            if coprime_only and math.gcd(a % q, q) != 1:
                continue
            farthest = max(abs(lo - a), abs(hi - a))
            closest = Fraction(0) if lo <= a <= hi else min(abs(lo - a), abs(hi - a))
            if farthest <= psi_q:
                return True
            if closest <= psi_q:
                undecided = True
        if not undecided:
            return False
        if enc.is_exact or bits >= MAX_PREC:
            raise PrecisionError(f"membership undecidable at q={q} (point on an interval endpoint)")
        bits *= 2


def _float_margin(qs: np.ndarray, x_err: float, scale: np.ndarray, psi_f: np.ndarray) -> np.ndarray:
    # bound on |computed - true| of (dist - psi): propagated input error plus a few ulps per op
    return qs * x_err + 8 * ULP * (scale + 1.0) + 16 * ULP * psi_f + 1e-300


def _hits_for_q_block(qs, psi_f, psi_exact, x_f, x_err, gamma, coprime_only, exact_point):
    """Boolean hits for one block of q against a single point."""
    t = qs.astype(np.float64) * x_f - float(gamma)
    a = np.rint(t)
    dist = np.abs(t - a)
    margin = _float_margin(qs.astype(np.float64), x_err, np.abs(t), psi_f)
    gap = dist - psi_f
    hit = gap < -margin
    if coprime_only:
        res = np.mod(a.astype(np.int64), qs)
        hit &= np.gcd(res, qs) == 1
    # past 1/2 a second residue can qualify; an exact tie at 1/2 already falls in the margin
    unsure = (np.abs(gap) <= margin) | (psi_f > 0.5)
    for k in np.nonzero(unsure)[0]:
        q = int(qs[k])
        hit[k] = _exact_hit(q, psi_exact(q), exact_point, coprime_only, gamma)
    return hit


def hitting_indicator(alpha: RealSample, psi: "ApproxFunction", Q: int, coprime_only: bool = True, gamma=0) -> np.ndarray:
    """Boolean array ``h`` with ``h[q-1]`` true iff alpha lies in ``S_q`` (A_q or E_q, gamma-shifted)."""
    gamma = parse_frac(gamma)
    frac = alpha.frac()
    enc = frac.enclose(DEFAULT_PREC)
    x_f = float(enc.mid)
    x_err = abs(float(enc.mid - Fraction(x_f))) + float(enc.radius) + ULP
    out = np.zeros(Q, dtype=bool)
    for start in range(1, Q + 1, BLOCK):
        qs = np.arange(start, min(Q, start + BLOCK - 1) + 1, dtype=np.int64)
        psi_f = psi.float_values(qs)
        live = psi_f > 0
        if not live.any():
            continue
        sub = qs[live]
        hit = _hits_for_q_block(sub, psi_f[live], psi, x_f, x_err, gamma, coprime_only, frac.enclose)
        out[sub[hit] - 1] = True
    return out


def hitting_count(alpha: RealSample, psi: "ApproxFunction", Q: int, coprime_only: bool = True, gamma=0) -> int:
    """``#{q <= Q : alpha in S_q}`` where ``S_q`` is ``A_q`` (coprime) or ``E_q``; needs ``psi <= 1/2``
    for the nearest-residue shortcut, larger values are handled by the exact fallback."""
    return int(hitting_indicator(alpha, psi, Q, coprime_only, gamma).sum())


def expected_hits(psi: "ApproxFunction", Q: int, coprime_only: bool = True, exact_limit: int = EXACT_SUM_LIMIT) -> CertifiedReal:
    """``sum_{q <= Q} measure(S_q)`` for ``psi <= 1/2``: exact for ``Q <= exact_limit``, else a
    certified float enclosure (fsum of terms each within a few ulps)."""
    if Q <= exact_limit:
        vals = psi.values(1, Q)
        if any(v > HALF for v in vals.values()):
            raise DomainError("expected_hits assumes psi <= 1/2")
        if coprime_only:
            phi = totients_upto(Q)
            total = sum((2 * v * Fraction(int(phi[q]), q) for q, v in vals.items()), Fraction(0))
        else:
            total = sum((2 * v for v in vals.values()), Fraction(0))
        return CertifiedReal.exact(total)
    parts = []
    phi_all = totients_upto(Q) if coprime_only else None
    for start in range(1, Q + 1, BLOCK):
        qs = np.arange(start, min(Q, start + BLOCK - 1) + 1, dtype=np.int64)
        psi_f = psi.float_values(qs)
        if np.any(psi_f > 0.5 + 1e-12):
            raise DomainError("expected_hits assumes psi <= 1/2")
        if coprime_only:
            phi = phi_all[qs].astype(np.float64)
            parts.append(2.0 * phi * psi_f / qs)
        else:
            parts.append(2.0 * psi_f)
    s = math.fsum(np.concatenate(parts))
    err = s * 2.0**-40 + 1e-300
    return CertifiedReal(Fraction(s - err), Fraction(s + err))


@dataclass(frozen=True)
class SchmidtResult:
    hits: int
    expected: CertifiedReal
    ratio: CertifiedReal


def schmidt_ratio(alpha: RealSample, psi: "ApproxFunction", Q: int, coprime_only: bool = True, gamma=0) -> SchmidtResult:
    """``hitting_count / sum measure(S_q)`` with the denominator reported alongside."""
    hits = hitting_count(alpha, psi, Q, coprime_only, gamma)
    exp = expected_hits(psi, Q, coprime_only)
    if exp.hi == 0:
        raise DomainError("sum of measures is zero")
    if exp.lo <= 0:
        raise DomainError("sum of measures not certified positive")
    return SchmidtResult(hits, exp, CertifiedReal(Fraction(hits) / exp.hi, Fraction(hits) / exp.lo))


# -- Monte Carlo -------------------------------------------------------------------------


@dataclass(frozen=True)
class MonteCarloResult:
    estimate: float
    stderr: float
    hits: int
    samples: int
    seed: int


def _block_uniforms(seed: int, block: int, count: int) -> np.ndarray:
    gen = np.random.Generator(np.random.Philox(key=seed, counter=[0, 0, block, 1]))
    return gen.integers(0, 2**64, size=count, dtype=np.uint64, endpoint=False)


def _mc_block(psi_items, seed: int, block: int, count: int, coprime_only: bool, gamma: Fraction) -> int:
    u = _block_uniforms(seed, block, count)
    x = u.astype(np.float64) * 2.0**-64
    x_err = 2.0**-53
    alive = np.ones(count, dtype=bool)
    for q, v, vf in psi_items:
        idx = np.nonzero(alive)[0]
        if not len(idx):
            break
        t = q * x[idx] - float(gamma)
        a = np.rint(t)
        dist = np.abs(t - a)
        margin = q * x_err + 8 * ULP * (np.abs(t) + 1.0) + 4 * ULP * vf
        gap = dist - vf
        hit = gap < -margin
        if coprime_only:
            hit &= np.gcd(np.mod(a.astype(np.int64), q), q) == 1
        unsure = np.nonzero((np.abs(gap) <= margin) | (vf > 0.5))[0]
        for k in unsure:
            xe = Fraction(int(u[idx[k]]), 1 << 64)
            hit[k] = _exact_hit(q, v, lambda bits, xe=xe: CertifiedReal.exact(xe), coprime_only, gamma)
        alive[idx[hit]] = False
    return int(count - alive.sum())


def monte_carlo_union(psi: "ApproxFunction", X: int, Y: int, samples: int, seed: int, coprime_only: bool = True, gamma=0, threads: int = 1) -> MonteCarloResult:
    """Fraction of uniform dyadic samples (64-bit, Philox keyed by ``seed``) lying in ``union_{X<=q<=Y} S_q``.

    Sample block ``b`` always comes from counter ``b``, so results do not depend
    on ``threads``.
    """
    if samples < 1:
        raise DomainError("samples must be positive")
    gamma = parse_frac(gamma)
    items = [(q, v, float(v)) for q, v in sorted(psi.values(X, Y).items())]
    blocks = [(b, min(BLOCK, samples - b * BLOCK)) for b in range((samples + BLOCK - 1) // BLOCK)]

    def run(bc):
        return _mc_block(items, seed, bc[0], bc[1], coprime_only, gamma)

    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            hits = sum(ex.map(run, blocks))
    else:
        hits = sum(map(run, blocks))
    p = hits / samples
    return MonteCarloResult(p, math.sqrt(p * (1 - p) / samples), hits, samples, seed)
