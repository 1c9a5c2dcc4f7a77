"""Approximation functions psi: N -> Q>=0.

Two kinds exist.  *Explicit* functions carry a finite support map.  *Formula*
functions are named families evaluated on demand:

``khintchine``  ``c / (q * log(q)**s)`` for ``q >= 2`` and ``c`` at ``q = 1``;
``constant``    ``value`` at every q;
``restricted``  ``theta(q)`` on a sequence of allowed denominators, else 0.

Values of formula families involving ``log`` are computed with mpmath at
``prec`` bits and rounded to a rational, so they are deterministic but not
the exact transcendental value.  With ``s == 0`` everything is exact.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from fractions import Fraction
from types import MappingProxyType
from typing import Callable, Iterable, Mapping

import mpmath
import numpy as np

from .errors import DomainError
from .numtheory import is_prime, is_squarefree, primes_between, totients_upto
from .orbit import nearest_int_distance
from .reals import DEFAULT_PREC, CertifiedReal, RealSample, mpf_to_fraction, round_fraction
from .serial import frac_str, parse_frac

HALF = Fraction(1, 2)
LOG_PREC = 128

NAMED_SEQUENCES: dict[str, Callable[[int], bool]] = {
    "primes": is_prime,
    "powers_of_2": lambda q: q >= 1 and q & (q - 1) == 0,
    "squarefree": lambda q: q >= 1 and is_squarefree(q),
    "all": lambda q: q >= 1,
}


@dataclass(frozen=True, eq=False)
class ApproxFunction:
    kind: str
    support: Mapping[int, Fraction] | None = None
    family: Mapping | None = None
    clamp: Fraction | None = None
    ds_standing: bool = False
    prec: int = LOG_PREC
    _membership: Callable[[int], bool] | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.kind == "explicit":
            clean = {}
            for q, v in dict(self.support or {}).items():
                q, v = int(q), parse_frac(v)
                if q < 1:
                    raise DomainError(f"support keys must be positive integers, got {q}")
                if v < 0:
                    raise DomainError(f"psi({q}) = {v} is negative")
                if self.clamp is not None:
                    v = min(v, self.clamp)
                if v > 0:
                    clean[q] = v
            object.__setattr__(self, "support", MappingProxyType(dict(sorted(clean.items()))))
            if self.ds_standing and any(v > HALF for v in clean.values()):
                raise DomainError("values exceed 1/2 under the standing assumption psi <= 1/2")
        elif self.kind == "formula":
            if self.family is None:
                raise ValueError("formula functions need a family descriptor")
            object.__setattr__(self, "family", MappingProxyType(dict(self.family)))
        else:
            raise ValueError(f"unknown kind {self.kind!r}")

    # -- evaluation ---------------------------------------------------------------

    def __call__(self, q: int) -> Fraction:
        if q < 1:
            raise DomainError(f"psi is defined on positive integers, got {q}")
        if self.kind == "explicit":
            return self.support.get(q, Fraction(0))
        v = self._formula(q)
        if self.clamp is not None:
            v = min(v, self.clamp)
        if self.ds_standing and v > HALF:
            raise DomainError(f"psi({q}) = {v} exceeds 1/2 under the standing assumption")
        return v

    def _formula(self, q: int) -> Fraction:
        fam = self.family
        name = fam["name"]
        if name == "constant":
            return fam["value"]
        if name == "khintchine":
            c, s = fam["c"], fam["s"]
            if q == 1 or c == 0:
                return c
            if s == 0:
                return c / q
            with mpmath.workprec(self.prec):
                val = mpmath.mpf(c.numerator) / c.denominator
                val /= q * mpmath.power(mpmath.log(q), mpmath.mpf(s.numerator) / s.denominator)
                return mpf_to_fraction(val)
        if name == "restricted":
            return fam["theta"](q) if self._in_sequence(q) else Fraction(0)
        raise ValueError(f"unknown family {name!r}")

    def _in_sequence(self, q: int) -> bool:
        seq = self.family["sequence"]
        if self._membership is not None:
            return self._membership(q)
        if isinstance(seq, str):
            return NAMED_SEQUENCES[seq](q)
        return q in seq

    @property
    def is_finite(self) -> bool:
        return self.kind == "explicit"

    def support_upto(self, Q: int) -> list[int]:
        if self.kind == "explicit":
            return [q for q in self.support if q <= Q]
        return [q for q in range(1, Q + 1) if self(q) > 0]

    def values(self, X: int, Y: int) -> dict[int, Fraction]:
        """Nonzero values on ``[X, Y]``."""
        if self.kind == "explicit":
            return {q: v for q, v in self.support.items() if X <= q <= Y}
        out = {}
        for q in range(max(X, 1), Y + 1):
            v = self(q)
            if v:
                out[q] = v
        return out

    def float_values(self, qs: np.ndarray) -> np.ndarray:
        """Float approximations (relative error ~1e-15) for fast filtering."""
        qs = np.asarray(qs, dtype=np.int64)
        fam = self.family
        if self.kind == "formula" and fam["name"] in ("constant", "khintchine"):
            if fam["name"] == "constant":
                out = np.full(qs.shape, float(fam["value"]))
            else:
                c, s = float(fam["c"]), float(fam["s"])
                qf = qs.astype(np.float64)
                with np.errstate(divide="ignore", invalid="ignore"):
                    out = c / (qf * np.log(np.maximum(qf, 2.0)) ** s)
                out = np.where(qs == 1, c, out)
            if self.clamp is not None:
                out = np.minimum(out, float(self.clamp))
            return out
        return np.array([float(self(int(q))) for q in qs], dtype=np.float64)

    def restrict(self, X: int, Y: int) -> "ApproxFunction":
        return ApproxFunction("explicit", self.values(X, Y), ds_standing=self.ds_standing)

    def with_standing_assumption(self) -> "ApproxFunction":
        return replace(self, ds_standing=True)

    # -- serialization ------------------------------------------------------------

    def to_json(self) -> dict:
        obj: dict = {"kind": "explicit-support" if self.kind == "explicit" else "formula-family"}
        if self.kind == "explicit":
            obj["support"] = [[q, frac_str(v)] for q, v in self.support.items()]
        else:
            obj["family"] = _family_to_json(self.family, self._membership)
        obj["clamp"] = None if self.clamp is None else frac_str(self.clamp)
        obj["ds_standing"] = self.ds_standing
        return obj

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True)

    @classmethod
    def from_json(cls, obj: Mapping) -> "ApproxFunction":
        clamp = None if obj.get("clamp") is None else parse_frac(obj["clamp"])
        ds = bool(obj.get("ds_standing", False))
        kind = obj["kind"]
        if kind in ("explicit", "explicit-support"):
            support = {int(q): parse_frac(v) for q, v in obj["support"]}
            return cls("explicit", support, clamp=clamp, ds_standing=ds)
        if kind in ("formula", "formula-family"):
            return cls("formula", family=_family_from_json(obj["family"]), clamp=clamp, ds_standing=ds)
        raise ValueError(f"unknown kind {kind!r}")

    @classmethod
    def load(cls, path) -> "ApproxFunction":
        with open(path) as fh:
            return cls.from_json(json.load(fh))


def _family_to_json(fam: Mapping, membership) -> dict:
    name = fam["name"]
    if name == "restricted":
        if membership is not None:
            raise ValueError("restricted family with a custom predicate is not serializable")
        seq = fam["sequence"]
        return {
            "name": name,
            "sequence": seq if isinstance(seq, str) else sorted(seq),
            "theta": fam["theta"].to_json(),
        }
    return {k: (frac_str(v) if isinstance(v, Fraction) else v) for k, v in fam.items()}


def _family_from_json(obj: Mapping) -> dict:
    name = obj["name"]
    if name == "restricted":
        seq = obj["sequence"]
        return {
            "name": name,
            "sequence": seq if isinstance(seq, str) else frozenset(int(q) for q in seq),
            "theta": ApproxFunction.from_json(obj["theta"]),
        }
    if name == "khintchine":
        return {"name": name, "c": parse_frac(obj["c"]), "s": parse_frac(obj["s"])}
    if name == "constant":
        return {"name": name, "value": parse_frac(obj["value"])}
    raise ValueError(f"unknown family {name!r}")


# -- constructors -----------------------------------------------------------------


def explicit(support: Mapping[int, object], ds_standing: bool = False) -> ApproxFunction:
    return ApproxFunction("explicit", {q: parse_frac(v) for q, v in support.items()}, ds_standing=ds_standing)


def constant(value, ds_standing: bool = False) -> ApproxFunction:
    value = parse_frac(value)
    if value < 0:
        raise DomainError("constant psi must be nonnegative")
    return ApproxFunction("formula", family={"name": "constant", "value": value}, ds_standing=ds_standing)


def khintchine_family(c, s, prec: int = LOG_PREC) -> ApproxFunction:
    """Monotone family ``c / (q (log q)^s)`` with ``psi(1) = c``."""
    c, s = parse_frac(c), parse_frac(s)
    if c < 0:
        raise DomainError(f"c must be nonnegative, got {c}")
    return ApproxFunction("formula", family={"name": "khintchine", "c": c, "s": s}, prec=prec)


def restricted_denominators(seq, theta: ApproxFunction) -> ApproxFunction:
    """``psi(q) = theta(q)`` for ``q`` in ``seq`` and 0 otherwise.

    ``seq`` is a name from :data:`NAMED_SEQUENCES`, an iterable of integers, or
    a predicate (the last is not serializable).
    """
    membership = None
    if callable(seq):
        membership, seq = seq, "custom"
    elif isinstance(seq, str):
        if seq not in NAMED_SEQUENCES:
            raise DomainError(f"unknown named sequence {seq!r}")
    else:
        seq = frozenset(int(q) for q in seq)
    if theta.kind == "explicit" and not isinstance(seq, str):
        support = {q: v for q, v in theta.support.items() if q in seq}
        return ApproxFunction("explicit", support, ds_standing=theta.ds_standing)
    return ApproxFunction(
        "formula",
        family={"name": "restricted", "sequence": seq, "theta": theta},
        ds_standing=theta.ds_standing,
        _membership=membership,
    )


def multiplicative_psi(beta: RealSample, theta: ApproxFunction, Q: int, prec: int = LOG_PREC) -> ApproxFunction:
    """Explicit ``psi(q) = theta(q) / (q * ||q beta||)`` on ``[1, Q]``, rounded to ``prec`` bits."""
    support = {}
    for q in range(1, Q + 1):
        th = theta(q)
        if th == 0:
            continue
        dist = nearest_int_distance(q, beta, prec=max(prec, DEFAULT_PREC), require_positive=True)
        val = CertifiedReal(th / (q * dist.hi), th / (q * dist.lo))
        support[q] = round_fraction(val.mid, prec)
    return ApproxFunction("explicit", support)


def ds_chain_family(q0: int, m: int, scale, ds_standing: bool = True) -> ApproxFunction:
    """``psi(k q0) = scale * k / m`` for ``1 <= k <= m``.

    Every interval around ``a / (k q0)`` then has the same radius
    ``scale / (q0 m)``, and intervals of different ``k`` share their centres
    whenever the fractions coincide, so the union collapses.
    """
    scale = parse_frac(scale)
    if q0 < 1 or m < 1:
        raise DomainError("q0 and m must be positive")
    if scale <= 0:
        raise DomainError("scale must be positive")
    if ds_standing and scale > HALF:
        raise DomainError("scale exceeds 1/2 under the standing assumption")
    return ApproxFunction(
        "explicit", {k * q0: scale * Fraction(k, m) for k in range(1, m + 1)}, ds_standing=ds_standing
    )


def equal_weight_prime_family(psi: ApproxFunction, start: int | None = None, match: str = "psi") -> ApproxFunction:
    """Comparison family: ``n`` primes sharing one constant value.

    ``n`` is the support size of ``psi`` (which must be finite).  With
    ``match="psi"`` the family has the same total ``sum psi``; with
    ``match="phi"`` it has the same ``sum phi(q) psi(q) / q``.  The primes are
    the ``n`` smallest ones ``>= start``; by default ``start`` is one more than the
    largest support element, so no comparison denominator divides or shares a
    factor with a denominator of ``psi``.
    """
    if not psi.is_finite or not psi.support:
        raise DomainError("equal-weight comparison needs a nonempty finite support")
    if match not in ("psi", "phi"):
        raise DomainError(f"unknown weight match {match!r}")
    n = len(psi.support)
    if start is None:
        start = max(psi.support) + 1
    primes = []
    hi = max(2 * start, 64)
    while len(primes) < n:
        primes = primes_between(start, hi)
        hi *= 2
    primes = primes[:n]
    if match == "psi":
        value = sum(psi.support.values(), Fraction(0)) / n
    else:
        target = series_partial_sums(psi, max(psi.support))[1]
        value = target / sum((Fraction(p - 1, p) for p in primes), Fraction(0))
    if value > 1:
        raise DomainError(f"comparison value {value} exceeds 1")
    return ApproxFunction("explicit", {p: value for p in primes}, ds_standing=psi.ds_standing)


def series_partial_sums(psi: ApproxFunction, Q: int) -> tuple[Fraction, Fraction]:
    """``(sum_{q<=Q} psi(q), sum_{q<=Q} phi(q) psi(q) / q)``, exact."""
    vals = psi.values(1, Q)
    phi = totients_upto(max(vals, default=1))
    s1 = sum(vals.values(), Fraction(0))
    s2 = sum((Fraction(int(phi[q]), q) * v for q, v in vals.items()), Fraction(0))
    return s1, s2


def series_sweep(psi: ApproxFunction, Qs: Iterable[int]) -> list[tuple[int, Fraction, Fraction]]:
    """Partial sums at each ``Q`` in increasing order, accumulated in one pass."""
    Qs = sorted(set(Qs))
    if not Qs:
        return []
    vals = psi.values(1, Qs[-1])
    phi = totients_upto(max(vals, default=1))
    out, s1, s2 = [], Fraction(0), Fraction(0)
    items = iter(sorted(vals.items()))
    pending = next(items, None)
    for Q in Qs:
        while pending is not None and pending[0] <= Q:
            q, v = pending
            s1 += v
            s2 += Fraction(int(phi[q]), q) * v
            pending = next(items, None)
        out.append((Q, s1, s2))
    return out


def parse_psi_expression(text: str) -> ApproxFunction:
    """Parse a compact CLI form: ``"1/4"`` (constant) or ``"2:1/6,3:1/6"`` (explicit)."""
    text = text.strip()
    if ":" in text:
        support = {}
        for item in text.split(","):
            q, v = item.split(":")
            support[int(q)] = parse_frac(v)
        return explicit(support)
    return constant(parse_frac(text))

