import json
from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from dslab import approx as ap
from dslab.errors import DegenerateInputError, DomainError
from dslab.reals import RealSample


def test_khintchine_examples():
    f = ap.khintchine_family(Fraction(1, 2), 0)
    assert f(10) == Fraction(1, 20)
    assert f(1) == Fraction(1, 2)
    assert ap.series_partial_sums(f, 3) == (Fraction(11, 12), Fraction(53, 72))
    with pytest.raises(DomainError):
        ap.khintchine_family(-1, 0)


def test_khintchine_log_family_monotone_and_close():
    f = ap.khintchine_family(1, 1)
    vals = [f(q) for q in range(3, 300)]
    assert all(a >= b for a, b in zip(vals, vals[1:]))
    import math

    assert abs(float(f(100)) - 1 / (100 * math.log(100))) < 1e-15


def test_khintchine_s0_second_sum_identity():
    f = ap.khintchine_family(Fraction(1, 3), 0)
    from dslab.numtheory import totient

    for Q in (1, 7, 40):
        assert ap.series_partial_sums(f, Q)[1] == Fraction(1, 3) * sum(Fraction(totient(q), q * q) for q in range(1, Q + 1))


def test_restricted_examples():
    theta = ap.khintchine_family(Fraction(1, 2), 0)
    f = ap.restricted_denominators("powers_of_2", theta)
    assert f(8) == Fraction(1, 16) and f(12) == 0
    g = ap.restricted_denominators("primes", ap.constant(Fraction(1, 2)))
    assert ap.series_partial_sums(g, 10)[0] == 2
    h = ap.restricted_denominators([3, 5], theta)
    assert [h(q) for q in range(1, 7)] == [0, 0, Fraction(1, 6), 0, Fraction(1, 10), 0]


@given(st.lists(st.integers(1, 60), max_size=10), st.fractions(0, 1))
def test_restricted_below_theta(seq, c):
    theta = ap.constant(c)
    f = ap.restricted_denominators(seq, theta)
    assert all(f(q) <= theta(q) for q in range(1, 61))


def test_multiplicative_examples():
    one = ap.constant(1)
    f = ap.multiplicative_psi(RealSample.golden_ratio(), one, 3)
    assert abs(float(f(1)) - 2.618033988749895) < 1e-6
    g = ap.multiplicative_psi(RealSample.sqrt(2), one, 2)
    assert abs(float(g(2)) - 2.914213562373095) < 1e-4
    with pytest.raises(DegenerateInputError) as exc:
        ap.multiplicative_psi(RealSample.rational(Fraction(1, 3)), one, 3)
    assert exc.value.q == 3


def test_ds_chain_examples():
    assert dict(ap.ds_chain_family(1, 1, Fraction(1, 2)).support) == {1: Fraction(1, 2)}
    f = ap.ds_chain_family(2, 3, Fraction(1, 2))
    assert dict(f.support) == {2: Fraction(1, 6), 4: Fraction(1, 3), 6: Fraction(1, 2)}
    assert ap.series_partial_sums(f, 6) == (1, Fraction(5, 12))
    with pytest.raises(DomainError):
        ap.ds_chain_family(2, 3, Fraction(3, 4))


@given(st.integers(1, 20), st.integers(1, 60), st.fractions(Fraction(1, 100), Fraction(1, 2)))
def test_ds_chain_support_size(q0, m, scale):
    f = ap.ds_chain_family(q0, m, scale)
    assert len(f.support) == m
    assert max(f.support.values()) <= Fraction(1, 2)


def test_equal_weight_prime_family():
    c = ap.ds_chain_family(2, 5, Fraction(1, 2))
    e = ap.equal_weight_prime_family(c)
    assert list(e.support) == [11, 13, 17, 19, 23]
    assert sum(e.support.values()) == sum(c.support.values())
    assert list(ap.equal_weight_prime_family(c, start=2).support) == [2, 3, 5, 7, 11]


@given(st.dictionaries(st.integers(1, 500), st.fractions(0, 1), max_size=20), st.integers(1, 600))
def test_series_additive_and_monotone(d, Q):
    f = ap.explicit(d)
    half1 = ap.explicit({q: v for q, v in d.items() if q % 2})
    half2 = ap.explicit({q: v for q, v in d.items() if not q % 2})
    s, a, b = ap.series_partial_sums(f, Q), ap.series_partial_sums(half1, Q), ap.series_partial_sums(half2, Q)
    assert s == (a[0] + b[0], a[1] + b[1])
    t = ap.series_partial_sums(f, Q + 7)
    assert t[0] >= s[0] and t[1] >= s[1]
    sweep = ap.series_sweep(f, [Q, Q + 7])
    assert sweep == [(Q, *s), (Q + 7, *t)]


def test_standing_assumption():
    with pytest.raises(DomainError):
        ap.explicit({3: Fraction(2, 3)}, ds_standing=True)
    f = ap.constant(Fraction(3, 4), ds_standing=True)
    with pytest.raises(DomainError):
        f(5)


@pytest.mark.parametrize(
    "f",
    [
        ap.explicit({2: Fraction(1, 6), 9: Fraction(2, 7)}),
        ap.constant(Fraction(1, 4)),
        ap.khintchine_family(Fraction(1, 2), 1),
        ap.restricted_denominators("primes", ap.constant(Fraction(1, 3))),
        ap.restricted_denominators([4, 8], ap.khintchine_family(1, 0)),
    ],
)
def test_json_roundtrip(f):
    text = f.dumps()
    obj = json.loads(text)
    assert obj["kind"] in ("explicit-support", "formula-family")
    g = ap.ApproxFunction.from_json(obj)
    assert [g(q) for q in range(1, 40)] == [f(q) for q in range(1, 40)]
    assert g.dumps() == text


def test_parse_psi_expression():
    assert ap.parse_psi_expression("1/4")(17) == Fraction(1, 4)
    f = ap.parse_psi_expression("2:1/6,3:1/6")
    assert dict(f.support) == {2: Fraction(1, 6), 3: Fraction(1, 6)}


def test_values_and_float_values():
    f = ap.khintchine_family(Fraction(1, 2), 0)
    import numpy as np

    qs = np.arange(1, 50)
    assert np.allclose(f.float_values(qs), [float(f(int(q))) for q in qs], rtol=1e-15)
    assert f.values(3, 5) == {3: Fraction(1, 6), 4: Fraction(1, 8), 5: Fraction(1, 10)}
