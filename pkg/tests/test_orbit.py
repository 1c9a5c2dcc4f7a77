import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dslab import approx as ap
from dslab import orbit as ob
from dslab.errors import DomainError
from dslab.reals import RealSample, random_sample
from dslab.torus import build_Aq, union_all

from oracles import in_set_brute

R = RealSample


def test_cf_examples():
    cl = ob.continued_fraction(R.rational(Fraction(22, 7)), 5)
    assert cl.terms == (3, 7) and cl.convergents[-1] == (22, 7)
    g = ob.continued_fraction(R.golden_ratio().frac(), 50)
    assert g.partial_quotients == (1,) * 50
    s = ob.continued_fraction(R.quadratic(-1, 1, 2), 50)
    assert s.partial_quotients == (2,) * 50
    for cl in (g, s):
        assert cl.check_recurrence()
    assert g.check_error_bounds(R.golden_ratio().frac())
    with pytest.raises(DomainError):
        ob.continued_fraction(R.sqrt(2), 0)


def test_cf_pi_prefix():
    cl = ob.continued_fraction(R.expression("pi"), 6)
    assert cl.terms == (3, 7, 15, 1, 292, 1, 1)


@given(st.fractions(-50, 50, max_denominator=10**6))
def test_cf_of_rationals_is_exact(x):
    cl = ob.continued_fraction(R.rational(x), 40)
    assert Fraction(*cl.convergents[-1]) == x
    assert cl.check_recurrence()


@settings(max_examples=25)
@given(st.integers(2, 500).filter(lambda d: math.isqrt(d) ** 2 != d))
def test_convergents_are_best_approximations(d):
    alpha = R.sqrt(d)
    cl = ob.continued_fraction(alpha, 8)
    assert cl.check_error_bounds(alpha)
    # no denominator below q_k beats ||q_k alpha||
    for _, qk in cl.convergents[1:4]:
        best = ob.nearest_int_distance(qk, alpha)
        for q in range(1, qk):
            assert ob.nearest_int_distance(q, alpha).lo > best.hi


def test_nearest_int_examples():
    assert ob.nearest_int_distance(4, R.rational(Fraction(1, 2))).hi == 0
    g = ob.nearest_int_distance(1, R.golden_ratio())
    assert abs(float(g.mid) - 0.3819660112501051) < 1e-12
    s = ob.nearest_int_distance(2, R.sqrt(2))
    assert abs(float(s.mid) - 0.1715728752538099) < 1e-12
    assert s.radius < Fraction(1, 2**200)


def test_hitting_examples():
    half, quarter = R.rational(Fraction(1, 2)), ap.constant(Fraction(1, 4))
    assert ob.hitting_count(half, quarter, 4, True) == 1
    assert ob.hitting_count(half, quarter, 4, False) == 2
    assert list(ob.hitting_indicator(half, quarter, 4, False)) == [False, True, False, True]
    assert ob.hitting_count(R.golden_ratio(), ap.constant(0), 1000) == 0


@settings(max_examples=40)
@given(
    st.fractions(0, 1, max_denominator=200),
    st.fractions(Fraction(1, 100), Fraction(3, 4), max_denominator=100),
    st.fractions(0, Fraction(99, 100), max_denominator=100),
)
def test_hits_agree_with_interval_membership(x, c, gamma):
    alpha = R.rational(x)
    psi = ap.constant(c)
    for coprime in (True, False):
        ind = ob.hitting_indicator(alpha, psi, 120, coprime, gamma)
        expected = [in_set_brute(x, q, c, coprime, gamma) for q in range(1, 121)]
        assert list(ind) == expected
    assert ob.hitting_count(alpha, psi, 500, True, gamma) <= ob.hitting_count(alpha, psi, 500, False, gamma)


@settings(max_examples=20)
@given(st.integers(0, 10**6), st.fractions(Fraction(1, 100), Fraction(1, 2), max_denominator=100))
def test_hits_match_contains_for_random_alpha(index, c):
    alpha = random_sample(7, index)
    x = alpha.exact_value
    ind = ob.hitting_indicator(alpha, ap.constant(c), 300)
    assert list(ind) == [build_Aq(q, c).contains(x) for q in range(1, 301)]


def test_boundary_ties_use_exact_path():
    # ||1 * 1/3|| = 1/3 exactly
    assert ob.hitting_count(R.rational(Fraction(1, 3)), ap.explicit({1: Fraction(1, 3)}), 1, False) == 1
    assert ob.hitting_count(R.rational(Fraction(1, 3)), ap.explicit({1: Fraction(1, 3) - Fraction(1, 10**30)}), 1, False) == 0


def test_schmidt_examples():
    res = ob.schmidt_ratio(R.rational(Fraction(1, 2)), ap.constant(Fraction(1, 4)), 4)
    assert res.expected.lo == res.expected.hi == Fraction(4, 3)
    assert res.ratio.lo == res.ratio.hi == Fraction(3, 4)
    zero = ob.schmidt_ratio(R.golden_ratio(), ap.explicit({7: Fraction(1, 10**6)}), 10)
    assert zero.hits == 0 and zero.ratio.hi == 0


def test_expected_hits_float_path_encloses_exact():
    psi = ap.khintchine_family(Fraction(1, 2), 0)
    exact = ob.expected_hits(psi, 3000)
    approx = ob.expected_hits(psi, 3000, exact_limit=10)
    assert approx.lo <= exact.lo <= approx.hi
    assert approx.radius < Fraction(1, 10**10)


def test_monte_carlo_examples():
    assert ob.monte_carlo_union(ap.constant(0), 2, 9, 1000, 1).estimate == 0
    assert ob.monte_carlo_union(ap.explicit({1: Fraction(1, 2)}), 1, 1, 1000, 1).estimate == 1
    psi = ap.constant(Fraction(1, 2))
    exact = float(union_all([build_Aq(q, Fraction(1, 2)) for q in (2, 3)]).measure())
    mc = ob.monte_carlo_union(psi, 2, 3, 10**5, 2024)
    assert abs(mc.estimate - exact) <= 4 * mc.stderr


def test_monte_carlo_reproducible_and_thread_independent():
    psi = ap.khintchine_family(Fraction(1, 2), 0)
    a = ob.monte_carlo_union(psi, 2, 200, 150_000, 11)
    b = ob.monte_carlo_union(psi, 2, 200, 150_000, 11, threads=4)
    assert a == b
    c = ob.monte_carlo_union(psi, 2, 200, 150_000, 12)
    assert c.hits != a.hits
    exact = float(union_all([build_Aq(q, psi(q)) for q in range(2, 201)]).measure())
    assert abs(a.estimate - exact) <= 5 * a.stderr


def test_random_sample_reproducible():
    assert random_sample(3, 5) == random_sample(3, 5)
    assert random_sample(3, 5) != random_sample(3, 6)
    x = random_sample(3, 5).exact_value
    assert 0 <= x < 1


def test_float_and_exact_agree_on_quadratic_alpha():
    alpha = R.golden_ratio()
    psi = ap.khintchine_family(Fraction(1, 2), 0)
    ind = ob.hitting_indicator(alpha, psi, 2000)
    slow = []
    for q in range(1, 2001):
        d = ob.nearest_int_distance(q, alpha)
        # nearest residue coprime test, decided exactly
        m = q * alpha.enclose(400).mid
        a = round(m)
        slow.append(d.hi <= psi(q) and math.gcd(a % q, q) == 1 if d.hi <= psi(q) else False)
    assert list(ind) == slow
    assert np.count_nonzero(ind) > 0
