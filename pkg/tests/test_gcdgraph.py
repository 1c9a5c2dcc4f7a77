import io
import json
import math
from fractions import Fraction

import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from dslab import gcdgraph as gg
from dslab.errors import DomainError, UnsupportedInputError
from dslab.numtheory import is_squarefree

from oracles import anatomy_brute, divisor_anatomy_brute, harmonic_brute, phi_count, trial_factor

S = gg.WeightedSupport.of
sixth = Fraction(1, 6)
small = S({2: sixth, 3: sixth})


def test_mu_examples():
    assert gg.mu(S({})) == 0
    assert gg.mu(S({1: Fraction(3, 7)})) == Fraction(3, 7)
    assert gg.mu(S({2: Fraction(1, 2), 3: Fraction(1, 2)})) == Fraction(7, 12)


@given(st.dictionaries(st.integers(1, 300), st.fractions(0, 5, max_denominator=30), max_size=12))
def test_mu_matches_totient_oracle(d):
    sup = S(d)
    assert gg.mu(sup) == sum((Fraction(phi_count(q), q) * v for q, v in d.items()), Fraction(0))
    assert sup.squarefree_flag == all(is_squarefree(q) for q in sup)


def test_build_edges_examples():
    g = gg.build_edges(small, small, 1, Fraction(1, 2))
    assert g.sorted_edges() == [(2, 3), (3, 2)]
    assert gg.build_edges(small, small, 1, 1).edges == frozenset()
    vac = gg.build_edges(small, small, 1, 0)
    expected = {(v, w) for v in small for w in small if gg.D_value(v, w, small, small) <= 1}
    assert vac.edges == expected
    with pytest.raises(DomainError):
        gg.build_edges(small, small, Fraction(1, 2), 0)


squarefree_keys = st.integers(1, 10**4).filter(is_squarefree)
supports = st.dictionaries(squarefree_keys, st.fractions(Fraction(1, 50), 3, max_denominator=50), min_size=1, max_size=10).map(S)


@settings(max_examples=60)
@given(supports, supports, st.fractions(1, 20, max_denominator=4), st.fractions(0, 2, max_denominator=10))
def test_edges_satisfy_definition_and_shrink_with_C(V, W, t, C):
    g = gg.build_edges(V, W, t, C)
    for v, w in g.edges:
        gcd = math.gcd(v, w)
        assert V(v) <= Fraction(gcd, w) and W(w) <= Fraction(gcd, v)
        n = v * w // (gcd * gcd)
        assert C <= 0 or harmonic_brute(n, t) >= C
    assert g.edges <= gg.build_edges(V, W, t, C - Fraction(1, 3)).edges
    assert gg.build_edges(V, W, t, C, threads=4).edges == g.edges
    h = gg.GcdGraph.from_json(json.loads(g.dumps()))
    assert h == g and h.dumps() == g.dumps()


def test_from_edges_validates():
    with pytest.raises(DomainError):
        gg.GcdGraph.from_edges(small, small, 1, 1, [(2, 3)])
    g = gg.GcdGraph.from_edges(small, small, 1, Fraction(1, 2), [(2, 3)])
    assert g.edge_measure() == Fraction(1, 12) * Fraction(1, 9)


def test_ej_and_prop54_examples():
    assert gg.build_edges_ej(small, 0, Fraction(1, 2)) == {(2, 3), (3, 2)}
    assert gg.prop54_sum(small, 0, Fraction(1, 2)) == Fraction(1, 54)
    big = S({n: Fraction(1, 2) for n in (30030, 510510, 9699690)})
    for j in range(4):
        assert gg.build_edges_ej(big, j) == frozenset()
        assert gg.prop54_sum(big, j) == 0
    assert gg.prop54_sum(S({}), 0, 0) == 0
    rep = gg.prop54_report(small, 0, Fraction(1, 2))
    assert rep.edge_count == 2 and rep.total == Fraction(1, 54)
    assert rep.exp_minus_j.lo == rep.exp_minus_j.hi == 1


@settings(max_examples=30)
@given(supports, st.integers(0, 3), st.fractions(0, 1, max_denominator=6))
def test_ej_edges_against_float_definition(psi, j, thr):
    edges = gg.build_edges_ej(psi, j, thr)
    for v in psi:
        for w in psi:
            D = gg.D_value(v, w, psi, psi)
            if abs(float(D) - math.e**j) < 1e-9:
                continue
            gcd = math.gcd(v, w)
            h = sum(Fraction(1, p) for p, _ in trial_factor(v * w // (gcd * gcd)) if p >= math.e**j)
            assert ((v, w) in edges) == (float(D) <= math.e**j and h >= thr)


def test_prime_set_example():
    assert gg.prime_set(S({6: 1}), S({10: 1})) == {2, 3, 5}
    assert gg.prime_set(S({}), S({10: 1})) == frozenset()


def test_partition_examples():
    half = Fraction(1, 2)
    V = S({2: half, 3: half})
    g = gg.GcdGraph(V, V, Fraction(1), Fraction(0), frozenset((v, w) for v in V for w in V))
    step = gg.partition_by_prime(g, 2)
    assert step.m(1, 1) == Fraction(9, 49)
    assert step.m(1, 0) == step.m(0, 1) == Fraction(12, 49)
    assert step.m(0, 0) == Fraction(16, 49)
    assert gg.partition_by_prime(g, 5).m(0, 0) == 1
    W = S({6: sixth, 10: sixth})
    h = gg.GcdGraph(W, W, Fraction(1), Fraction(0), frozenset((v, w) for v in W for w in W))
    assert gg.partition_by_prime(h, 2).m(1, 1) == 1
    with pytest.raises(DomainError):
        gg.partition_by_prime(gg.GcdGraph(V, V, Fraction(1), Fraction(0), frozenset()), 2)
    with pytest.raises(DomainError):
        gg.partition_by_prime(g, 4)


def test_compress_trivial_and_errors():
    g = gg.build_edges(small, small, 1, Fraction(1, 2))
    r = gg.compress(g, 7, 0, 0)
    assert r.all_equal and r.edges == g.edges and dict(r.psi.entries) == dict(small.entries)
    sq = S({4: sixth, 3: sixth})
    with pytest.raises(UnsupportedInputError):
        gg.compress(gg.GcdGraph(sq, sq, Fraction(1), Fraction(0), frozenset()), 2, 0, 0)


def test_compress_loses_primes_of_other_class():
    half = Fraction(1, 2)
    V = S({2: half, 3: half})
    g = gg.GcdGraph(V, V, Fraction(1), Fraction(0), frozenset((v, w) for v in V for w in V))
    r = gg.compress(g, 2, 1, 1)
    assert r.all_equal
    assert r.lost_primes == {3}


SMALL_PRIMES = [2, 3, 5, 7, 11, 13, 17, 19, 23]
dense_keys = st.sets(st.sampled_from(SMALL_PRIMES), max_size=4).map(math.prod)
dense_supports = st.dictionaries(
    dense_keys, st.fractions(Fraction(1, 10**5), Fraction(1, 200), max_denominator=10**5), min_size=1, max_size=12
).map(S)


def random_graph(draw):
    V = draw(dense_supports)
    W = draw(dense_supports)
    t = draw(st.fractions(1, 10, max_denominator=3))
    C = draw(st.fractions(-1, 1, max_denominator=8))
    return gg.build_edges(V, W, t, C)


@settings(max_examples=60)
@given(st.data())
def test_compression_identities_and_m_probability(data):
    g = random_graph(data.draw)
    assume(g.edges)
    primes = sorted(g.prime_set() | {2, 3})
    p = data.draw(st.sampled_from(primes))
    step = gg.partition_by_prime(g, p)
    cells = [step.m(i, j) for i in (0, 1) for j in (0, 1)]
    assert all(c >= 0 for c in cells) and sum(cells) == 1
    assert sum(step.alpha) == 1 and sum(step.beta) == 1
    for i in (0, 1):
        for j in (0, 1):
            r = gg.compress(g, p, i, j)
            assert r.all_equal, [c for c in r.checks if not c.equal]
            assert p not in r.graph(g.t).prime_set()


def test_audit_csv():
    g = gg.build_edges(small, small, 1, Fraction(1, 2))
    buf = io.StringIO()
    gg.write_audit_csv(buf, [gg.compress(g, 2, i, j) for i in (0, 1) for j in (0, 1)])
    lines = buf.getvalue().splitlines()
    assert lines[0] == "p,i,j,lhs_num/den,rhs_num/den,equal"
    assert len(lines) == 1 + 4 * len(gg.AUDIT_ORDER)
    assert all(line.endswith(",true") for line in lines[1:])


def test_structure_examples():
    assert gg.structure_factorize(6, 6, 6).as_tuple() == (1, 1, 1, 1)
    f = gg.structure_factorize(10, 3, 6)
    assert f.as_tuple() == (3, 5, 2, 1) and math.prod(f.as_tuple()) == 30
    bad = gg.structure_factorize(5, 10, 6)
    assert isinstance(bad, gg.StructureViolation)
    assert 5 in bad.primes
    assert bad.primes == oracle_violations(5, 10, 6)
    with pytest.raises(UnsupportedInputError):
        gg.structure_factorize(4, 2, 6)
    wit = gg.StructureWitness.of({2: 1, 3: 1, 5: 0})
    assert wit.N == 6 and wit.violations(5, 10) == bad.primes


def oracle_violations(v, w, N):
    def val(n, p):
        k = 0
        while n % p == 0:
            n //= p
            k += 1
        return k

    ps = {p for x in (v, w, N) for p, _ in trial_factor(x)}
    return tuple(sorted(p for p in ps if abs(val(v, p) - val(N, p)) + abs(val(w, p) - val(N, p)) >= 2))


@given(st.integers(1, 10**6).filter(is_squarefree), st.integers(1, 10**6).filter(is_squarefree), st.integers(1, 10**6).filter(is_squarefree))
def test_structure_against_oracle(v, w, N):
    res = gg.structure_factorize(v, w, N)
    bad = oracle_violations(v, w, N)
    if bad:
        assert isinstance(res, gg.StructureViolation) and res.primes == bad
        return
    a, b, c, d = res.as_tuple()
    g = math.gcd(v, w)
    assert v * a == N * b and w * c == N * d
    assert a * b * c * d == v * w // (g * g)
    parts = (a, b, c, d)
    assert all(math.gcd(x, y) == 1 for k, x in enumerate(parts) for y in parts[k + 1 :])


def test_anatomy_examples():
    assert gg.anatomy_count(10, 2, 0) == 10
    assert gg.anatomy_count(10, 2, Fraction(1, 2)) == 5
    assert gg.anatomy_count(10, 3, Fraction(1, 2)) == 0
    assert gg.divisor_anatomy_sum(36, 2, 0) == 36
    assert gg.divisor_anatomy_sum(6, 2, Fraction(1, 2)) == 3
    assert gg.divisor_anatomy_sum(1, 5, Fraction(1, 9)) == 0


@settings(max_examples=60)
@given(st.integers(1, 400), st.fractions(1, 12, max_denominator=3), st.fractions(-1, Fraction(3, 2), max_denominator=30))
def test_anatomy_against_brute_force(x, t, c):
    assert gg.anatomy_count(x, t, c) == anatomy_brute(x, t, c)
    assert gg.divisor_anatomy_sum(x, t, c) == divisor_anatomy_brute(x, t, c)


def test_anatomy_exact_ties():
    # 1/2 + 1/3 = 5/6 exactly at n = 6
    assert gg.anatomy_count(6, 2, Fraction(5, 6)) == 1
    assert gg.anatomy_count(30, 2, Fraction(31, 30)) == anatomy_brute(30, 2, Fraction(31, 30))


def test_main_theorem_examples():
    rep = gg.main_theorem_report(small, small, 1, Fraction(1, 2), Fraction(2, 5))
    assert rep.edge_measure == Fraction(1, 54)
    assert rep.bound.lo > rep.edge_measure
    empty = gg.main_theorem_report(small, small, 1, 100, Fraction(1, 10))
    assert empty.edge_measure == 0 and empty.ratio.hi == 0
    with pytest.raises(DomainError):
        gg.main_theorem_report(small, small, 1, 1, Fraction(1, 2))


def test_support_json_roundtrip():
    sup = S({6: Fraction(1, 7), 35: Fraction(2, 9)})
    assert gg.WeightedSupport.from_json(json.loads(json.dumps(sup.to_json()))) == sup


@settings(max_examples=30)
@given(st.integers(1, 500), st.fractions(1, 12, max_denominator=3), st.fractions(-1, Fraction(3, 2), max_denominator=30))
def test_anatomy_sweep_is_cumulative_count(x, t, c):
    sweep = gg.anatomy_counts_upto(x, t, c)
    assert len(sweep) == x
    assert int(sweep[-1]) == gg.anatomy_count(x, t, c)
    assert int(sweep[(x - 1) // 2]) == anatomy_brute((x - 1) // 2 + 1, t, c)
