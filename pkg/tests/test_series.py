"""Truncated series and jet-map calculus."""
from __future__ import annotations

from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from crsing.samples import random_tangent_jet
from crsing.scalars import EXACT, FLOAT, GaussQ
from crsing.series import (AntiholomorphicJetMap, JetMap, SeriesError, SingularLinearPart, TruncatedSeries,
                           compose_any, compose_series, jet_compose, jet_compose_many, jet_invert, monomials, pack,
                           permute_conj, reynolds_linearize, unpack)


def var(i, n, N, be=EXACT):
    return TruncatedSeries.var(i, n, N, be)


def random_series(rng, n, N, density=0.4):
    terms = {}
    for k in range(N + 1):
        for e in monomials(n, k):
            if rng.random() < density:
                terms[e] = GaussQ(rng.randint(-4, 4), rng.randint(-2, 2))
    return TruncatedSeries.from_exps(terms, n, N)


@given(st.lists(st.integers(0, 40), min_size=1, max_size=5))
def test_pack_round_trip(exps):
    assert unpack(pack(exps), len(exps)) == tuple(exps)


@given(st.lists(st.integers(0, 20), min_size=3, max_size=3), st.lists(st.integers(0, 20), min_size=3, max_size=3))
def test_pack_is_additive(a, b):
    assert pack(a) + pack(b) == pack([x + y for x, y in zip(a, b)])


def test_pack_rejects_large_exponent():
    with pytest.raises(SeriesError):
        pack([256])


def test_square_of_one_plus_x():
    x = var(0, 1, 4)
    assert (1 + x) ** 2 == TruncatedSeries.from_exps({(0,): 1, (1,): 2, (2,): 1}, 1, 4)


def test_compose_x_squared():
    x = var(0, 1, 4)
    out = jet_compose(JetMap([x * x]), JetMap([x + x * x]))
    assert out[0] == TruncatedSeries.from_exps({(2,): 1, (3,): 2, (4,): 1}, 1, 4)


def test_truncation_discards_high_degree():
    x = var(0, 1, 3)
    assert (x ** 2 * x ** 2).is_zero()
    assert (x ** 3).coeff((3,)) == GaussQ(1)


@pytest.mark.parametrize("N", [2, 4, 7])
def test_geometric_inverse(N):
    x = var(0, 1, N)
    inv = (1 - x).inverse()
    assert all(inv.coeff((k,)) == GaussQ(1) for k in range(N + 1))
    assert ((1 - x) * inv - 1).is_zero()


@given(st.integers(0, 10 ** 6))
@settings(max_examples=15)
def test_multiplication_associative(seed):
    import random
    rng = random.Random(seed)
    a, b, c = (random_series(rng, 2, 4) for _ in range(3))
    assert (a * b) * c == a * (b * c)
    assert a * (b + c) == a * b + a * c


@given(st.integers(0, 10 ** 6))
@settings(max_examples=10)
def test_composition_associative(seed):
    f, g, h = (random_tangent_jet(2, 4, density=0.4, seed=seed + k) for k in range(3))
    assert jet_compose(jet_compose(f, g), h) == jet_compose(f, jet_compose(g, h))


@given(st.integers(0, 10 ** 6))
@settings(max_examples=10)
def test_inverse_both_sides(seed):
    f = random_tangent_jet(3, 4, density=0.3, seed=seed)
    g = jet_invert(f)
    assert jet_compose(f, g).is_identity()
    assert jet_compose(g, f).is_identity()


def test_inverse_with_linear_part():
    x, y = var(0, 2, 3), var(1, 2, 3)
    f = JetMap([x + y + x * y, 2 * y + x * x])
    assert jet_compose(f, jet_invert(f)).is_identity()


def test_singular_linear_part():
    x, y = var(0, 2, 3), var(1, 2, 3)
    with pytest.raises(SingularLinearPart):
        jet_invert(JetMap([x + y, x + y + x * x]))


@pytest.mark.parametrize("M", [2, 3])
def test_low_order_terms_of_composition_depend_only_on_low_order_jets(M):
    f = random_tangent_jet(2, 5, density=0.4, seed=1)
    g = random_tangent_jet(2, 5, density=0.4, seed=2)
    lhs = jet_compose(f, g).truncate(M)
    rhs = jet_compose(f.truncate(M), g.truncate(M))
    assert lhs == rhs


def test_compose_many_matches_single():
    g = random_tangent_jet(2, 5, density=0.4, seed=5)
    fs = [random_tangent_jet(2, 5, density=0.4, seed=s) for s in (6, 7, 8)]
    assert jet_compose_many(fs, g) == [jet_compose(f, g) for f in fs]


def test_compose_series_matches_jet():
    f = random_tangent_jet(2, 4, density=0.4, seed=9)
    g = random_tangent_jet(2, 4, density=0.4, seed=10)
    assert compose_series(f[1], g) == jet_compose(f, g)[1]


@given(st.integers(0, 10 ** 6))
@settings(max_examples=10)
def test_permute_conj_matches_general_route(seed):
    # rho(x) = conj(x) with coordinates swapped; two independent ways of forming rho g rho
    rho = AntiholomorphicJetMap(JetMap([var(1, 2, 4), var(0, 2, 4)]))
    g = random_tangent_jet(2, 4, density=0.4, seed=seed)
    g = g + JetMap([var(0, 2, 4).scale(GaussQ(0, 1)) * var(1, 2, 4), var(1, 2, 4) ** 2])
    direct = rho.compose(rho.rcompose(g))
    assert permute_conj(g, [1, 0]) == direct
    assert rho.conjugate_map(g) == direct


def test_anti_compose_anti_is_holomorphic():
    rho = AntiholomorphicJetMap(JetMap([var(1, 2, 3), var(0, 2, 3)]))
    out = compose_any(rho, rho)
    assert isinstance(out, JetMap) and out.is_identity()


def test_anti_evaluate_conjugates():
    rho = AntiholomorphicJetMap(JetMap.identity(1, 2))
    assert rho.evaluate([1 + 2j]) == [1 - 2j]


def test_evaluate_polynomial():
    x, y = var(0, 2, 3), var(1, 2, 3)
    s = x * y + (x ** 3).scale(GaussQ(2))
    assert abs(s.evaluate([0.5, 2j]) - (1j + 0.25)) < 1e-14


def test_diff():
    x, y = var(0, 2, 4), var(1, 2, 4)
    s = x ** 3 * y
    assert s.diff(0) == (x ** 2 * y).scale(GaussQ(3))


def test_float_backend_matches_exact():
    f = random_tangent_jet(2, 4, density=0.4, seed=3)
    g = random_tangent_jet(2, 4, density=0.4, seed=4)
    exact = jet_compose(f, g).to_backend(FLOAT)
    flt = jet_compose(f.to_backend(FLOAT), g.to_backend(FLOAT))
    assert exact.residual(flt) < 1e-12


def test_json_round_trip():
    f = random_tangent_jet(3, 3, density=0.4, seed=11)
    assert JetMap.from_json(f.to_json(), 3, 3) == f


def test_reynolds_linearizes_involution():
    x, y = var(0, 2, 4), var(1, 2, 4)
    # conjugate the linear involution (x, y) -> (y, x) by a nonlinear change
    L = JetMap([y, x])
    phi = JetMap([x + x * y, y + x * x])
    tau = jet_compose(jet_invert(phi), jet_compose(L, phi))
    ident = JetMap.identity(2, 4)
    assert jet_compose(tau, tau) == ident
    psi = reynolds_linearize([ident, tau])
    assert jet_compose(psi, jet_compose(tau, jet_invert(psi))) == L


def test_binomial_power_square_root():
    x = var(0, 1, 5)
    r = (1 + x).binomial_power(Fraction(1, 2))
    assert r * r == 1 + x


@given(st.integers(1, 6))
def test_power_matches_repeated_product(k):
    x, y = var(0, 2, 6), var(1, 2, 6)
    s = 1 + x - y.scale(GaussQ(0, 1))
    prod = TruncatedSeries.const(1, 2, 6)
    for _ in range(k):
        prod = prod * s
    assert s ** k == prod


def test_numpy_evaluation_consistency():
    f = random_tangent_jet(2, 3, density=0.5, seed=12)
    g = random_tangent_jet(2, 3, density=0.5, seed=13)
    pt = np.array([1e-3 + 2e-3j, -1e-3j])
    lhs = np.array(jet_compose(f, g).evaluate(pt))
    rhs = np.array(f.evaluate(g.evaluate(pt)))
    assert np.max(np.abs(lhs - rhs)) < 1e-9
