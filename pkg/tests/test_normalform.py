"""Normal forms of commuting maps, deck normal forms, realization, hull and rigidity."""
from __future__ import annotations

from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from crsing.deck import build_deck_family
from crsing.manifold import ComponentType, Kind, build_product_quadric, classify
from crsing.normalform import (_rho_perm, _std_S, _std_T1, centralizer_projection, decompose_wrt_D,
                               decompose_wrt_family, default_hull_epsilon, hull_polydiscs, mw_normalform,
                               normalize_abelian, realize_normal_form, rigidity_pipeline)
from crsing.resonance import IndexAlgebra
from crsing.samples import commuting_sigma_example, perturbed_square_form, random_tangent_jet
from crsing.scalars import EXACT, GaussQ
from crsing.series import AntiholomorphicJetMap, JetMap, TruncatedSeries, jet_compose, jet_invert, monomials, unpack

D2 = [[4, Fraction(1, 4), 9, Fraction(1, 9)]]


def resonant(D, j, Q):
    # mu_i^Q == mu_ij for every map i
    out = True
    for row in D:
        v = Fraction(1)
        for x, q in zip(row, Q):
            v *= Fraction(x) ** q
        out = out and v == Fraction(row[j])
    return out


def reorder(D):
    return [[r[0], r[2], r[1], r[3]] for r in D]


@settings(max_examples=8, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_decompose_wrt_D(seed):
    D = reorder(D2)
    F = random_tangent_jet(4, 4, density=0.08, seed=seed)
    H, G = decompose_wrt_D(F, D)
    assert jet_compose(H, jet_invert(G)) == F
    for j in range(4):
        for e, _ in H[j].degree_range(2, 4).items():
            assert not resonant(D, j, e)
        for e, _ in G[j].degree_range(2, 4).items():
            assert resonant(D, j, e)


@settings(max_examples=5, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_normalize_abelian_conjugated_diagonal(seed):
    # Phi o diag o Phi^{-1} normalizes back to a family of resonant maps
    lin = JetMap.linear([[4, 0], [0, Fraction(1, 4)]], 4)
    Phi = random_tangent_jet(2, 4, density=0.4, seed=seed)
    F = jet_compose(Phi, jet_compose(lin, jet_invert(Phi)))
    nf = normalize_abelian([F])
    Psi, Fh = nf.conjugator, nf.family[0]
    assert jet_compose(F, Psi) == jet_compose(Psi, Fh)
    for j in range(2):
        for e, _ in Fh[j].degree_range(2, 4).items():
            assert resonant([[4, Fraction(1, 4)]], j, e)
    assert all(v == 0.0 for v in nf.residuals.values() if isinstance(v, float))


def test_normalize_abelian_linear_family_is_fixed():
    lin = [JetMap.linear([[4, 0], [0, Fraction(1, 4)]], 3)]
    nf = normalize_abelian(lin)
    assert nf.family[0] == lin[0] and nf.conjugator.is_identity()


@pytest.mark.parametrize("comps", [
    [ComponentType.elliptic("2/5")],
    [ComponentType.elliptic("2/5"), ComponentType.elliptic("3/10")],
    [ComponentType.elliptic("1/3"), ComponentType.hyperbolic("5/6")],
], ids=["e", "ee", "eh"])
def test_quadric_Lambda_is_constant(comps):
    spec = build_product_quadric(comps, N=4)
    rep = classify(spec)
    nf = mw_normalform(build_deck_family(spec), rep)
    for L, lam in zip(nf.Lambda1, rep.lam):
        assert L.degree_range(1, L.N).is_zero()
        assert L.coeff([0] * spec.p) == lam
    assert all(v == 0.0 for v in nf.residuals.values())


def test_commuting_sigma_has_nonconstant_Lambda():
    spec = commuting_sigma_example(4)
    nf = mw_normalform(build_deck_family(spec), classify(spec))
    assert nf.Lambda1[0].coeff((0, 0)) == GaussQ(2)
    assert nf.Lambda1[1].coeff((0, 0)) == GaussQ(3)
    assert not nf.Lambda1[1].degree_range(1, 4).is_zero()
    rf = realize_normal_form(nf)
    assert all(v == 0.0 for v in rf.flatness.values())


def test_rigidity_fails_at_sigma_for_nonlinear_normal_form():
    out = rigidity_pipeline(commuting_sigma_example(4))
    assert not out.ok and out.stage == "sigma"
    assert out.obstruction["nonlinear_normal_form"] > 0


def test_rigidity_quadric_is_trivially_rigid():
    spec = build_product_quadric([ComponentType.elliptic("2/5"), ComponentType.hyperbolic("5/6")], N=4)
    out = rigidity_pipeline(spec)
    assert out.ok and out.residual == 0.0


def test_hull_degenerate_at_origin_and_contains_center():
    spec = build_product_quadric([ComponentType.elliptic("2/5"), ComponentType.elliptic("1/3")], N=4)
    rf = realize_normal_form(mw_normalform(build_deck_family(spec), classify(spec)))
    eps = default_hull_epsilon(rf)
    hp0 = hull_polydiscs(rf, [0.0, 0.0], eps=eps)
    assert all(hp0.degenerate)
    hp = hull_polydiscs(rf, [eps / 2, eps / 2], eps=eps)
    assert not any(hp.degenerate)
    assert hp.contains([0, 0])
    major = hp.semi_axes[0][0]
    assert not hp.contains([2 * major, 0])
    assert hp.contained


def test_hull_semi_axes_grow_like_sqrt():
    spec = build_product_quadric([ComponentType.elliptic("2/5")], N=4)
    rf = realize_normal_form(mw_normalform(build_deck_family(spec), classify(spec)))
    a1 = hull_polydiscs(rf, [1e-4]).semi_axes[0][0]
    a4 = hull_polydiscs(rf, [4e-4]).semi_axes[0][0]
    assert a4 / a1 == pytest.approx(2.0, rel=1e-6)


# centralizer projection ----------------------------------------------------

ALG_E = IndexAlgebra([Kind.ELLIPTIC], [GaussQ(4)], [GaussQ(2)])
ALG_EH = IndexAlgebra([Kind.ELLIPTIC, Kind.HYPERBOLIC], [GaussQ(4), GaussQ(Fraction(-7, 25), Fraction(24, 25))],
                      [GaussQ(2), GaussQ(Fraction(3, 5), Fraction(4, 5))])


def random_homogeneous(n, d, seed):
    import random
    rng = random.Random(seed)
    comps = []
    for _ in range(n):
        terms = {e: GaussQ(rng.randint(-3, 3), rng.randint(-3, 3)) for e in monomials(n, d) if rng.random() < 0.6}
        comps.append(TruncatedSeries.from_exps(terms, n, d))
    return JetMap(comps, allow_constant=True)


def linear_commutes(M, X):
    L = JetMap.linear(M, X.N)
    return jet_compose(L, X) == jet_compose(X, L)


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 10 ** 6), st.sampled_from([2, 3]), st.sampled_from(["S_T1_rho", "T1_T2_rho"]),
       st.sampled_from([ALG_E, ALG_EH]))
def test_centralizer_projection(seed, d, mode, alg):
    n = alg.n
    X = random_homogeneous(n, d, seed)
    G = centralizer_projection(X, mode, alg)
    assert centralizer_projection(G, mode, alg) == G
    rho = AntiholomorphicJetMap(JetMap.linear([[1 if c == r else 0 for c in range(n)] for r in _rho_perm(alg)], d))
    assert rho.conjugate_map(G) == G
    for j in range(alg.p):
        assert linear_commutes(_std_T1(alg.lam, j, EXACT), G)
        if mode == "S_T1_rho":
            assert linear_commutes(_std_S(alg.mu, j, EXACT), G)


def test_decompose_wrt_family_example():
    xi, eta = TruncatedSeries.var(0, 2, 3), TruncatedSeries.var(1, 2, 3)
    F = JetMap([xi + (xi * xi * eta).scale(GaussQ(3, 5)), eta])
    H, G = decompose_wrt_family(F, "S_T1_rho", ALG_E)
    assert jet_compose(H, jet_invert(G)) == F
