"""Resonance sets, sign characters, Poincare witnesses and small divisors."""
from __future__ import annotations

import cmath
import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from crsing.manifold import ComponentType, Kind, build_product_quadric, classify
from crsing.resonance import (BudgetExceeded, IndexAlgebra, IndexPair, NotPoincareType, UndecidableResonance,
                              in_Nj, in_Rj, index_maps, nu_values, omega_ideal, omega_nu, poincare_constants,
                              poincare_scan, poincare_witness)
from crsing.scalars import GaussQ

E, H, C = Kind.ELLIPTIC, Kind.HYPERBOLIC, Kind.COMPLEX
ROTATIONS = [Fraction(1, 2), Fraction(1, 3), Fraction(1, 4), Fraction(2, 5), Fraction(1, 6)]


def rotation_algebra(rots):
    lam = [cmath.exp(1j * math.pi * float(r)) for r in rots]
    return IndexAlgebra([H] * len(rots), [x * x for x in lam], lam, rots)


idx = st.lists(st.integers(0, 5), min_size=2, max_size=2)


@given(idx, idx, st.integers(0, 1))
def test_elliptic_resonances_are_trivial(P, Q, j):
    alg = IndexAlgebra([E, E], [GaussQ(4), GaussQ(9)], [GaussQ(2), GaussQ(3)])
    expected = sum(P) + sum(Q) >= 2 and all(P[i] - Q[i] == (1 if i == j else 0) for i in range(2))
    assert alg.in_R(j, P, Q) == expected
    assert alg.in_N(j, P, Q) == expected


@settings(max_examples=60)
@given(st.sampled_from(ROTATIONS), st.sampled_from(ROTATIONS), idx, idx, st.integers(0, 1))
def test_rotation_resonance_matches_float_oracle(r1, r2, P, Q, j):
    alg = rotation_algebra([r1, r2])
    mu = [cmath.exp(2j * math.pi * float(r)) for r in (r1, r2)]
    expected = sum(P) + sum(Q) >= 2 and all(
        abs(mu[i] ** (P[i] - Q[i] - (1 if i == j else 0)) - 1) < 1e-9 for i in range(2))
    assert in_Rj(alg, j, P, Q) == expected
    if expected:
        nu, nup = nu_values(alg, IndexPair(j, P, Q))
        lam = [cmath.exp(1j * math.pi * float(r)) for r in (r1, r2)]
        val = 1
        for i in range(2):
            k = P[i] - Q[i] - 1 if i == j else Q[i] - P[i]
            val *= lam[i] ** k
        assert nu in (1, -1) and abs(val - nu) < 1e-9
        assert nup in (1, -1)
        assert in_Nj(alg, j, P, Q) == all(P[i] >= Q[i] for i in range(2) if i != j)


def test_nu_requires_resonance():
    alg = rotation_algebra([Fraction(1, 3)])
    with pytest.raises(ValueError):
        alg.nu(0, (2,), (0,))


def test_irrational_rotation_has_no_resonance():
    lam = cmath.exp(1j * math.sqrt(2))
    alg = IndexAlgebra([H], [lam * lam], [lam], ["irrational"])
    assert not any(alg.in_R(0, (a,), (b,)) for a in range(8) for b in range(8) if a - b != 1)


def test_undecidable_float_resonance():
    lam = cmath.exp(1j * math.pi / 3 + 1e-8j)
    alg = IndexAlgebra([H], [lam * lam], [lam], eps_res=1e-10)
    with pytest.raises(UndecidableResonance):
        alg.in_R(0, (4,), (0,))


def test_complex_slot_partner():
    rep = classify(build_product_quadric([ComponentType.complex("1/4")], N=2))
    alg = IndexAlgebra.from_report(rep)
    assert alg.s == [0] and alg.sp == [1] and alg.partner == [1, 0]
    # |mu_s| != 1: only the trivial exponent pattern P - Q = e_j is resonant
    assert alg.in_R(0, (2, 1), (1, 1))
    assert not alg.in_R(0, (2, 1), (0, 0))


@given(st.lists(st.integers(0, 4), min_size=4, max_size=4), st.lists(st.integers(0, 4), min_size=4, max_size=4))
def test_index_maps_are_involutions(P, Q):
    alg = IndexAlgebra([E, H, C, C], [GaussQ(4), GaussQ(0, 1), GaussQ(3), GaussQ(Fraction(1, 3))],
                       [GaussQ(2), GaussQ(1, 1), GaussQ(1), GaussQ(1)])
    assert alg.rho(*alg.rho(P, Q)) == (tuple(P), tuple(Q))
    assert alg.rho_e(*alg.rho_e(P, Q)) == (tuple(P), tuple(Q))
    m = index_maps(alg, 1, P, Q)
    A, B = m["AB"]
    assert sum(A) + sum(B) == sum(P) + sum(Q)


def test_slot_order_enforced():
    with pytest.raises(ValueError):
        IndexAlgebra([H, E], [1, 4], [1, 2])


# Poincare type -------------------------------------------------------------


def test_poincare_constants():
    d, c = poincare_constants([4, 9])
    assert d == pytest.approx(4 ** 0.25)
    assert c == pytest.approx(2 * d ** 4)


@pytest.mark.parametrize("mu", [[4, 9], [3], [GaussQ(2), GaussQ(0, 3)]])
def test_poincare_scan(mu):
    out = poincare_scan(mu, 12)
    assert out["checked"] > 0 and out["min_log_margin"] > 0


@settings(max_examples=30)
@given(st.lists(st.integers(0, 6), min_size=4, max_size=4), st.integers(0, 3))
def test_witness_bound(Q, j):
    try:
        w = poincare_witness([4, 9], j, Q)
    except ValueError:
        return
    assert w.value > w.bound


def test_unit_modulus_is_not_poincare():
    with pytest.raises(NotPoincareType):
        poincare_scan([cmath.exp(1j)], 4)
    with pytest.raises(NotPoincareType):
        poincare_witness([cmath.exp(1j), 4], 0, (2, 0, 0, 0))


# small divisors ------------------------------------------------------------


def brute_omega_nu(nu, k_max):
    p = len(nu)
    targets = list(nu) + [1 / x for x in nu]
    out, best = [], math.inf
    for k in range(1, k_max + 1):
        for P in itertools.product(range(2 ** k + 1), repeat=p):
            if 2 <= sum(P) <= 2 ** k:
                v = np.prod([x ** e for x, e in zip(nu, P)])
                best = min(best, min(abs(v - t) for t in targets))
        out.append(best)
    return out


@settings(max_examples=10, deadline=None)
@given(st.lists(st.complex_numbers(min_magnitude=0.5, max_magnitude=1.5), min_size=1, max_size=2))
def test_omega_nu_matches_brute_force(nu):
    r = omega_nu(nu, 3)
    assert r.omega == pytest.approx(brute_omega_nu(nu, 3), rel=1e-9, abs=1e-12)
    assert r.omega == sorted(r.omega, reverse=True)


def test_omega_nu_root_of_unity_is_resonant():
    r = omega_nu([cmath.exp(2j * math.pi / 3)], 3)
    assert r.resonant and r.omega[-1] == 0


def test_omega_nu_exact():
    r = omega_nu([GaussQ(2)], 4)
    assert r.exact and r.omega == [2.0] * 4 and not r.resonant
    assert r.brjuno_partial[-1] == pytest.approx(-sum(math.log(2) / 2 ** k for k in range(1, 5)))


def test_omega_ideal_diagonal():
    # one map, mu = 2 on x, 1/2 on y; Q off the ideal (x y)
    r = omega_ideal([[2, 0.5]], 3)
    assert r.omega[0] == pytest.approx(0.25)


def test_budget():
    with pytest.raises(BudgetExceeded):
        omega_nu([2, 3, 5], 30)
    with pytest.raises(ValueError):
        omega_nu([2], 0)
