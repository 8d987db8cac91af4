"""Manifold construction, JSON parsing and classification."""
from __future__ import annotations

from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from crsing.manifold import (ComponentType, GammaOutOfRange, Kind, ManifoldError, build_product_quadric,
                             check_condition_B, classify, cr_det, spec_from_json, spectrum_from_invariants)
from crsing.samples import cubic_coupling_example
from crsing.scalars import EXACT, FLOAT, GaussQ


@pytest.mark.parametrize("comp, lam, mu", [
    (ComponentType.elliptic("2/5"), GaussQ(2), GaussQ(4)),
    (ComponentType.hyperbolic("5/6"), GaussQ(Fraction(3, 5), Fraction(4, 5)), GaussQ(Fraction(-7, 25), Fraction(24, 25))),
])
def test_classify_known_values(comp, lam, mu):
    rep = classify(build_product_quadric([comp], N=3))
    assert rep.lam == [lam] and rep.mu == [mu]
    assert rep.conditionJ and rep.conditionB


def test_classify_complex_pair():
    rep = classify(build_product_quadric([ComponentType.complex("1/4")], N=3))
    assert rep.kinds == [Kind.COMPLEX, Kind.COMPLEX]
    assert rep.mu == [GaussQ(3), GaussQ(Fraction(1, 3))]
    assert rep.partner == [1, 0]


gammas_e = st.fractions(min_value=Fraction(1, 50), max_value=Fraction(12, 25), max_denominator=50)
gammas_h = st.fractions(min_value=Fraction(13, 25), max_value=Fraction(5), max_denominator=50)


@settings(max_examples=15)
@given(gammas_e)
def test_elliptic_multiplier_relation(g):
    # lambda + 1/lambda = 1/gamma with |lambda| > 1 and mu = lambda^2
    rep = classify(build_product_quadric([ComponentType.elliptic(g)], N=2))
    lam, mu = rep.lam[0], rep.mu[0]
    assert lam + lam.inverse() == GaussQ(1 / g)
    assert abs(lam) > 1
    assert lam * lam == mu


@settings(max_examples=15)
@given(gammas_h)
def test_hyperbolic_multiplier_relation(g):
    rep = classify(build_product_quadric([ComponentType.hyperbolic(g)], N=2))
    lam = complex(rep.lam[0])
    assert abs(abs(lam) - 1) < 1e-12
    assert abs(lam + 1 / lam - 1 / float(g)) < 1e-12
    assert rep.kinds == [Kind.HYPERBOLIC]


@pytest.mark.parametrize("comps", [
    [ComponentType.elliptic("2/5"), ComponentType.hyperbolic("5/6")],
    [ComponentType.elliptic("1/3"), ComponentType.complex("1/4")],
])
def test_invariants_match_classification(comps):
    rep = classify(build_product_quadric(comps, N=3))
    inv = spectrum_from_invariants(comps)
    assert [complex(x) for x in rep.mu] == pytest.approx([complex(x) for x in inv.mu])


def test_float_backend_classification():
    rep = classify(build_product_quadric([ComponentType.elliptic("2/5")], N=3, backend=FLOAT))
    assert abs(complex(rep.lam[0]) - 2) < 1e-10


@pytest.mark.parametrize("comp", [
    ComponentType.elliptic("1/2"),
    ComponentType.elliptic("3/5"),
    ComponentType.hyperbolic("2/5"),
    ComponentType.complex("1/2"),
    ComponentType.complex(0),
])
def test_gamma_out_of_range(comp):
    with pytest.raises(GammaOutOfRange):
        comp.validate()


@pytest.mark.parametrize("data", [
    [],
    {"truncation": 3},
    {"p": 1},
    {"p": 1, "components": [{"type": "parabolic", "gamma": "1/3"}]},
    {"p": 2, "components": [{"type": "elliptic", "gamma": "1/3"}]},
    {"p": 1, "components": [{"type": "elliptic", "gamma": "1/3"}],
     "perturbation": [{"target": 2, "z_exp": [3], "zbar_exp": [0], "coeff": 1}]},
    {"p": 1, "components": [{"type": "elliptic", "gamma": "1/3"}],
     "perturbation": [{"target": 1, "z_exp": [1], "zbar_exp": [0], "coeff": 1}]},
    {"p": 1, "E": [{"target": 1, "z_exp": [1, 1], "zbar_exp": [0], "coeff": 1}]},
])
def test_json_errors(data):
    with pytest.raises(ManifoldError):
        spec_from_json(data)


def test_json_round_trip():
    spec = spec_from_json({"p": 2, "truncation": 4,
                           "components": [{"type": "elliptic", "gamma": "2/5"},
                                          {"type": "hyperbolic", "gamma": "5/6"}],
                           "perturbation": [{"target": 1, "z_exp": [0, 2], "zbar_exp": [1, 0],
                                             "coeff": {"re": "1/2", "im": "1"}}]})
    back = spec_from_json(spec.to_json())
    assert all(a == b for a, b in zip(spec.E, back.E))
    assert back.components == spec.components


def test_order_override():
    data = {"p": 1, "truncation": 6, "components": [{"type": "elliptic", "gamma": "2/5"}]}
    assert spec_from_json(data, N=3).N == 3


def test_condition_B_on_quadric():
    cert = check_condition_B(build_product_quadric([ComponentType.elliptic("1/3")] * 2, N=3), seed=1)
    assert cert.holds


def test_cubic_coupling_is_hyperbolic():
    rep = classify(cubic_coupling_example())
    assert rep.kinds == [Kind.HYPERBOLIC, Kind.HYPERBOLIC]


def test_cr_det_linear_part():
    # for z' = z zbar + g (z^2 + zbar^2) the determinant vanishes at the origin
    d = cr_det(build_product_quadric([ComponentType.elliptic("2/5")], N=3))
    assert d.coeff((0, 0)) == GaussQ(0)
    assert not d.is_zero()
