"""Deck involutions: two independent solvers, family identities and realization."""
from __future__ import annotations

import pytest
from hypothesis import given, settings, strategies as st

from crsing.deck import (DeckError, ObstructedAtDegree, build_deck_family, family_from_generators,
                         realize_manifold, solve_deck_general, solve_deck_square_form, verify_family)
from crsing.manifold import ComponentType, build_product_quadric, classify, linear_deck_generators
from crsing.samples import commuting_sigma_example, destroyed_deck_example, perturbed_square_form
from crsing.scalars import FLOAT
from crsing.series import JetMap, compose_series, jet_compose

E = ComponentType.elliptic
H = ComponentType.hyperbolic
C = ComponentType.complex

QUADRICS = [
    [E("2/5")],
    [H("5/6")],
    [C("1/4")],
    [E("1/3"), H("5/6")],
    [E("2/5"), E("3/10")],
    [H("5/6"), C("1/4")],
]


@pytest.mark.parametrize("comps", QUADRICS, ids=lambda c: "-".join(x.kind.value[0] for x in c))
def test_quadric_family_complete(comps):
    spec = build_product_quadric(comps, N=4)
    fam = build_deck_family(spec, method="general")
    assert fam.conditionD
    assert fam.group_order == 2 ** spec.p
    rep = verify_family(fam, spec)
    assert rep.passes and rep.max_residual == 0
    assert rep.abelian


@settings(max_examples=6, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_general_and_square_routes_agree(seed):
    spec = perturbed_square_form([E("2/5"), H("5/6")], 4, degrees=(2, 3), density=0.2, seed=seed)
    gen = build_deck_family(spec, method="general")
    sq = build_deck_family(spec, method="square")
    assert gen.conditionD and sq.conditionD
    for a, b in zip(gen.generators, sq.generators):
        assert a == b


@pytest.mark.parametrize("signs", [(-1,), (1,)])
def test_square_route_single_slot(signs):
    spec = perturbed_square_form([E("1/4")], 5, seed=2)
    tau = solve_deck_square_form(spec, signs)
    if signs == (1,):
        assert tau.is_identity()
    else:
        assert jet_compose(tau, tau).is_identity()
        Ep = spec.E[0]
        assert (compose_series(Ep, tau.truncate(spec.N + 1)) - Ep).truncate(spec.N + 1).is_zero()


def test_square_route_requires_square_data():
    with pytest.raises(ValueError):
        build_deck_family(commuting_sigma_example(3), method="square")


@pytest.mark.parametrize("seed", [0, 1])
def test_destroyed_deck(seed):
    spec = destroyed_deck_example(p=2, N=5, eps=1 + seed)
    fam = build_deck_family(spec)
    assert not fam.conditionD
    assert fam.group_order == 1
    assert all(isinstance(v, ObstructedAtDegree) for v in fam.obstructions.values())
    with pytest.raises(ObstructedAtDegree):
        build_deck_family(spec, strict=True)
    with pytest.raises(DeckError):
        verify_family(fam, spec)


def test_commuting_sigma_example_is_abelian():
    spec = commuting_sigma_example(4)
    fam = build_deck_family(spec)
    rep = verify_family(fam, spec)
    assert rep.passes and rep.abelian


def test_float_backend_residual_small():
    spec = build_product_quadric([E("2/5"), H("5/6")], N=4, backend=FLOAT)
    rep = verify_family(build_deck_family(spec), spec)
    assert rep.max_residual < 1e-10


@pytest.mark.parametrize("comps", QUADRICS[:4], ids=lambda c: "-".join(x.kind.value[0] for x in c))
def test_realization_round_trip(comps):
    # realize a manifold from the family, then recover the same involutions from it
    spec = perturbed_square_form(comps, 4, seed=7)
    fam = build_deck_family(spec)
    spec2 = realize_manifold(fam.generators, fam.rho)
    fam2 = build_deck_family(spec2, method="general")
    assert fam2.conditionD
    assert verify_family(fam2, spec2).passes
    assert classify(spec2).kinds == classify(spec).kinds


def test_general_solver_reproduces_linear_seed():
    spec = build_product_quadric([E("2/5")], N=5)
    (_, T), = linear_deck_generators(spec)
    tau = solve_deck_general(spec, T)
    assert tau.linear_part == T


def test_family_from_generators_orders_by_reflection():
    spec = build_product_quadric([E("2/5"), E("1/3")], N=3)
    fam = build_deck_family(spec)
    swapped = family_from_generators(list(reversed(fam.generators)), fam.rho)
    assert all(a == b for a, b in zip(swapped.generators, fam.generators))
