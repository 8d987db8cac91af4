"""Builders for the manifolds used in tests, the acceptance suite and the README."""
from __future__ import annotations

import random
from fractions import Fraction
from typing import Sequence

from .manifold import ComponentType, ManifoldSpec, build_product_quadric, square_form_spec
from .scalars import EXACT, Backend, GaussQ
from .series import AntiholomorphicJetMap, JetMap, TruncatedSeries, compose_any, monomials, pack

__all__ = [
    "commuting_sigma_example",
    "destroyed_deck_example",
    "cubic_coupling_example",
    "perturbed_square_form",
    "rho_commuting_jet",
    "random_tangent_jet",
]


def commuting_sigma_example(N: int, g1=Fraction(2, 5), g2=Fraction(3, 10),
                            backend: Backend = EXACT) -> ManifoldSpec:
    """``z3 = |z1|^2 + g1 (z1^2 + conj(z1)^2)``, ``z4 = (z2 + 2 g2 conj(z2) + z2 z3)^2``.

    Elliptic in both slots with commuting ``sigma_j``; the multiplier of
    the second slot depends on ``z1 conj(z1)``.
    """
    n, M = 4, N + 1
    z1, z2, w1, w2 = (TruncatedSeries.var(i, n, M, backend) for i in range(4))
    E1 = z1 * w1 + (z1 * z1 + w1 * w1).scale(backend.coerce(g1))
    b = z2 + w2.scale(backend.coerce(2 * Fraction(g2))) + z2 * E1
    return ManifoldSpec(2, N, (E1, b * b), backend=backend, name="commuting-sigma")


def destroyed_deck_example(p: int = 2, N: int = 6, gamma=Fraction(1, 4), eps=1,
                           backend: Backend = EXACT) -> ManifoldSpec:
    """``z_{p+j} = z_j conj(z_j) + gamma conj(z_j)^2 + eps conj(z_{j-1})^3`` (indices cyclic).

    The cubic coupling destroys every nontrivial deck transformation.
    """
    n = 2 * p
    E = []
    for j in range(p):
        d = {}
        e = [0] * n
        e[j] = e[p + j] = 1
        d[tuple(e)] = 1
        e = [0] * n
        e[p + j] = 2
        d[tuple(e)] = gamma
        e = [0] * n
        e[p + (j - 1) % p] = 3
        d[tuple(e)] = eps
        E.append(TruncatedSeries.from_exps(d, n, N + 1, backend))
    return ManifoldSpec(p, N, tuple(E), backend=backend, name="destroyed-deck")


def cubic_coupling_example(N: int = 4, g1=Fraction(5, 6), g2=Fraction(13, 10),
                           backend: Backend = EXACT) -> ManifoldSpec:
    """``z3 = L1^2 + L2^3``, ``z4 = L2^2`` with ``L_j = z_j + 2 g_j conj(z_j)``.

    Hyperbolic in both slots; has no attached complex submanifold because
    ``L2^3`` is not divisible by ``z1``.
    """
    n, M = 4, N + 1

    def lin(j, g):
        return TruncatedSeries(n, M, {pack([1 if i == j else 0 for i in range(n)]): backend.one(),
                                      pack([1 if i == 2 + j else 0 for i in range(n)]): backend.coerce(2 * g)},
                               backend)

    l1, l2 = lin(0, g1), lin(1, g2)
    return ManifoldSpec(2, N, (l1 * l1 + l2 * l2 * l2, l2 * l2), backend=backend, name="cubic-coupling")


def perturbed_square_form(components: Sequence[ComponentType], N: int, *, degrees=(3,),
                          density: float = 0.15, seed: int = 0, gaussian: bool = True,
                          backend: Backend = EXACT) -> ManifoldSpec:
    """Product quadric with random terms of the given degrees added to each ``R_j``.

    Coefficients are small Gaussian integers (or integers when
    ``gaussian`` is false); ``seed`` makes the draw reproducible.
    """
    q = build_product_quadric(components, N=N, backend=backend)
    B, R = q.square_form
    rng = random.Random(seed)
    n = 2 * q.p
    R2 = []
    for r in R:
        terms = {}
        for d in degrees:
            for e in monomials(n, d):
                if rng.random() < density:
                    c = GaussQ(rng.randint(-3, 3), rng.randint(-3, 3) if gaussian else 0)
                    if c:
                        terms[pack(e)] = backend.coerce(c)
        R2.append(r + TruncatedSeries(n, N + 1, terms, backend))
    return square_form_spec(B, R2, N, components, backend, name="perturbed-square-form")


def random_tangent_jet(n: int, N: int, *, density: float = 0.15, seed: int = 0,
                       backend: Backend = EXACT) -> JetMap:
    """Identity plus sparse random rational terms of degrees ``2..N``."""
    rng = random.Random(seed)
    comps = []
    for _ in range(n):
        terms = {pack(e): backend.coerce(Fraction(rng.randint(-3, 3), rng.randint(1, 4)))
                 for d in range(2, N + 1) for e in monomials(n, d) if rng.random() < density}
        comps.append(TruncatedSeries(n, N, {k: v for k, v in terms.items() if v}, backend))
    return JetMap.identity(n, N, backend) + JetMap(comps)


def rho_commuting_jet(rho: AntiholomorphicJetMap, N: int, *, density: float = 0.15, seed: int = 0) -> JetMap:
    """Random jet tangent to the identity that commutes with ``rho``: ``(X + rho X rho) / 2``."""
    be = rho.backend
    n = rho.n
    X = random_tangent_jet(n, N, density=density, seed=seed, backend=be)
    Y = compose_any(rho, X, rho)
    ident = JetMap.identity(n, N, be)
    half = be.one() / be.coerce(2)
    return ident + ((X - ident) + (Y - ident)).scale(half)
