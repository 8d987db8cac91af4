"""Manifold specifications, quadric models and their holomorphic invariants.

A manifold is given by ``z_{p+j} = E_j(z', zbar')`` for ``j = 1..p``.  We
always work with the complexification, replacing ``zbar'`` by an
independent variable ``w'``; series therefore live in ``2p`` variables
ordered ``(z_1..z_p, w_1..w_p)``.

Slot layout
-----------
Components are laid out in the order elliptic, hyperbolic (including
``gamma = inf``), complex ``s``, complex partner ``s'``.  A complex
component with invariant ``gamma_s`` occupies slot ``s`` and its partner
slot ``s' = s + s_*``; the pair contributes the two coupled equations
``(z_s + 2 gamma_s w_{s'})^2`` and ``(z_{s'} + 2 (1 - conj(gamma_s)) w_s)^2``.
"""
from __future__ import annotations

import cmath
import json
import math
import random
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Any, Optional, Sequence

import numpy as np

from .linalg import (SingularMatrix, conj_matrix, det, eye, mat_inv, mat_mul, mat_sub,
                     to_numpy)
from .scalars import EXACT, FLOAT, Backend, BackendMismatch, GaussQ, QSurd, get_backend
from .series import JetMap, TruncatedSeries, degree, pack, unit, unpack

__all__ = [
    "Kind",
    "ComponentType",
    "Slot",
    "ManifoldSpec",
    "QuadraticData",
    "SpectrumReport",
    "ConditionBCertificate",
    "ManifoldError",
    "GammaOutOfRange",
    "UnrecognizedQuadric",
    "build_product_quadric",
    "square_form_spec",
    "quadratic_data",
    "linear_deck_generators",
    "rho_matrix",
    "classify",
    "check_condition_B",
    "quad_transform",
    "cr_det",
    "spectrum_from_invariants",
]


class ManifoldError(ValueError):
    """Invalid manifold data."""


class GammaOutOfRange(ManifoldError):
    """A Bishop-type invariant lies outside its admissible range."""


class UnrecognizedQuadric(ManifoldError):
    """Quadratic part is not in product form after rank-one factorisation."""


class Kind(str, Enum):
    ELLIPTIC = "elliptic"
    HYPERBOLIC = "hyperbolic"
    INFINITE = "infinite"  # hyperbolic with gamma = inf, E = z^2 + w^2
    COMPLEX = "complex"


_KIND_ORDER = {Kind.ELLIPTIC: 0, Kind.HYPERBOLIC: 1, Kind.INFINITE: 1, Kind.COMPLEX: 2}


@dataclass(frozen=True)
class ComponentType:
    """One block of a product quadric.

    Parameters
    ----------
    kind : Kind
    gamma : scalar or None
        Bishop-type invariant; ``None`` for ``Kind.INFINITE``.
    rotation : Fraction, str or None
        Hyperbolic only.  ``theta/pi`` for ``lambda_h = exp(i theta)`` when it
        is rational, or the string ``"irrational"``; used to decide
        resonances exactly when ``lambda_h`` itself is not exact.
    """

    kind: Kind
    gamma: Any = None
    rotation: Any = None

    @classmethod
    def elliptic(cls, gamma) -> "ComponentType":
        return cls(Kind.ELLIPTIC, EXACT.coerce(gamma))

    @classmethod
    def hyperbolic(cls, gamma, rotation=None) -> "ComponentType":
        if gamma is None or gamma == "inf" or (isinstance(gamma, float) and math.isinf(gamma)):
            return cls(Kind.INFINITE, None, rotation)
        return cls(Kind.HYPERBOLIC, EXACT.coerce(gamma), rotation)

    @classmethod
    def complex(cls, gamma) -> "ComponentType":
        return cls(Kind.COMPLEX, EXACT.coerce(gamma))

    def validate(self) -> None:
        g = self.gamma
        if self.kind is Kind.INFINITE:
            return
        if g is None:
            raise GammaOutOfRange(f"{self.kind.value} component needs gamma")
        c = complex(g)
        if self.kind is Kind.ELLIPTIC:
            if c.imag != 0 or not (0 < c.real < 0.5):
                raise GammaOutOfRange(f"elliptic gamma must satisfy 0<gamma<1/2, got {g!r}")
        elif self.kind is Kind.HYPERBOLIC:
            if c.imag != 0 or not (c.real > 0.5):
                raise GammaOutOfRange(f"hyperbolic gamma must satisfy gamma>1/2, got {g!r}")
        else:
            re, im = _exact_re_im(g)
            if re > Fraction(1, 2) or im < 0 or (re, im) in ((0, 0), (Fraction(1, 2), 0)):
                raise GammaOutOfRange(
                    f"complex gamma must satisfy Re<=1/2, Im>=0, gamma not in {{0,1/2}}, got {g!r}")

    def to_json(self) -> dict:
        d: dict = {"type": self.kind.value if self.kind is not Kind.INFINITE else "hyperbolic"}
        if self.kind is Kind.INFINITE:
            d["gamma"] = "inf"
        else:
            d["gamma"] = EXACT.to_json(self.gamma) if not isinstance(self.gamma, complex) else FLOAT.to_json(self.gamma)
        if self.rotation is not None:
            d["rotation"] = str(self.rotation)
        return d

    @classmethod
    def from_json(cls, d: dict) -> "ComponentType":
        t = d.get("type")
        g = d.get("gamma")
        rot = d.get("rotation")
        if rot is not None and rot != "irrational":
            rot = Fraction(rot)
        if t == "elliptic":
            return cls.elliptic(_gamma_from_json(g))
        if t == "hyperbolic":
            if g in ("inf", "infinity", None):
                return cls(Kind.INFINITE, None, rot)
            return cls(Kind.HYPERBOLIC, _gamma_from_json(g), rot)
        if t == "complex":
            return cls.complex(_gamma_from_json(g))
        raise ManifoldError(f"unknown component type {t!r}")


def _gamma_from_json(g):
    if isinstance(g, dict):
        return EXACT.coerce_pair(g.get("re", 0), g.get("im", 0))
    return EXACT.coerce(str(g) if isinstance(g, (int, str)) else Fraction(g))


def _exact_re_im(g) -> tuple[Fraction, Fraction]:
    if isinstance(g, GaussQ):
        return Fraction(int(g.re.numerator), int(g.re.denominator)), Fraction(int(g.im.numerator), int(g.im.denominator))
    c = complex(g)
    return Fraction(c.real), Fraction(c.imag)


@dataclass(frozen=True)
class Slot:
    """Where a component lives: its kind, component index and partner slot."""

    kind: Kind
    component: int
    partner: int  # equals the slot itself unless complex


@dataclass
class ManifoldSpec:
    """``z_{p+j} = E_j(z', w')`` with ``E`` stored to degree ``N+1``.

    Attributes
    ----------
    p : int
    N : int
        Jet order of maps computed from this manifold.
    E : tuple of TruncatedSeries
        In ``2p`` variables ``(z, w)`` truncated at ``N+1``.
    components : tuple of ComponentType or None
        Declared quadric type; ``None`` when only ``E`` is known.
    square_form : (B, R) or None
        ``E_j = (sum_k B[j][k] w_k + R_j(z, w))^2``.
    """

    p: int
    N: int
    E: tuple
    components: Optional[tuple] = None
    square_form: Optional[tuple] = None
    backend: Backend = EXACT
    name: str = ""

    def __post_init__(self):
        if self.p < 1:
            raise ManifoldError("p must be positive")
        if self.N < 2:
            raise ManifoldError("jet order N must be at least 2")
        if len(self.E) != self.p:
            raise ManifoldError("need one E_j per component")
        for e in self.E:
            if e.n != 2 * self.p or e.N != self.N + 1:
                raise ManifoldError("E_j must live in 2p variables truncated at N+1")
            if any(degree(k) < 2 for k in e.terms):
                raise ManifoldError("E_j must have zero constant and linear part")

    @property
    def n(self) -> int:
        return 2 * self.p

    def slots(self) -> list[Slot]:
        if self.components is None:
            raise ManifoldError("no declared components")
        return slot_layout(self.components)

    def E_map(self) -> JetMap:
        return JetMap(list(self.E))

    def with_order(self, N: int) -> "ManifoldSpec":
        sf = None
        if self.square_form is not None:
            B, R = self.square_form
            sf = (B, tuple(r.truncate(N + 1) for r in R))
            E = tuple(_square(B, sf[1], j, self.p) for j in range(self.p))
        else:
            E = tuple(e.truncate(N + 1) for e in self.E)
        return ManifoldSpec(self.p, N, E, self.components, sf, self.backend, self.name)

    def to_backend(self, backend: Backend) -> "ManifoldSpec":
        sf = None
        if self.square_form is not None:
            B, R = self.square_form
            sf = ([[backend.coerce(x) for x in r] for r in B], tuple(x.to_backend(backend) for x in R))
        return ManifoldSpec(self.p, self.N, tuple(e.to_backend(backend) for e in self.E),
                            self.components, sf, backend, self.name)

    # JSON ----------------------------------------------------------------
    def to_json(self) -> dict:
        out: dict = {"p": self.p, "truncation": self.N}
        if self.components is not None:
            out["components"] = [c.to_json() for c in self.components]
        if self.square_form is not None:
            B, R = self.square_form
            to = self.backend.to_json
            out["square_form"] = {"B": [[to(x) for x in r] for r in B], "R": [r.to_json() for r in R]}
        else:
            terms = []
            for j, e in enumerate(self.E):
                for ex, c in e.items():
                    terms.append({"target": j + 1, "z_exp": list(ex[: self.p]),
                                  "zbar_exp": list(ex[self.p:]), "coeff": self.backend.to_json(c)})
            out["E"] = terms
        return out

    @classmethod
    def from_json(cls, data: dict, N: Optional[int] = None, backend: Backend | str = EXACT) -> "ManifoldSpec":
        return spec_from_json(data, N, backend)


def slot_layout(components: Sequence[ComponentType]) -> list[Slot]:
    ordered = sorted(range(len(components)), key=lambda i: _KIND_ORDER[components[i].kind])
    real = [i for i in ordered if components[i].kind is not Kind.COMPLEX]
    cplx = [i for i in ordered if components[i].kind is Kind.COMPLEX]
    slots: list[Slot] = []
    for i in real:
        s = len(slots)
        slots.append(Slot(components[i].kind, i, s))
    base = len(slots)
    sstar = len(cplx)
    for t, i in enumerate(cplx):
        slots.append(Slot(Kind.COMPLEX, i, base + sstar + t))
    for t, i in enumerate(cplx):
        slots.append(Slot(Kind.COMPLEX, i, base + t))
    return slots


def _square(B, R, j: int, p: int) -> TruncatedSeries:
    lin = TruncatedSeries(2 * p, R[j].N, {unit(p + k): B[j][k] for k in range(p)}, R[j].backend)
    f = lin + R[j]
    return f * f


def square_form_spec(B: Sequence[Sequence[Any]], R: Sequence[TruncatedSeries], N: int,
                     components: Optional[Sequence[ComponentType]] = None,
                     backend: Backend = EXACT, name: str = "") -> ManifoldSpec:
    """Manifold ``E_j = (sum_k B_jk w_k + R_j)^2`` with ``R_j`` in ``2p`` variables.

    ``R_j`` carries the ``z``-linear part (for instance ``z_j``) and all
    higher order terms.
    """
    p = len(B)
    Bc = [[backend.coerce(x) for x in r] for r in B]
    Rt = tuple(r.to_backend(backend).truncate(N + 1) for r in R)
    for r in Rt:
        if 0 in r.terms:
            raise ManifoldError("R_j must vanish at the origin")
        for k in r.terms:
            e = unpack(k, 2 * p)
            if degree(k) == 1 and any(e[p:]):
                raise ManifoldError("w-linear terms belong in B, not R")
    E = tuple(_square(Bc, Rt, j, p) for j in range(p))
    return ManifoldSpec(p, N, E, tuple(components) if components else None, (Bc, Rt), backend, name)


def build_product_quadric(components: Sequence[ComponentType], N: int = 8,
                          backend: Backend = EXACT) -> ManifoldSpec:
    """Product quadric in square form.

    Examples
    --------
    >>> spec = build_product_quadric([ComponentType.elliptic("2/5")], N=2)
    >>> [str(c) for _, c in spec.square_form[1][0].items()]
    ['1']
    """
    if not components:
        raise ManifoldError("need at least one component")
    comps = tuple(components)
    for c in comps:
        c.validate()
    slots = slot_layout(comps)
    p = len(slots)
    if p != sum(2 if c.kind is Kind.COMPLEX else 1 for c in comps):
        raise ManifoldError("slot layout mismatch")
    B = [[backend.zero()] * p for _ in range(p)]
    R = []
    for j, sl in enumerate(slots):
        c = comps[sl.component]
        R.append(TruncatedSeries(2 * p, N + 1, {unit(j): 1}, backend))
        if sl.kind is Kind.INFINITE:
            continue
        g = backend.coerce(c.gamma)
        if sl.kind is Kind.COMPLEX and sl.partner > j:
            B[j][sl.partner] = g * 2
        elif sl.kind is Kind.COMPLEX:
            B[j][sl.partner] = (backend.one() - backend.conj(g)) * 2
        else:
            B[j][j] = g * 2
    if any(sl.kind is Kind.INFINITE for sl in slots):
        E = []
        for j, sl in enumerate(slots):
            if sl.kind is Kind.INFINITE:
                E.append(TruncatedSeries(2 * p, N + 1, {2 * unit(j): 1, 2 * unit(p + j): 1}, backend))
            else:
                E.append(_square(B, R, j, p))
        return ManifoldSpec(p, N, tuple(E), comps, None, backend, "product quadric")
    return square_form_spec(B, R, N, comps, backend, "product quadric")


def spec_from_json(data: dict, N: Optional[int] = None, backend: Backend | str = EXACT) -> ManifoldSpec:
    """Parse the JSON manifold schema (see README)."""
    backend = get_backend(backend)
    if not isinstance(data, dict):
        raise ManifoldError("manifold JSON must be an object")
    try:
        p = int(data["p"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ManifoldError("missing or invalid 'p'") from exc
    order = int(N if N is not None else data.get("truncation", 8))
    comps = None
    if "components" in data:
        comps = tuple(ComponentType.from_json(c) for c in data["components"])
        for c in comps:
            c.validate()
    n = 2 * p
    if "square_form" in data:
        sf = data["square_form"]
        B = [[backend.from_json(x) for x in r] for r in sf["B"]]
        R = [TruncatedSeries.from_json(r, n, order + 1, backend) for r in sf["R"]]
        spec = square_form_spec(B, R, order, comps, backend)
        terms = list(data.get("perturbation", []))
    elif comps is not None and "E" not in data:
        spec = build_product_quadric(comps, order, backend)
        terms = list(data.get("perturbation", []))
    elif "E" in data:
        spec = None
        terms = list(data["E"]) + list(data.get("perturbation", []))
    else:
        raise ManifoldError("need 'components', 'square_form' or 'E'")
    if spec is not None and spec.p != p:
        raise ManifoldError(f"data gives p={spec.p}, file says p={p}")
    if not terms and spec is not None:
        return spec
    base = list(spec.E) if spec is not None else [TruncatedSeries.zero(n, order + 1, backend) for _ in range(p)]
    add = [dict() for _ in range(p)]
    for t in terms:
        j = int(t["target"]) - 1
        if not 0 <= j < p:
            raise ManifoldError(f"target {t['target']} out of range 1..{p}")
        e = tuple(t.get("z_exp", [0] * p)) + tuple(t.get("zbar_exp", [0] * p))
        if len(e) != n:
            raise ManifoldError("z_exp and zbar_exp must each have length p")
        if sum(e) < 2:
            raise ManifoldError("perturbation terms must have degree >= 2")
        c = backend.from_json(t.get("coeff", 1))
        add[j][e] = add[j][e] + c if e in add[j] else c
    E = tuple(b + TruncatedSeries.from_exps(a, n, order + 1, backend) for b, a in zip(base, add))
    return ManifoldSpec(p, order, E, comps, None, backend, "")


def load_spec(path: str, N: Optional[int] = None, backend: Backend | str = EXACT) -> ManifoldSpec:
    with open(path) as fh:
        return spec_from_json(json.load(fh), N, backend)


# ---------------------------------------------------------------------------
# quadratic data and linear deck transformations
# ---------------------------------------------------------------------------


@dataclass
class QuadraticData:
    """Rank-one factorisation ``h_j = (u_j.z)(v_j.w)``, ``q_j = c_j (v_j.w)^2``."""

    p: int
    u: list
    v: list
    c: list
    h: list  # p series: mixed z.w part
    q: list  # p series: pure w part


def quadratic_data(spec: ManifoldSpec) -> QuadraticData:
    """Extract and factor the quadratic part of ``E``.

    Raises
    ------
    UnrecognizedQuadric
        If some ``q_j`` is not a rank-one square or ``h_j`` does not share
        its linear form.
    """
    p, be = spec.p, spec.backend
    us, vs, cs, hs, qs = [], [], [], [], []
    for j, e in enumerate(spec.E):
        quad = e.homogeneous(2)
        H = [[be.zero()] * p for _ in range(p)]  # H[a][b] coefficient of z_a w_b
        Qm = [[be.zero()] * p for _ in range(p)]  # symmetric
        hterms, qterms = {}, {}
        for k, c in quad.terms.items():
            ex = unpack(k, 2 * p)
            zi = [i for i in range(p) for _ in range(ex[i])]
            wi = [i for i in range(p) for _ in range(ex[p + i])]
            if len(wi) == 0:
                continue
            if len(wi) == 1:
                H[zi[0]][wi[0]] = c
                hterms[k] = c
            else:
                a, b = wi
                qterms[k] = c
                if a == b:
                    Qm[a][a] = c
                else:
                    half = c / 2
                    Qm[a][b] = half
                    Qm[b][a] = half
        piv = next((i for i in range(p) if not be.is_zero(Qm[i][i])), None)
        if piv is None:
            raise UnrecognizedQuadric(f"E_{j + 1}: pure w-part is not a nonzero square")
        cj = Qm[piv][piv]
        v = [Qm[piv][k] / cj for k in range(p)]
        for a in range(p):
            for b in range(p):
                if not be.is_zero_tol(Qm[a][b] - cj * v[a] * v[b]):
                    raise UnrecognizedQuadric(f"E_{j + 1}: pure w-part has rank > 1")
        u = [H[a][piv] for a in range(p)]
        for a in range(p):
            for b in range(p):
                if not be.is_zero_tol(H[a][b] - u[a] * v[b]):
                    raise UnrecognizedQuadric(f"E_{j + 1}: mixed part does not factor through v.w")
        us.append(u)
        vs.append(v)
        cs.append(cj)
        hs.append(TruncatedSeries(2 * p, spec.N, hterms, be))
        qs.append(TruncatedSeries(2 * p, spec.N, qterms, be))
    return QuadraticData(p, us, vs, cs, hs, qs)


def rho_matrix(p: int, backend: Backend = EXACT) -> list:
    """Swap ``(z, w) -> (w, z)``; the anti-holomorphic ``rho`` is this composed with conjugation."""
    o, z = backend.one(), backend.zero()
    n = 2 * p
    return [[o if (j == (i + p) % n) else z for j in range(n)] for i in range(n)]


def _reflected_index(d: Sequence[Any]) -> int:
    best, bi = -1.0, 0
    for i, x in enumerate(d):
        a = abs(complex(x))
        if a > best + 1e-12:
            best, bi = a, i
    return bi


def linear_deck_generators(spec: ManifoldSpec, qd: Optional[QuadraticData] = None) -> list:
    """Linear involutions of the quadratic part, one per equation, ordered by reflected ``w`` index.

    Returns a list of ``(equation_index, matrix)`` pairs with ``2p x 2p``
    matrices acting on ``(z, w)``.
    """
    qd = qd or quadratic_data(spec)
    p, be = spec.p, spec.backend
    V = qd.v
    try:
        Vinv = mat_inv(V, be)
    except SingularMatrix as exc:
        raise UnrecognizedQuadric("linear forms v_j are dependent; condition B fails") from exc
    gens = []
    for j in range(p):
        d = [Vinv[i][j] for i in range(p)]  # reflected direction in w
        T = eye(2 * p, be)
        # w' = w - d * (2 v_j.w + u_j.z / c_j)
        for i in range(p):
            for a in range(p):
                T[p + i][p + a] = T[p + i][p + a] - d[i] * qd.v[j][a] * 2
                T[p + i][a] = T[p + i][a] - d[i] * qd.u[j][a] / qd.c[j]
        gens.append((j, T, _reflected_index(d)))
    gens.sort(key=lambda t: t[2])
    if sorted(g[2] for g in gens) != list(range(p)):
        gens.sort(key=lambda t: t[0])
    return [(g[0], g[1]) for g in gens]


# ---------------------------------------------------------------------------
# classification
# ---------------------------------------------------------------------------


@dataclass
class SpectrumReport:
    """Invariants read off the linear deck family.

    ``lam[j]``, ``mu[j]`` are exact scalars when representable, otherwise
    complex floats; ``exact[j]`` records which.
    """

    p: int
    kinds: list
    gamma: list
    lam: list
    mu: list
    partner: list
    exact: list
    trace: list
    conditionB: Optional[bool] = None
    conditionB_method: str = ""
    conditionJ: Optional[bool] = None
    conditionJ_detail: list = field(default_factory=list)
    distinct: Optional[bool] = None
    nonresonant: Optional[bool] = None
    abelian: Optional[bool] = None
    normalized: list = field(default_factory=list)
    rotation: list = field(default_factory=list)
    root_of_unity: list = field(default_factory=list)
    declared_match: Optional[bool] = None
    notes: list = field(default_factory=list)

    def to_json(self) -> dict:
        def enc(x):
            if x is None:
                return None
            if isinstance(x, (GaussQ, QSurd)):
                return EXACT.to_json(x)
            if isinstance(x, float) and math.isinf(x):
                return "inf"
            return FLOAT.to_json(complex(x))

        return {
            "p": self.p,
            "components": [
                {"slot": j + 1, "type": self.kinds[j].value, "gamma": enc(self.gamma[j]),
                 "lambda": enc(self.lam[j]), "mu": enc(self.mu[j]), "partner": self.partner[j] + 1,
                 "exact": self.exact[j], "normalized": self.normalized[j] if self.normalized else None,
                 "root_of_unity": self.root_of_unity[j] if self.root_of_unity else None}
                for j in range(self.p)],
            "conditionB": self.conditionB,
            "conditionB_method": self.conditionB_method,
            "conditionJ": self.conditionJ,
            "distinct_eigenvalues": self.distinct,
            "nonresonant": self.nonresonant,
            "abelian": self.abelian,
            "declared_match": self.declared_match,
            "notes": list(self.notes),
        }


def _commute(A, B, be) -> bool:
    return all(be.is_zero_tol(x) for r in mat_sub(mat_mul(A, B, be), mat_mul(B, A, be)) for x in r)


def linear_family(spec: ManifoldSpec):
    """``(tau1, tau2, partner, sigma)`` as matrices for the linear deck family."""
    p, be = spec.p, spec.backend
    gens = [T for _, T in linear_deck_generators(spec)]
    Rm = rho_matrix(p, be)
    tau2 = [mat_mul(mat_mul(Rm, conj_matrix(T, be), be), Rm, be) for T in gens]
    partner = []
    for j in range(p):
        nc = [k for k in range(p) if not _commute(gens[j], tau2[k], be)]
        if len(nc) == 1:
            partner.append(nc[0])
        elif not nc:
            partner.append(j)
        else:
            raise UnrecognizedQuadric(f"generator {j + 1} fails to commute with several tau_2")
    sigma = [mat_mul(gens[j], tau2[partner[j]], be) for j in range(p)]
    return gens, tau2, partner, sigma


def _sqrt(be: Backend, x):
    if be.exact:
        try:
            r = be.sqrt(x)
        except BackendMismatch:
            r = None
        return r
    return cmath.sqrt(complex(x))


def _minpoly_vanishes(S, eigs, be) -> bool:
    n = len(S)
    P = eye(n, be)
    for lam in eigs:
        P = mat_mul(P, mat_sub(S, [[lam if i == j else be.zero() for j in range(n)] for i in range(n)]), be)
    if be.exact:
        return all(be.is_zero(x) for r in P for x in r)
    return float(np.max(np.abs(to_numpy(P)))) <= 1e-9


def _distinct(vals, be) -> list:
    out = []
    for v in vals:
        if not any(_close(v, w, be) for w in out):
            out.append(v)
    return out


def _close(a, b, be) -> bool:
    if be.exact and not isinstance(a, complex) and not isinstance(b, complex):
        try:
            return not (a - b)
        except BackendMismatch:
            return abs(complex(a) - complex(b)) < 1e-12
    return abs(complex(a) - complex(b)) <= 1e-9


def classify(spec: ManifoldSpec, *, condB_lines: int = 20, seed: int = 0) -> SpectrumReport:
    """Compute lambda, mu and types from the linear deck family.

    Examples
    --------
    >>> r = classify(build_product_quadric([ComponentType.elliptic("2/5")], N=2))
    >>> str(r.lam[0]), str(r.mu[0]), r.kinds[0].value
    ('2', '4', 'elliptic')
    """
    p, be = spec.p, spec.backend
    gens, tau2, partner, sigma = linear_family(spec)
    kinds, gammas, lams, mus, exacts, traces, norm, rots, rou = [], [], [], [], [], [], [], [], []
    notes = []
    two = be.coerce(2)
    for j in range(p):
        S = sigma[j]
        t = sum((S[i][i] for i in range(2 * p)), be.zero()) - (2 * p - 2)
        traces.append(t)
        rots.append(None)
        if partner[j] == j:
            tc = complex(t)
            if abs(tc.imag) > 1e-12:
                raise UnrecognizedQuadric(f"component {j + 1}: real type with non-real trace")
            g2inv = t + 2  # gamma^{-2}
            if abs(complex(g2inv)) < 1e-15:
                kinds.append(Kind.INFINITE)
                gammas.append(math.inf)
                lam = be.coerce(GaussQ(0, 1)) if be.exact else 1j
                lams.append(lam)
                mus.append(lam * lam)
                exacts.append(True)
                norm.append(True)
                rou.append(True)
                continue
            s = _sqrt(be, g2inv)  # 1/gamma
            disc = _sqrt(be, t - 2)  # sqrt(1/gamma^2 - 4)
            exact_ok = s is not None and disc is not None
            if exact_ok:
                try:
                    gam = be.one() / s
                    lam = (s + disc) / two
                    mu = lam * lam
                except BackendMismatch:
                    exact_ok = False
            if not exact_ok:
                sf = cmath.sqrt(complex(g2inv))
                df = cmath.sqrt(complex(t) - 2)
                gam = 1 / sf
                lam = (sf + df) / 2
                mu = lam * lam
            tr = tc.real
            if tr > 2 + 1e-12:
                kind = Kind.ELLIPTIC
            elif tr < 2 - 1e-12:
                kind = Kind.HYPERBOLIC
            else:
                kind = Kind.ELLIPTIC
                notes.append(f"component {j + 1}: parabolic (gamma=1/2), condition J fails")
            kinds.append(kind)
            gammas.append(gam)
            lams.append(lam)
            mus.append(mu)
            exacts.append(exact_ok)
            norm.append(True)
            lc = complex(lam)
            rou.append(kind is Kind.HYPERBOLIC and _is_root_of_unity(lc, be, mu))
        else:
            kinds.append(Kind.COMPLEX)
            d = _sqrt(be, t * t - 4)
            exact_ok = d is not None
            if exact_ok:
                try:
                    mu = (t + d) / two
                    if abs(complex(mu)) < 1 - 1e-12:
                        mu = be.one() / mu
                except BackendMismatch:
                    exact_ok = False
            if not exact_ok:
                dc = cmath.sqrt(complex(t) ** 2 - 4)
                mu = (complex(t) + dc) / 2
                if abs(mu) < 1 - 1e-12:
                    mu = 1 / mu
            mus.append(mu)
            exacts.append(exact_ok)
            lams.append(None)
            gammas.append(None)
            rou.append(False)
            norm.append(None)
    # orient complex pairs: slot s carries Im mu_s >= 0, partner mu_{s'} = conj(mu_s)^{-1}
    for j in range(p):
        k = partner[j]
        if kinds[j] is not Kind.COMPLEX or k < j:
            continue
        mj = mus[j]
        if complex(mj).imag < -1e-12:
            mj = be.conj(mj) if not isinstance(mj, complex) else mj.conjugate()
            notes.append(f"complex pair ({j + 1},{k + 1}): slot {k + 1} carries Im mu >= 0")
            s, sp = k, j
        else:
            s, sp = j, k
        mus[s] = mj
        mus[sp] = (be.one() / be.conj(mj)) if not isinstance(mj, complex) else 1 / mj.conjugate()
        for idx in (s, sp):
            m = mus[idx]
            if isinstance(m, complex) or not be.exact:
                lam = cmath.sqrt(complex(m))
                lam_ok = False
            else:
                lam = _sqrt(be, m)
                lam_ok = lam is not None
                if not lam_ok:
                    lam = cmath.sqrt(complex(m))
            lams[idx] = lam
            exacts[idx] = exacts[idx] and lam_ok
        gs = (be.one() / (be.one() + mus[s])) if not isinstance(mus[s], complex) else 1 / (1 + mus[s])
        gs = be.conj(gs) if not isinstance(gs, complex) else gs.conjugate()
        gammas[s] = gs
        gammas[sp] = gs
        mc = complex(mus[s])
        ok = abs(mc) >= 1 - 1e-12 and mc.imag >= -1e-12 and abs(mc + 1) > 1e-12 and abs(complex(lams[s]) - 1j) > 1e-12
        norm[s] = norm[sp] = ok
        if not ok:
            notes.append(f"complex pair ({s + 1},{sp + 1}): outside the normalized range; reported unnormalized")
    # condition J
    detail = []
    for j in range(p):
        m = mus[j]
        try:
            eigs = _distinct([be.coerce(m) if be.exact and not isinstance(m, complex) else m,
                              (be.one() / m) if not isinstance(m, complex) else 1 / m, be.one()], be)
            if any(isinstance(x, complex) for x in eigs) and be.exact:
                Sf = [[complex(x) for x in r] for r in sigma[j]]
                detail.append(_minpoly_vanishes(Sf, [complex(x) for x in eigs], FLOAT))
            else:
                detail.append(_minpoly_vanishes(sigma[j], eigs, be))
        except (BackendMismatch, ZeroDivisionError):
            Sf = [[complex(x) for x in r] for r in sigma[j]]
            mc = complex(m)
            detail.append(_minpoly_vanishes(Sf, [complex(x) for x in _distinct([mc, 1 / mc, 1.0], FLOAT)], FLOAT))
    allvals = []
    for m in mus:
        mc = complex(m)
        allvals += [mc, 1 / mc]
    distinct = all(abs(a - b) > 1e-12 for i, a in enumerate(allvals) for b in allvals[i + 1:])
    rep = SpectrumReport(p, kinds, gammas, lams, mus, partner, exacts, traces,
                         conditionJ=all(detail), conditionJ_detail=detail, distinct=distinct,
                         normalized=norm, rotation=rots, root_of_unity=rou, notes=notes)
    cert = check_condition_B(spec, lines=condB_lines, seed=seed)
    rep.conditionB = cert.holds
    rep.conditionB_method = cert.method
    rep.nonresonant = not any(rou)
    if spec.components is not None:
        rep.declared_match = _declared_match(spec, rep)
        for sl, j in zip(spec.slots(), range(p)):
            c = spec.components[sl.component]
            if c.rotation is not None:
                rep.rotation[j] = c.rotation
                if c.rotation != "irrational":
                    rep.root_of_unity[j] = True
                    rep.nonresonant = False
    return rep


def _is_root_of_unity(lam: complex, be: Backend, mu, max_order: int = 256) -> bool:
    """Whether ``mu`` is a root of unity (order <= max_order)."""
    if be.exact and not isinstance(mu, complex):
        x = be.one()
        for _ in range(max_order):
            x = x * mu
            if not (x - 1):
                return True
        return False
    x = 1 + 0j
    mc = complex(mu)
    for _ in range(max_order):
        x *= mc
        if abs(x - 1) < 1e-9:
            return True
    return False


def _declared_match(spec: ManifoldSpec, rep: SpectrumReport) -> bool:
    for j, sl in enumerate(spec.slots()):
        c = spec.components[sl.component]
        if sl.kind is Kind.INFINITE:
            if rep.kinds[j] is not Kind.INFINITE:
                return False
            continue
        if rep.kinds[j] is not (Kind.ELLIPTIC if sl.kind is Kind.ELLIPTIC else sl.kind):
            if not (sl.kind is Kind.ELLIPTIC and rep.kinds[j] is Kind.ELLIPTIC):
                return False
        if abs(complex(c.gamma) - complex(rep.gamma[j])) > 1e-9:
            return False
    return True


def spectrum_from_invariants(components: Sequence[ComponentType], backend: Backend = EXACT) -> SpectrumReport:
    """Spectrum of a product quadric straight from its declared invariants."""
    return classify(build_product_quadric(components, N=2, backend=backend))


# ---------------------------------------------------------------------------
# condition B
# ---------------------------------------------------------------------------


@dataclass
class ConditionBCertificate:
    holds: bool
    method: str
    detail: dict = field(default_factory=dict)


def _q_forms(spec: ManifoldSpec) -> list:
    """Pure-w quadratic forms ``q_j`` as dicts ``(a, b) -> coeff`` with ``a <= b``."""
    p = spec.p
    out = []
    for e in spec.E:
        d = {}
        for k, c in e.homogeneous(2).terms.items():
            ex = unpack(k, 2 * p)
            if any(ex[:p]):
                continue
            wi = [i for i in range(p) for _ in range(ex[p + i])]
            d[(wi[0], wi[1])] = c
        out.append(d)
    return out


def check_condition_B(spec: ManifoldSpec, lines: int = 20, seed: int = 0) -> ConditionBCertificate:
    """Decide ``q^{-1}(0) = {0}`` for the pure-w quadratic map ``q``.

    ``p = 1`` and ``p = 2`` are decided exactly (the latter by the resultant
    of two binary quadratics).  For ``p >= 3`` the product structure is
    used when the quadratic part factors; otherwise ``|q|`` is minimised on
    the unit sphere from ``lines`` random starting directions and the
    seed is recorded.
    """
    p, be = spec.p, spec.backend
    qs = _q_forms(spec)
    z = be.zero()
    if p == 1:
        c = qs[0].get((0, 0), z)
        return ConditionBCertificate(not be.is_zero_tol(c), "exact", {"coefficient": str(c)})
    if p == 2:
        (a, b, c), (d, e, f) = [(q.get((0, 0), z), q.get((0, 1), z), q.get((1, 1), z)) for q in qs]
        res = (a * f - c * d) * (a * f - c * d) - (a * e - b * d) * (b * f - c * e)
        return ConditionBCertificate(not be.is_zero_tol(res), "resultant", {"resultant": str(res)})
    try:
        qd = quadratic_data(spec)
        detV = det(qd.v, be)
        ok = not be.is_zero_tol(detV) and all(not be.is_zero_tol(c) for c in qd.c)
        return ConditionBCertificate(ok, "product-structure", {"det_v": str(detV)})
    except UnrecognizedQuadric:
        pass
    from scipy.optimize import minimize

    rng = np.random.default_rng(seed)
    Qs = []
    for q in qs:
        M = np.zeros((p, p), dtype=complex)
        for (i, k), c in q.items():
            if i == k:
                M[i, i] = complex(c)
            else:
                M[i, k] = M[k, i] = complex(c) / 2
        Qs.append(M)

    def obj(x):
        v = x[:p] + 1j * x[p:]
        v = v / np.linalg.norm(v)
        return float(sum(abs(v @ M @ v) ** 2 for M in Qs))

    best = math.inf
    for _ in range(lines):
        x0 = rng.standard_normal(2 * p)
        r = minimize(obj, x0, method="BFGS")
        best = min(best, r.fun)
    return ConditionBCertificate(best > 1e-12, "probabilistic", {"seed": seed, "lines": lines, "min_value": best})


# ---------------------------------------------------------------------------
# linear equivalences and CR locus
# ---------------------------------------------------------------------------


def quad_transform(h: JetMap, q: JetMap, A, U, backend: Optional[Backend] = None):
    """``(U^{-1} h(Az, conj(A) w), U^{-1} q(conj(A) w))`` for quadratic data in ``(z, w)``."""
    be = backend or h.backend
    p = len(A)
    try:
        Uinv = mat_inv(U, be)
        mat_inv(A, be)
    except SingularMatrix as exc:
        raise ManifoldError("A and U must be invertible") from exc
    Ab = conj_matrix(A, be)
    L = [[be.zero()] * (2 * p) for _ in range(2 * p)]
    for i in range(p):
        for k in range(p):
            L[i][k] = A[i][k]
            L[p + i][p + k] = Ab[i][k]
    Lm = JetMap.linear(L, h.N, be)
    Um = JetMap.linear(Uinv, h.N, be)
    return Um @ (h @ Lm), Um @ (q @ Lm)


def _det_series(M: list) -> TruncatedSeries:
    n = len(M)
    if n == 1:
        return M[0][0]
    acc = None
    for c in range(n):
        if not M[0][c]:
            continue
        minor = [r[:c] + r[c + 1:] for r in M[1:]]
        t = M[0][c] * _det_series(minor)
        if c % 2:
            t = -t
        acc = t if acc is None else acc + t
    return acc if acc is not None else M[0][0] - M[0][0]


def cr_det(spec: ManifoldSpec) -> TruncatedSeries:
    """``det(dE_i/dw_j)`` truncated at ``N``; its zero set is the CR-singular locus."""
    p = spec.p
    J = [[e.diff(p + k).truncate(spec.N) for k in range(p)] for e in spec.E]
    return _det_series(J)
