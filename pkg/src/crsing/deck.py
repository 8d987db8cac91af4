"""Deck transformations of the complexification and the involution family.

A deck transformation fixes ``z'`` and preserves ``E(z', w')``.  We solve
``E(z', f(z', w')) = E(z', w')`` degree by degree starting from a linear
seed, build the family ``tau_{1j}``, ``rho``, ``tau_{2j} = rho tau_{1j} rho``
and the compositions ``sigma_j``, and check the identities they satisfy.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Any, Optional, Sequence

import numpy as np

from .linalg import SingularMatrix, kernel, mat_inv, mat_mul, rank, transpose
from .manifold import (ManifoldSpec, UnrecognizedQuadric, linear_deck_generators, quadratic_data,
                       rho_matrix, square_form_spec)
from .scalars import Backend, EXACT
from .series import (AntiholomorphicJetMap, JetMap, TruncatedSeries, degree, jet_compose, jet_invert,
                     monomials, pack, reynolds_linearize, unit, unpack)

__all__ = [
    "DeckError",
    "ObstructedAtDegree",
    "SingularSystem",
    "RealizationError",
    "DeckFamily",
    "FamilyReport",
    "solve_deck_general",
    "solve_deck_square_form",
    "build_deck_family",
    "family_from_generators",
    "verify_family",
    "realize_manifold",
    "standard_rho",
]


class DeckError(ArithmeticError):
    """Base class for deck computation failures."""


class ObstructedAtDegree(DeckError):
    """No deck transformation extends the seed past this degree."""

    def __init__(self, degree: int, residual: float, component: Optional[int] = None):
        self.degree = degree
        self.residual = residual
        self.component = component
        super().__init__(f"deck equation obstructed at degree {degree} (residual {residual:.3g})")


class SingularSystem(DeckError):
    """The per-degree operator is singular (condition B fails)."""


class RealizationError(DeckError):
    """Generators violate the hypotheses needed to realize a manifold."""


# ---------------------------------------------------------------------------
# homogeneous polynomial helpers (untruncated dicts keyed by packed monomials)
# ---------------------------------------------------------------------------


def _pmul(a: dict, b: dict) -> dict:
    out: dict = {}
    for ka, ca in a.items():
        for kb, cb in b.items():
            k = ka + kb
            v = out.get(k)
            out[k] = ca * cb if v is None else v + ca * cb
    return {k: v for k, v in out.items() if v}


def _padd(a: dict, b: dict, sign: int = 1) -> dict:
    out = dict(a)
    for k, c in b.items():
        v = out.get(k)
        c = c if sign > 0 else -c
        out[k] = c if v is None else v + c
    return {k: v for k, v in out.items() if v}


def _pdet(M: list, n: int) -> dict:
    if len(M) == 1:
        return M[0][0]
    acc: dict = {}
    for c in range(len(M)):
        if not M[0][c]:
            continue
        minor = [r[:c] + r[c + 1:] for r in M[1:]]
        acc = _padd(acc, _pmul(M[0][c], _pdet(minor, n)), -1 if c % 2 else 1)
    return acc


def _padj(M: list, n: int) -> list:
    m = len(M)
    if m == 1:
        return [[{0: EXACT.one()}]]
    adj = [[{} for _ in range(m)] for _ in range(m)]
    for i in range(m):
        for j in range(m):
            minor = [r[:j] + r[j + 1:] for k, r in enumerate(M) if k != i]
            d = _pdet(minor, n)
            adj[j][i] = d if (i + j) % 2 == 0 else {k: -v for k, v in d.items()}
    return adj


def _pdiv(a: dict, d: dict, n: int) -> tuple[dict, dict]:
    """Exact division ``a = q d + r``; ``r`` is nonzero iff ``d`` does not divide ``a``."""
    def lead(p):
        k = max(p, key=lambda x: unpack(x, n))
        return k, p[k]

    q: dict = {}
    a = dict(a)
    kd, cd = lead(d)
    ed = unpack(kd, n)
    while a:
        ka, ca = lead(a)
        ea = unpack(ka, n)
        if any(x < y for x, y in zip(ea, ed)):
            return q, a
        km = ka - kd
        cm = ca / cd
        q[km] = q.get(km, 0) + cm
        a = _padd(a, {k + km: c * cm for k, c in d.items()}, -1)
    return {k: v for k, v in q.items() if v}, {}


# ---------------------------------------------------------------------------
# deck solves
# ---------------------------------------------------------------------------


def _lift_map(p: int, W: Sequence[TruncatedSeries], order: int, be: Backend) -> JetMap:
    n = 2 * p
    comps = [TruncatedSeries.var(i, n, order, be) for i in range(p)]
    comps += [w.truncate(order) for w in W]
    return JetMap(comps)


def _max_abs(d: dict) -> float:
    return max((abs(complex(v)) for v in d.values()), default=0.0)


def solve_deck_general(spec: ManifoldSpec, seed) -> JetMap:
    """Lift a linear deck transformation of the quadratic part to order ``N``.

    Parameters
    ----------
    spec : ManifoldSpec
    seed : 2p x 2p matrix or JetMap
        Linear part; must fix ``z'`` and preserve the quadratic part of ``E``.

    Returns
    -------
    JetMap
        The unique deck transformation with this linear part, mod degree ``N+1``.

    Raises
    ------
    ObstructedAtDegree
        If the degree-``k`` equation ``M u_k = -D_k`` has no polynomial solution.
    SingularSystem
        If ``M = d_w Q(z, seed)`` is degenerate.

    Notes
    -----
    Exact backend: ``u_k = adj(M) (-D_k) / det(M)`` by exact polynomial
    division, a nonzero remainder being the obstruction.  Float backend:
    least squares on the coefficient system with rank tolerance
    ``1e-9 * ||M||``.
    """
    p, N, be = spec.p, spec.N, spec.backend
    n = 2 * p
    S = seed.linear_part if isinstance(seed, JetMap) else [list(r) for r in seed]
    W1 = [TruncatedSeries(n, N + 1, {unit(c): S[p + i][c] for c in range(n)}, be) for i in range(p)]
    for i in range(p):
        for c in range(n):
            want = be.one() if c == i else be.zero()
            if not be.is_zero_tol(S[i][c] - want):
                raise ValueError("seed must fix z'")
    Emap = JetMap(list(spec.E))
    # M_{jk} = d E_j / d w_k evaluated at (z, seed w): linear forms
    lin = _lift_map(p, W1, N + 1, be)
    M = []
    for e in spec.E:
        quad = e.homogeneous(2)
        row = []
        for k in range(p):
            dk = jet_compose(JetMap([quad.diff(p + k)], allow_constant=True), lin, 1).components[0]
            row.append(dict(dk.homogeneous(1).terms))
        M.append(row)
    # the seed must preserve the quadratic part exactly
    q2 = jet_compose(JetMap([e.homogeneous(2) for e in spec.E]), lin, 2)
    for a, e in zip(q2.components, spec.E):
        if (a - e.homogeneous(2).truncate(2)).max_abs() > (0 if be.exact else be.tol):
            raise ValueError("seed does not preserve the quadratic part of E")
    if be.exact:
        detM = _pdet(M, n)
        if not detM:
            raise SingularSystem("d_w Q at the seed is degenerate")
        adjM = _padj(M, n)
    else:
        Mnum = _float_operator(M, p, n)
    W = list(W1)
    target = Emap
    for k in range(2, N + 1):
        lk = _lift_map(p, W, N + 1, be)
        cur = jet_compose(Emap, lk, k + 1)
        D = [dict((c - t.truncate(k + 1)).homogeneous(k + 1).terms) for c, t in zip(cur.components, target.components)]
        if not any(D):
            continue
        if be.exact:
            rhs = [{kk: -v for kk, v in d.items()} for d in D]
            u = []
            for i in range(p):
                num: dict = {}
                for j in range(p):
                    num = _padd(num, _pmul(adjM[i][j], rhs[j]))
                if not num:
                    u.append({})
                    continue
                qt, r = _pdiv(num, detM, n)
                if r:
                    raise ObstructedAtDegree(k, _max_abs(r), i)
                u.append(qt)
        else:
            u = _float_solve(Mnum, D, p, n, k, be)
        W = [w + TruncatedSeries(n, N + 1, ui, be) for w, ui in zip(W, u)]
    return _lift_map(p, W, N, be)


def _float_operator(M, p, n):
    return [[{k: complex(v) for k, v in M[j][kk].items()} for kk in range(p)] for j in range(p)]


def _float_solve(M, D, p, n, k, be) -> list:
    cols = [(i, m) for i in range(p) for m in monomials(n, k)]
    rows = [(j, m) for j in range(p) for m in monomials(n, k + 1)]
    ridx = {(j, pack(m)): r for r, (j, m) in enumerate(rows)}
    A = np.zeros((len(rows), len(cols)), dtype=complex)
    for c, (i, m) in enumerate(cols):
        km = pack(m)
        for j in range(p):
            for kl, v in M[j][i].items():
                A[ridx[(j, km + kl)], c] += v
    b = np.zeros(len(rows), dtype=complex)
    for j in range(p):
        for kk, v in D[j].items():
            b[ridx[(j, kk)]] = -complex(v)
    scale = max(np.linalg.norm(A, 2), 1.0)
    x, *_ = np.linalg.lstsq(A, b, rcond=1e-9)
    if np.linalg.matrix_rank(A, tol=1e-9 * scale) < len(cols):
        raise SingularSystem(f"coefficient system at degree {k} is rank deficient")
    res = float(np.max(np.abs(A @ x - b))) if len(b) else 0.0
    if res > be.tol * max(1.0, float(np.max(np.abs(b)))):
        raise ObstructedAtDegree(k, res)
    out = [dict() for _ in range(p)]
    for c, (i, m) in enumerate(cols):
        if abs(x[c]) >= be.drop_tol:
            out[i][pack(m)] = complex(x[c])
    return out


def solve_deck_square_form(spec: ManifoldSpec, signs: Sequence[int]) -> JetMap:
    """Deck transformation flipping the square roots ``B w + R`` by ``signs``.

    Solves ``B w~ + R(z, w~) = diag(signs) (B w + R(z, w))`` by contraction.
    """
    if spec.square_form is None:
        raise ValueError("manifold carries no square-form data")
    p, N, be = spec.p, spec.N, spec.backend
    n = 2 * p
    B, R = spec.square_form
    try:
        Binv = mat_inv(B, be)
    except SingularMatrix as exc:
        raise SingularSystem("square-form matrix B is singular") from exc
    R = [r.truncate(N) for r in R]
    L = []
    for j in range(p):
        lin = TruncatedSeries(n, N, {unit(p + k): B[j][k] for k in range(p)}, be)
        L.append((lin + R[j]).scale(signs[j]))
    Wt = [TruncatedSeries.zero(n, N, be) for _ in range(p)]
    for k in range(1, N + 1):
        g = _lift_map(p, Wt, N, be)
        Rg = [jet_compose(JetMap([r], allow_constant=True), g, k).components[0].truncate(N) for r in R]
        rhs = [(L[j] - Rg[j]).homogeneous(k) for j in range(p)]
        Wt = [Wt[i] + sum((rhs[j].scale(Binv[i][j]) for j in range(p)), TruncatedSeries.zero(n, N, be))
              for i in range(p)]
    return _lift_map(p, Wt, N, be)


# ---------------------------------------------------------------------------
# the family
# ---------------------------------------------------------------------------


def standard_rho(p: int, N: int, backend: Backend = EXACT) -> AntiholomorphicJetMap:
    """``rho(z, w) = (conj w, conj z)``."""
    return AntiholomorphicJetMap(JetMap.linear(rho_matrix(p, backend), N, backend))


@dataclass
class DeckFamily:
    """Involutions ``tau_{1j}``, ``rho`` and everything derived from them.

    ``partner[j]`` is the index ``k`` with ``sigma_j = tau_{1j} o tau_{2k}``
    (``k = j`` except on complex pairs).
    """

    p: int
    N: int
    backend: Backend
    generators: list
    rho: AntiholomorphicJetMap
    tau2: list = field(default_factory=list)
    partner: list = field(default_factory=list)
    sigma: list = field(default_factory=list)
    tau1_total: Optional[JetMap] = None
    tau2_total: Optional[JetMap] = None
    sigma_total: Optional[JetMap] = None
    conditionD: bool = True
    group_order: int = 0
    group: list = field(default_factory=list)
    obstructions: dict = field(default_factory=dict)
    method: str = "general"

    def to_json(self) -> dict:
        out = {
            "p": self.p, "truncation": self.N, "conditionD": self.conditionD,
            "group_order": self.group_order, "method": self.method,
            "partner": [k + 1 for k in self.partner],
            "obstructions": {",".join(map(str, k)): {"degree": v.degree, "residual": v.residual}
                             for k, v in self.obstructions.items()},
        }
        if self.conditionD:
            out["generators"] = [g.to_json() for g in self.generators]
            out["rho"] = self.rho.to_json()
            out["sigma"] = [s.to_json() for s in self.sigma]
        return out


def _linear_partner(gens: list, tau2: list, be: Backend) -> list:
    from .manifold import _commute

    p = len(gens)
    out = []
    for j in range(p):
        nc = [k for k in range(p) if not _commute(gens[j].linear_part, tau2[k].linear_part, be)]
        # off product form several tau_2 may fail to commute; pair with the own index then
        out.append(nc[0] if len(nc) == 1 else j)
    return out


def _reflected_index(T, be) -> int:
    n = len(T)
    A = [[T[i][k] + (be.one() if i == k else be.zero()) for k in range(n)] for i in range(n)]
    ker = kernel(A, be)
    if len(ker) != 1:
        raise RealizationError(f"linear part has a -1 eigenspace of dimension {len(ker)}, expected 1")
    v = ker[0]
    mags = [abs(complex(x)) for x in v]
    return max(range(n), key=lambda i: (mags[i] > 1e-12, mags[i], -i))


def family_from_generators(generators: Sequence[JetMap], rho: AntiholomorphicJetMap,
                           order_by_reflection: bool = True) -> DeckFamily:
    """Derive ``tau_2``, ``sigma`` and totals from commuting involutions and ``rho``."""
    gens = list(generators)
    be = gens[0].backend
    p = len(gens)
    N = gens[0].N
    if order_by_reflection:
        idx = [_reflected_index(g.linear_part, be) for g in gens]
        if len(set(idx)) == p:
            gens = [g for _, g in sorted(zip(idx, gens), key=lambda t: t[0])]
    tau2 = [rho.conjugate_map(g) for g in gens]
    partner = _linear_partner(gens, tau2, be)
    sigma = [jet_compose(gens[j], tau2[partner[j]]) for j in range(p)]
    t1 = gens[0]
    t2 = tau2[0]
    for j in range(1, p):
        t1 = jet_compose(t1, gens[j])
        t2 = jet_compose(t2, tau2[j])
    return DeckFamily(p, N, be, gens, rho, tau2, partner, sigma, t1, t2, jet_compose(t1, t2),
                      True, 2 ** p)


def build_deck_family(spec: ManifoldSpec, *, strict: bool = False, method: str = "auto") -> DeckFamily:
    """Try all ``2^p`` seeds; on success assemble the involution family.

    Parameters
    ----------
    strict : bool
        Raise the first ``ObstructedAtDegree`` instead of reporting
        ``conditionD = False``.
    method : {"auto", "general", "square"}
        ``auto`` uses the square-form contraction when the manifold carries square-form data.
    """
    p, N, be = spec.p, spec.N, spec.backend
    use_square = spec.square_form is not None and method in ("auto", "square")
    if method == "square" and spec.square_form is None:
        raise ValueError("square method requested without square-form data")
    lin = [T for _, T in linear_deck_generators(spec)] if not use_square else None
    found: dict = {}
    obstructions: dict = {}
    for mask in itertools.product((0, 1), repeat=p):
        if not any(mask):
            found[mask] = JetMap.identity(2 * p, N, be)
            continue
        try:
            if use_square:
                found[mask] = solve_deck_square_form(spec, [-1 if m else 1 for m in mask])
            else:
                S = None
                for j, m in enumerate(mask):
                    if m:
                        S = lin[j] if S is None else mat_mul(S, lin[j], be)
                found[mask] = solve_deck_general(spec, S)
        except ObstructedAtDegree as exc:
            if strict:
                raise
            obstructions[mask] = exc
    rho = standard_rho(p, N, be)
    order = len(found)
    singles = [tuple(1 if i == j else 0 for i in range(p)) for j in range(p)]
    if all(s in found for s in singles) and order == 2 ** p:
        fam = family_from_generators([found[s] for s in singles], rho)
        fam.group = list(found.values())
        fam.method = "square" if use_square else "general"
        return fam
    return DeckFamily(p, N, be, [found.get(s) for s in singles], rho, conditionD=False,
                      group_order=order, group=list(found.values()), obstructions=obstructions,
                      method="square" if use_square else "general")


# ---------------------------------------------------------------------------
# verification
# ---------------------------------------------------------------------------


@dataclass
class FamilyReport:
    involution: bool
    commute: bool
    E_invariant: bool
    rho_intertwine: bool
    reversible: bool
    abelian: bool
    residuals: dict
    max_residual: float  # over the structural checks; the abelian defect is in residuals

    @property
    def passes(self) -> bool:
        """All structural checks (abelian is reported separately)."""
        return self.involution and self.commute and self.E_invariant and self.rho_intertwine and self.reversible

    def to_json(self) -> dict:
        return {"involution": self.involution, "commute": self.commute, "E_invariant": self.E_invariant,
                "rho_intertwine": self.rho_intertwine, "reversible": self.reversible,
                "abelian": self.abelian, "passes": self.passes, "residuals": self.residuals,
                "max_residual": self.max_residual}


def verify_family(fam: DeckFamily, spec: Optional[ManifoldSpec] = None,
                  tol: Optional[float] = None) -> FamilyReport:
    """Check the family identities mod degree ``N+1``; residual is the max coefficient defect."""
    if not fam.conditionD:
        raise DeckError("family is incomplete (condition D failed)")
    be = fam.backend
    tol = (0.0 if be.exact else be.tol) if tol is None else tol
    n, N = 2 * fam.p, fam.N
    idm = JetMap.identity(n, N, be)
    res: dict = {}

    def worst(key, vals):
        res[key] = max(vals, default=0.0)
        return res[key] <= tol

    inv = worst("involution", [jet_compose(g, g).residual(idm) for g in fam.generators]
                + [jet_compose(g, g).residual(idm) for g in fam.tau2])
    com = worst("commute", [jet_compose(a, b).residual(jet_compose(b, a))
                            for a, b in itertools.combinations(fam.generators, 2)])
    if spec is not None:
        Em = JetMap(list(spec.E))
        vals = []
        for g in fam.generators:
            gp = g.truncate(N + 1)
            vals.append(jet_compose(Em, gp).residual(Em))
        einv = worst("E_invariant", vals)
    else:
        einv = True
        res["E_invariant"] = None
    rho = fam.rho
    rr = rho.compose(rho)
    rho_ok = rr.residual(idm) <= tol
    vals = [rho.conjugate_map(g).residual(t) for g, t in zip(fam.generators, fam.tau2)]
    vals.append(rr.residual(idm))
    rint = worst("rho_intertwine", vals) and rho_ok
    rev = worst("reversible", [jet_compose(fam.sigma_total, rho.conjugate_map(fam.sigma_total)).residual(idm)]
                + [jet_compose(fam.sigma[fam.partner[j]], rho.conjugate_map(s)).residual(idm)
                   for j, s in enumerate(fam.sigma)])
    ab = worst("abelian", [jet_compose(a, b).residual(jet_compose(b, a))
                           for a, b in itertools.combinations(fam.sigma, 2)])
    mx = max(v for k, v in res.items() if v is not None and k != "abelian")
    return FamilyReport(inv, com, einv, rint, rev, ab, res, mx)


# ---------------------------------------------------------------------------
# realization
# ---------------------------------------------------------------------------


def _common_eigvecs(mats: list, signs: Sequence[int], be: Backend) -> list:
    """Row vectors ``r`` with ``r T_k = signs[k] r`` for every ``k``."""
    n = len(mats[0])
    rows = []
    for T, s in zip(mats, signs):
        Tt = transpose(T)
        for i in range(n):
            rows.append([Tt[i][c] - (be.coerce(s) if i == c else be.zero()) for c in range(n)])
    return kernel(rows, be)


def realize_manifold(generators: Sequence[JetMap], rho: AntiholomorphicJetMap,
                     N: Optional[int] = None) -> ManifoldSpec:
    """Manifold whose deck family is the given commuting involutions with ``rho``.

    The group generated by the ``tau_{1j}`` is linearized by averaging;
    invariant linear coordinates ``A`` and skew-invariant ``B_j`` give the
    embedding ``psi = (A, conj(A o rho))`` and the manifold
    ``z'' = B^2 o psi^{-1}``.
    """
    gens = list(generators)
    p = len(gens)
    be = gens[0].backend
    N = gens[0].N if N is None else N
    n = 2 * p
    group = []
    for mask in itertools.product((0, 1), repeat=p):
        g = JetMap.identity(n, N, be)
        for j, m in enumerate(mask):
            if m:
                g = jet_compose(g, gens[j])
        group.append(g)
    try:
        phi = reynolds_linearize(group)
    except Exception as exc:
        raise RealizationError(f"generators do not form a group of commuting involutions: {exc}") from exc
    Ls = [g.linear_part for g in gens]
    inv = _common_eigvecs(Ls, [1] * p, be)
    if len(inv) != p:
        raise RealizationError(f"invariant linear functions have dimension {len(inv)}, expected {p}")
    skew = []
    for j in range(p):
        vs = _common_eigvecs(Ls, [-1 if k == j else 1 for k in range(p)], be)
        if len(vs) != 1:
            raise RealizationError(f"fixed hypersurfaces are not transversal at generator {j + 1}")
        skew.append(vs[0])

    def apply(row, m: JetMap) -> TruncatedSeries:
        acc = TruncatedSeries.zero(n, N, be)
        for c, x in zip(m.components, row):
            if x:
                acc = acc + c.scale(x)
        return acc

    A = [apply(r, phi) for r in inv]
    B = [apply(r, phi) for r in skew]
    Amap = JetMap(A)
    hb = rho.holo.conj()
    Abar_rho = jet_compose(Amap.conj(), hb)
    psi = JetMap(list(Amap.components) + list(Abar_rho.components))
    try:
        psi_inv = jet_invert(psi)
    except Exception as exc:
        raise RealizationError("linear invariants of tau_1 and tau_2 intersect nontrivially") from exc
    Bz = jet_compose(JetMap(B), psi_inv)
    E = tuple((b.truncate(N + 1) * b.truncate(N + 1)) for b in Bz.components)
    return ManifoldSpec(p, N, E, None, None, be, "realized")
