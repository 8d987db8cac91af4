"""Normal forms of commuting families and of deck involution families.

Maps act on ``C^n`` with ``n = 2p``.  Most routines work in *standard
coordinates* ``(xi_1..xi_p, eta_1..eta_p)`` in which the linear parts are

* ``S_j``: ``xi_j -> mu_j xi_j``, ``eta_j -> eta_j / mu_j``;
* ``T_1j``: ``xi_j -> lam_j eta_j``, ``eta_j -> xi_j / lam_j``;
* ``rho``: ``x -> R(conj x)`` with ``R`` a coordinate permutation (swap
  ``xi_e <-> eta_e``; fix ``h``; swap ``s <-> s'`` in both blocks).

A homogeneous map ``(U, V)`` stores ``U_j`` in component ``j`` and ``V_j``
in component ``p + j``; ``U_{j,PQ}`` is the coefficient of
``xi^P eta^Q`` in ``U_j`` and ``V_{j,QP}`` the coefficient of
``xi^Q eta^P`` in ``V_j``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Callable, Optional, Sequence

import numpy as np

from .deck import DeckFamily, ObstructedAtDegree, build_deck_family, realize_manifold
from .linalg import SingularMatrix, kernel, mat_inv, mat_mul, rref
from .manifold import Kind, ManifoldSpec, SpectrumReport, build_product_quadric, classify
from .resonance import IndexAlgebra, UndecidableResonance
from .scalars import EXACT, FLOAT, Backend
from .series import (AntiholomorphicJetMap, JetMap, TruncatedSeries, compose_any, compose_series,
                     degree, jet_compose, jet_compose_many, jet_invert, monomials, pack, permute_conj, unit, unpack)

__all__ = [
    "NormalFormError",
    "NonCommutingFamily",
    "NoSolvableEquation",
    "BranchInconsistency",
    "ObstructionAtDegree",
    "LinearFrameError",
    "NoConvergence",
    "HullError",
    "NormalFormResult",
    "StandardFamily",
    "RealizedNormalForm",
    "HullPolydisc",
    "RigidityReport",
    "decompose_wrt_D",
    "normalize_abelian",
    "standard_frame",
    "to_standard",
    "mw_normalform",
    "realize_normal_form",
    "solve_zeta",
    "hull_polydiscs",
    "default_hull_epsilon",
    "decompose_wrt_family",
    "centralizer_projection",
    "linearize_tau_pair",
    "linearize_tau_family",
    "rigidity_pipeline",
]


class NormalFormError(ArithmeticError):
    """Base class for normal-form failures."""


class NonCommutingFamily(NormalFormError):
    """The input maps do not commute to working order."""


class NoSolvableEquation(NormalFormError):
    """No map of the family gives a nonzero divisor for a nonresonant index."""

    def __init__(self, j: int, Q: Sequence[int]):
        self.j, self.Q = j, tuple(Q)
        super().__init__(f"no solvable homological equation for component {j + 1}, exponent {self.Q}")


class BranchInconsistency(NormalFormError):
    """Root choices cannot be made compatible with the anti-holomorphic involution."""


class ObstructionAtDegree(ObstructedAtDegree):
    """A homological system is inconsistent; the manifold is formally inequivalent.

    Attributes
    ----------
    degree : int
    residual : float
        Norm of the part of the right-hand side outside the image.
    stage : str
        Pipeline stage that failed.
    system : dict
        The inconsistent system: unknown labels, equation labels, offending rows.
    """

    def __init__(self, degree: int, residual: float, stage: str = "", system: Optional[dict] = None):
        super().__init__(degree, residual)
        self.stage = stage
        self.system = system or {}
        self.args = (f"{stage or 'linearization'} obstructed at degree {degree} (residual {residual:.3g})",)


class LinearFrameError(NormalFormError):
    """Linear parts cannot be brought to the standard form."""


class NoConvergence(NormalFormError):
    def __init__(self, iterations: int, what: str = "iteration"):
        self.iterations = iterations
        super().__init__(f"{what} did not converge after {iterations} iterations")


class HullError(NormalFormError):
    """Input outside the domain where the polydisc description applies."""


# ---------------------------------------------------------------------------
# small helpers
# ---------------------------------------------------------------------------


def _relift(s: TruncatedSeries, N: int) -> TruncatedSeries:
    return TruncatedSeries(s.n, N, {k: v for k, v in s.terms.items() if degree(k) <= N}, s.backend)


def _relift_map(F: JetMap, N: int) -> JetMap:
    return JetMap([_relift(c, N) for c in F.components], allow_constant=True)


def _is_tangent_to_identity(F: JetMap) -> bool:
    be = F.backend
    L = F.linear_part
    n = F.n_in
    return F.n_out == n and all(
        be.is_zero_tol(L[i][k] - (be.one() if i == k else be.zero())) for i in range(n) for k in range(n))


def _close(be: Backend, a, b, tol: float = 1e-10) -> bool:
    return be.is_zero(a - b) if be.exact else abs(complex(a) - complex(b)) <= tol


def _map_residual(A: JetMap, B: JetMap) -> float:
    """Max coefficient of ``A - B``; exact zero is reported as ``0.0``."""
    return max((c.max_abs() for c in (A - B).components), default=0.0)


def _diag(M) -> list:
    return [M[i][i] for i in range(len(M))]


def _power(be: Backend, vals: Sequence[Any], Q: Sequence[int]):
    out = be.one()
    for v, q in zip(vals, Q):
        if q:
            out = out * v ** q
    return out


class _Diagonal:
    """Resonance decisions ``mu_i^Q = mu_{ij}`` for diagonal linear parts."""

    def __init__(self, diags: Sequence[Sequence[Any]], be: Backend, eps_res: float = 1e-9):
        self.d = [list(x) for x in diags]
        self.be = be
        self.eps = eps_res
        self._pw: dict = {}
        self._res: dict = {}
        self.decisions = {"exact": 0, "tolerance": 0}

    def power(self, i: int, Q: tuple):
        key = (i, Q)
        v = self._pw.get(key)
        if v is None:
            v = _power(self.be, self.d[i], Q)
            self._pw[key] = v
        return v

    def divisor(self, i: int, j: int, Q: tuple):
        return self.power(i, Q) - self.d[i][j]

    def _zero(self, x) -> bool:
        if self.be.exact:
            self.decisions["exact"] += 1
            return self.be.is_zero(x)
        self.decisions["tolerance"] += 1
        a = abs(complex(x))
        if a <= self.eps:
            return True
        if a < 1e3 * self.eps:
            raise UndecidableResonance(f"divisor {a:.3g} inside the undecidable band")
        return False

    def resonant(self, j: int, Q: tuple) -> bool:
        key = (j, Q)
        r = self._res.get(key)
        if r is None:
            r = all(self._zero(self.divisor(i, j, Q)) for i in range(len(self.d)))
            self._res[key] = r
        return r

    def best(self, j: int, Q: tuple):
        """Index of the map with the largest divisor and that divisor."""
        vals = [self.divisor(i, j, Q) for i in range(len(self.d))]
        i = max(range(len(vals)), key=lambda t: abs(complex(vals[t])))
        return i, vals[i]


def _diagonals(D) -> list:
    out = []
    for d in D:
        if d and isinstance(d[0], (list, tuple)):
            n = len(d)
            for i in range(n):
                for k in range(n):
                    if i != k and d[i][k]:
                        if not isinstance(d[i][k], complex) or abs(d[i][k]) > 1e-12:
                            raise ValueError("linear part is not diagonal")
            out.append(_diag(d))
        else:
            out.append(list(d))
    return out


def _split_by_projection(F: JetMap, project_G: Callable[[JetMap], JetMap]):
    """Degree-wise ``F = H o G^{-1}`` with ``G`` in the image of ``project_G``."""
    if not _is_tangent_to_identity(F):
        raise ValueError("F must be tangent to the identity")
    n, N, be = F.n_in, F.N, F.backend
    G = JetMap.identity(n, N, be)
    H = JetMap.identity(n, N, be)
    for k in range(2, N + 1):
        r = _relift_map(jet_compose(F, G, order=k).homogeneous(k), N)
        g = _relift_map(project_G(r), N)
        G = G - g
        H = H + (r - g)
    return H, G


# ---------------------------------------------------------------------------
# decomposition with respect to a diagonal family
# ---------------------------------------------------------------------------


def decompose_wrt_D(F: JetMap, D, eps_res: float = 1e-9):
    """Split ``F = H o G^{-1}`` with ``G`` commuting with ``D`` and ``H`` free of resonant terms.

    Parameters
    ----------
    F : JetMap
        Tangent to the identity.
    D : list
        Diagonal linear maps, as matrices or as lists of diagonal entries.

    Returns
    -------
    (H, G) : tuple of JetMap
        ``H`` has zero coefficient at every resonant ``(j, Q)``
        (``mu_i^Q = mu_{ij}`` for all ``i``); ``G`` has only resonant terms.

    Examples
    --------
    >>> xi, eta = TruncatedSeries.var(0, 2, 3), TruncatedSeries.var(1, 2, 3)
    >>> H, G = decompose_wrt_D(JetMap([xi + xi * xi, eta]), [[4, Fraction(1, 4)]])
    >>> H == JetMap([xi + xi * xi, eta]) and G == JetMap.identity(2, 3)
    True
    """
    diag = _Diagonal(_diagonals(D), F.backend, eps_res)
    n = F.n_in

    def project(r: JetMap) -> JetMap:
        comps = []
        for j, c in enumerate(r.components):
            keep = {k: v for k, v in c.terms.items() if diag.resonant(j, unpack(k, n))}
            comps.append(TruncatedSeries(n, c.N, keep, c.backend, _trusted=True))
        return JetMap(comps)

    return _split_by_projection(F, project)


# ---------------------------------------------------------------------------
# abelian normal form
# ---------------------------------------------------------------------------


@dataclass
class NormalFormResult:
    """Conjugator and normalized family.

    Attributes
    ----------
    conjugator : JetMap
        ``Psi`` with ``F_i o Psi = Psi o Fhat_i``; for deck families it maps
        normal-form coordinates to the original coordinates.
    family : list of JetMap
        Normalized maps ``Fhat_i`` (for deck families: the ``sigma_j``).
    multipliers : list
        ``multipliers[i][j]`` is the series ``muhat_{ij}`` with
        ``x_j' = muhat_{ij}(x) x_j`` in ``Fhat_i``.
    Lambda1, Lambda2, M : list of TruncatedSeries or None
        Series in ``zeta = (xi_1 eta_1, ..)`` for deck families.
    residuals : dict
        Named residual norms (``0.0`` means exact).
    """

    conjugator: JetMap
    family: list
    multipliers: list = field(default_factory=list)
    Lambda1: Optional[list] = None
    Lambda2: Optional[list] = None
    M: Optional[list] = None
    lam: Optional[list] = None
    kinds: Optional[list] = None
    partner: Optional[list] = None
    tau1: Optional[list] = None
    tau2: Optional[list] = None
    residuals: dict = field(default_factory=dict)
    classes: Optional[list] = None
    warnings: list = field(default_factory=list)
    N: int = 0
    backend: Backend = EXACT

    @property
    def p(self) -> int:
        return len(self.Lambda1) if self.Lambda1 is not None else self.conjugator.n_in // 2

    def to_json(self) -> dict:
        out = {"truncation": self.N, "residuals": dict(self.residuals), "warnings": list(self.warnings),
               "conjugator": self.conjugator.to_json(), "family": [f.to_json() for f in self.family]}
        if self.Lambda1 is not None:
            out["Lambda1"] = [s.to_json() for s in self.Lambda1]
            out["Lambda2"] = [s.to_json() for s in self.Lambda2]
            out["M"] = [s.to_json() for s in self.M]
            out["kinds"] = [k.value for k in self.kinds]
            out["lambda"] = [self.backend.to_json(x) for x in self.lam]
        if self.classes is not None:
            out["classes"] = self.classes
        return out


def _commutator_residual(F: JetMap, G: JetMap) -> float:
    return _map_residual(jet_compose(F, G), jet_compose(G, F))


def _invariant_multipliers(Fi: JetMap, diag: _Diagonal, i: int, n: int):
    """Split ``Fhat_i`` into ``x_j muhat_{ij}(x)``; return multipliers and the defect."""
    be = Fi.backend
    mults = []
    defect = 0.0
    for j, c in enumerate(Fi.components):
        terms = {}
        for ex, v in c.items():
            if ex[j] == 0:
                defect = max(defect, abs(complex(v)))
                continue
            terms[pack([e - (1 if t == j else 0) for t, e in enumerate(ex)])] = v
        mults.append(TruncatedSeries(n, Fi.N - 1 if Fi.N > 0 else 0, terms, be))
    return mults, defect


def _multiplier_invariance(mults: list, diag: _Diagonal, n: int) -> float:
    """Max coefficient of a multiplier on a monomial not fixed by every ``D_m``."""
    bad = 0.0
    for m in mults:
        for ex, v in m.items():
            if not all(diag._zero(diag.power(i, tuple(ex)) - diag.be.one()) for i in range(len(diag.d))):
                bad = max(bad, abs(complex(v)))
    return bad


def _truncated_classes(mults_by_map: list, diag: _Diagonal, n: int, N: int) -> list:
    """Group nonresonant ``(j, Q)`` by the truncated series ``mu_{ij} - muhat_i^Q``."""
    be = diag.be
    groups: dict = {}
    for d in range(2, N + 1):
        for Q in monomials(n, d):
            for j in range(n):
                if diag.resonant(j, Q):
                    continue
                key = []
                for i, mults in enumerate(mults_by_map):
                    acc = TruncatedSeries.const(1, n, max(N - d, 0), be)
                    for k, q in enumerate(Q):
                        if q:
                            acc = acc * (_relift(mults[k], max(N - d, 0)) ** q)
                    s = (acc - diag.d[i][j]).scale(-1)
                    key.append(tuple(sorted((k2, str(v)) for k2, v in s.terms.items())))
                groups.setdefault(tuple(key), []).append([j + 1, list(Q)])
    return list(groups.values())


def normalize_abelian(F: Sequence[JetMap], *, eps_res: float = 1e-9, check_commute: bool = True,
                      verify: bool = True, classes: bool = False) -> NormalFormResult:
    """Normalize commuting maps with diagonal linear parts.

    Degree by degree, a nonresonant coefficient ``(j, Q)`` of ``Psi`` solves
    one homological equation, the one whose divisor ``mu_i^Q - mu_{ij}`` is
    largest.  The result has ``Psi`` free of resonant terms and every
    ``Fhat_i`` consisting of resonant terms only, ``x_j' = muhat_{ij}(x) x_j``.

    Parameters
    ----------
    F : list of JetMap
        Pairwise commuting to working order, diagonal linear parts.
    check_commute, verify : bool
        Check pairwise commutation up front and the conjugacy
        ``F_i o Psi = Psi o Fhat_i`` at the end.
    classes : bool
        Also report the equivalence classes of nonresonant indices computed
        at truncation order (costly for ``n >= 4``).

    Examples
    --------
    >>> x, y = TruncatedSeries.var(0, 2, 3), TruncatedSeries.var(1, 2, 3)
    >>> nf = normalize_abelian([JetMap([x.scale(4) + x * x, y.scale(Fraction(1, 4))])])
    >>> nf.family[0] == JetMap([x.scale(4), y.scale(Fraction(1, 4))])
    True
    """
    F = list(F)
    if not F:
        raise ValueError("empty family")
    n, N, be = F[0].n_in, F[0].N, F[0].backend
    diag = _Diagonal(_diagonals([f.linear_part for f in F]), be, eps_res)
    residuals: dict = {}
    if check_commute:
        worst = 0.0
        for a in range(len(F)):
            for b in range(a + 1, len(F)):
                r = _commutator_residual(F[a], F[b])
                worst = max(worst, r)
                if (be.exact and r != 0.0) or (not be.exact and r > 1e-8):
                    raise NonCommutingFamily(f"maps {a + 1} and {b + 1} do not commute (residual {r:.3g})")
        residuals["commutator"] = worst
    Psi = JetMap.identity(n, N, be)
    fam = [f.degree_range(1, 1) for f in F]
    cross = 0.0
    for k in range(2, N + 1):
        # degree k of F_i o Psi = Psi o Fhat_i reads Fhat_{i,k} = r_i + D_i phi - phi o D_i
        r = [(fp - jet_compose(Psi, fh, order=k)).homogeneous(k)
             for fp, fh in zip(jet_compose_many(F, Psi, order=k), fam)]
        phi_comps = []
        res_comps = [[dict() for _ in range(n)] for _ in F]
        for j in range(n):
            terms = {}
            keys = set()
            for ri in r:
                keys.update(ri.components[j].terms)
            for key in keys:
                Q = unpack(key, n)
                if diag.resonant(j, Q):
                    for i, ri in enumerate(r):
                        c = ri.components[j].terms.get(key)
                        if c is not None:
                            res_comps[i][j][key] = c
                    continue
                i, dv = diag.best(j, Q)
                if (be.exact and be.is_zero(dv)) or (not be.exact and abs(complex(dv)) <= eps_res):
                    raise NoSolvableEquation(j, Q)
                c = r[i].components[j].terms.get(key)
                if c is None:
                    continue
                phi = c / dv
                terms[key] = phi
                for i2, ri in enumerate(r):
                    if i2 != i:
                        left = ri.components[j].terms.get(key, be.zero()) - diag.divisor(i2, j, Q) * phi
                        cross = max(cross, abs(complex(left)))
            phi_comps.append(TruncatedSeries(n, N, terms, be))
        Psi = Psi + JetMap(phi_comps)
        fam = [fh + JetMap([TruncatedSeries(n, N, d, be) for d in rc]) for fh, rc in zip(fam, res_comps)]
    if (be.exact and cross != 0.0) or (not be.exact and cross > 1e-8):
        raise NonCommutingFamily(f"homological equations disagree across the family (residual {cross:.3g})")
    residuals["cross_equation"] = cross
    mults = []
    defect = 0.0
    for i, f in enumerate(fam):
        m, d = _invariant_multipliers(f, diag, i, n)
        mults.append(m)
        defect = max(defect, d)
    residuals["product_form"] = defect
    residuals["multiplier_invariance"] = max((_multiplier_invariance(m, diag, n) for m in mults), default=0.0)
    if verify:
        residuals["conjugacy"] = max(_map_residual(jet_compose(f, Psi), jet_compose(Psi, g))
                                     for f, g in zip(F, fam))
    res_terms = 0.0
    for j in range(n):
        for ex, v in Psi.components[j].items():
            if sum(ex) >= 2 and diag.resonant(j, tuple(ex)):
                res_terms = max(res_terms, abs(complex(v)))
    residuals["psi_resonant"] = res_terms
    out = NormalFormResult(Psi, fam, mults, residuals=residuals, N=N, backend=be)
    if diag.decisions["tolerance"]:
        out.warnings.append(f"{diag.decisions['tolerance']} resonance decisions used the tolerance band")
    if classes:
        out.classes = _truncated_classes(mults, diag, n, N)
    return out


# ---------------------------------------------------------------------------
# standard coordinates for a deck family
# ---------------------------------------------------------------------------


def _rho_perm(alg: IndexAlgebra) -> list:
    p = alg.p
    perm = list(range(2 * p))
    for e in alg.e:
        perm[e], perm[p + e] = p + e, e
    for s, sp in zip(alg.s, alg.sp):
        perm[s], perm[sp] = sp, s
        perm[p + s], perm[p + sp] = p + sp, p + s
    return perm


def _perm_matrix(perm: Sequence[int], be: Backend) -> list:
    n = len(perm)
    return [[be.one() if c == perm[r] else be.zero() for c in range(n)] for r in range(n)]


def _std_T1(lam: Sequence[Any], j: Optional[int], be: Backend) -> list:
    """Matrix of ``T_1j`` (or of the product over all ``j`` when ``j is None``)."""
    p = len(lam)
    M = [[be.zero()] * (2 * p) for _ in range(2 * p)]
    for k in range(p):
        if j is None or k == j:
            M[k][p + k] = be.coerce(lam[k])
            M[p + k][k] = be.one() / be.coerce(lam[k])
        else:
            M[k][k] = be.one()
            M[p + k][p + k] = be.one()
    return M


def _std_S(mu: Sequence[Any], j: int, be: Backend) -> list:
    p = len(mu)
    M = [[be.zero()] * (2 * p) for _ in range(2 * p)]
    for k in range(2 * p):
        M[k][k] = be.one()
    M[j][j] = be.coerce(mu[j])
    M[p + j][p + j] = be.one() / be.coerce(mu[j])
    return M


def family_report(fam: DeckFamily) -> SpectrumReport:
    """Spectrum of the quadric realizing the linear parts of a deck family."""
    lin = [JetMap.linear(g.linear_part, 2, fam.backend) for g in fam.generators]
    rho = AntiholomorphicJetMap(JetMap.linear(fam.rho.holo.linear_part, 2, fam.backend))
    return classify(realize_manifold(lin, rho, 2))


@dataclass
class StandardFamily:
    """A deck family written in standard coordinates.

    ``frame`` maps standard coordinates to the original ones; ``tau2[j]`` is
    the second involution paired with slot ``j``.
    """

    p: int
    N: int
    backend: Backend
    alg: IndexAlgebra
    lam: list
    mu: list
    tau1: list
    tau2: list
    sigma: list
    rho: AntiholomorphicJetMap
    frame: JetMap
    frame_inv: JetMap
    report: Optional[SpectrumReport] = None
    partner: list = field(default_factory=list)

    def __post_init__(self):
        if not self.partner:
            self.partner = list(self.alg.partner)

    @property
    def n(self) -> int:
        return 2 * self.p

    def rho_perm(self) -> list:
        return _rho_perm(self.alg)

    def T1(self, j: Optional[int] = None) -> JetMap:
        return JetMap.linear(_std_T1(self.lam, j, self.backend), self.N, self.backend)

    def T2(self, j: Optional[int] = None) -> JetMap:
        inv = [self.backend.one() / self.backend.coerce(x) for x in self.lam]
        return JetMap.linear(_std_T1(inv, j, self.backend), self.N, self.backend)

    def S(self, j: int) -> JetMap:
        return JetMap.linear(_std_S(self.mu, j, self.backend), self.N, self.backend)

    def rho_std(self) -> AntiholomorphicJetMap:
        return AntiholomorphicJetMap(JetMap.linear(_perm_matrix(self.rho_perm(), self.backend), self.N,
                                                   self.backend))

    def conjugate(self, Psi: JetMap, sigma: Optional[list] = None, with_sigma: bool = True,
                  tau1: Optional[list] = None) -> "StandardFamily":
        """Family ``Psi^{-1} o f o Psi``; the frame absorbs ``Psi``.

        When ``rho`` is a coordinate permutation commuting with ``Psi`` the
        second involutions are obtained from the first by conjugation with
        ``rho`` instead of composition.  ``sigma`` may be supplied when it
        is already known (e.g. from ``normalize_abelian``), and ``tau1`` when
        ``Psi`` was verified to conjugate the first involutions to it.
        """
        Pinv = jet_invert(Psi)

        def conj_all(fs):
            return [jet_compose(Pinv, h) for h in jet_compose_many(fs, Psi)]

        tau1 = conj_all(self.tau1) if tau1 is None else list(tau1)
        perm = self.rho.permutation()
        if perm is not None and permute_conj(Psi, perm) == Psi:
            rho = self.rho
            tau2 = [permute_conj(tau1[self.partner[j]], perm) for j in range(self.p)]
        else:
            rho = compose_any(Pinv, self.rho, Psi)
            tau2 = conj_all(self.tau2)
        if sigma is None:
            sigma = [jet_compose(tau1[j], tau2[j]) for j in range(self.p)] if with_sigma else []
        return StandardFamily(self.p, self.N, self.backend, self.alg, self.lam, self.mu, tau1, tau2, list(sigma),
                              rho, jet_compose(self.frame, Psi), jet_compose(Pinv, self.frame_inv), self.report,
                              self.partner)

    def tau1_total(self) -> JetMap:
        t = self.tau1[0]
        for f in self.tau1[1:]:
            t = jet_compose(t, f)
        return t

    def tau2_total(self) -> JetMap:
        t = self.tau2[0]
        for f in self.tau2[1:]:
            t = jet_compose(t, f)
        return t


def _first_ratio(a: Sequence[Any], b: Sequence[Any], be: Backend):
    """``alpha`` with ``a = alpha b`` (checked)."""
    idx = max(range(len(b)), key=lambda i: abs(complex(b[i])))
    if abs(complex(b[idx])) == 0:
        raise LinearFrameError("zero vector in frame construction")
    alpha = a[idx] / b[idx]
    for x, y in zip(a, b):
        if not _close(be, x, alpha * y, 1e-9):
            raise LinearFrameError("conjugated eigenvector is not proportional to its partner")
    return alpha


def standard_frame(fam: DeckFamily, report: Optional[SpectrumReport] = None):
    """Linear change of coordinates bringing a deck family to standard form.

    Returns
    -------
    (L, lam, mu, alg) :
        ``L`` is the matrix whose columns are ``(v_1..v_p, u_1..u_p)``;
        ``lam, mu`` the multipliers read off in the new coordinates.
    """
    be = fam.backend
    p = fam.p
    n = 2 * p
    rep = report if report is not None else family_report(fam)
    if any(k is Kind.INFINITE for k in rep.kinds):
        raise LinearFrameError("infinite-type slots have no standard form")
    alg = IndexAlgebra.from_report(rep)
    Ls = [s.linear_part for s in fam.sigma]
    Lt = [g.linear_part for g in fam.generators]
    R = fam.rho.holo.linear_part
    one = be.one()
    mus = [be.coerce(m) for m in rep.mu]
    lams = [be.coerce(x) for x in rep.lam]
    v: list = [None] * p
    u: list = [None] * p

    def eig(j):
        rows = []
        for k in range(p):
            target = mus[j] if k == j else one
            for r in range(n):
                rows.append([Ls[k][r][c] - (target if r == c else be.zero()) for c in range(n)])
        ker = kernel(rows, be, None if be.exact else 1e-8)
        if len(ker) != 1:
            raise LinearFrameError(f"slot {j + 1}: joint eigenspace has dimension {len(ker)}")
        return ker[0]

    for j in range(p):
        kind = alg.kinds[j]
        if j in alg.sp:
            continue
        vj = eig(j)
        Tv = [sum((Lt[j][r][c] * vj[c] for c in range(n)), be.zero()) for r in range(n)]
        uj = [lams[j] * x for x in Tv]
        if kind in (Kind.ELLIPTIC, Kind.HYPERBOLIC):
            Rv = [sum((R[r][c] * be.conj(vj[c]) for c in range(n)), be.zero()) for r in range(n)]
            alpha = _first_ratio(Rv, uj if kind is Kind.ELLIPTIC else vj, be)
            if _close(be, alpha, -one, 1e-12):
                c = be.coerce_pair(0, 1)
            else:
                c = one + alpha
            vj = [c * x for x in vj]
            uj = [c * x for x in uj]
        v[j], u[j] = vj, uj
    for s, sp in zip(alg.s, alg.sp):
        v[sp] = [sum((R[r][c] * be.conj(v[s][c]) for c in range(n)), be.zero()) for r in range(n)]
        u[sp] = [sum((R[r][c] * be.conj(u[s][c]) for c in range(n)), be.zero()) for r in range(n)]
    L = [[(v[c][r] if c < p else u[c - p][r]) for c in range(n)] for r in range(n)]
    try:
        Linv = mat_inv(L, be)
    except SingularMatrix as exc:
        raise LinearFrameError("frame vectors are dependent") from exc
    lam_read, mu_read = [], []
    for j in range(p):
        T = mat_mul(Linv, mat_mul(Lt[j], L, be), be)
        lam_read.append(T[j][p + j])
        S = mat_mul(Linv, mat_mul(Ls[j], L, be), be)
        mu_read.append(S[j][j])
    for j in range(p):
        T = mat_mul(Linv, mat_mul(Lt[j], L, be), be)
        S = mat_mul(Linv, mat_mul(Ls[j], L, be), be)
        if not _mat_close(T, _std_T1(lam_read, j, be), be) or not _mat_close(S, _std_S(mu_read, j, be), be):
            raise LinearFrameError(f"slot {j + 1}: linear parts are not in standard form")
        if not _close(be, lam_read[j] * lam_read[j], mu_read[j], 1e-9):
            raise LinearFrameError(f"slot {j + 1}: multiplier is not the square of lambda")
    Rs = mat_mul(Linv, mat_mul(R, [[be.conj(x) for x in r] for r in L], be), be)
    if not _mat_close(Rs, _perm_matrix(_rho_perm(alg), be), be):
        raise LinearFrameError("anti-holomorphic involution is not standard in the frame")
    alg = IndexAlgebra(alg.kinds, mu_read, lam_read, alg.rotation, alg.eps_res)
    return L, lam_read, mu_read, alg


def _mat_close(A, B, be: Backend) -> bool:
    return all(_close(be, a, b, 1e-9) for r, s in zip(A, B) for a, b in zip(r, s))


def to_standard(fam: DeckFamily, report: Optional[SpectrumReport] = None) -> StandardFamily:
    """Conjugate a deck family by its linear standard frame."""
    if not fam.conditionD:
        raise NormalFormError("deck family is incomplete (condition D fails)")
    be, N = fam.backend, fam.N
    L, lam, mu, alg = standard_frame(fam, report)
    Lm = JetMap.linear(L, N, be)
    Linv = jet_invert(Lm)

    def c(f):
        return jet_compose(Linv, jet_compose(f, Lm))

    tau2 = [fam.tau2[fam.partner[j]] for j in range(fam.p)]
    return StandardFamily(fam.p, N, be, alg, lam, mu, [c(g) for g in fam.generators], [c(t) for t in tau2],
                          [c(s) for s in fam.sigma], compose_any(Linv, fam.rho, Lm), Lm, Linv, report,
                          list(alg.partner))


# ---------------------------------------------------------------------------
# normal form of an abelian deck family
# ---------------------------------------------------------------------------


def _zeta_key(P: Sequence[int]) -> int:
    return pack(P)


def _extract_Lambda(tau: JetMap, j: int, p: int, Nz: int):
    """Read ``xi_j' = Lambda(zeta) eta_j``, ``eta_j' = Lambda^-(zeta) xi_j`` from ``tau``.

    Returns ``(Lambda, Lambda_minus, defect)``; ``defect`` measures every
    coefficient outside that shape (other components must be the identity).
    """
    be = tau.backend
    n = 2 * p
    lp: dict = {}
    lm: dict = {}
    defect = 0.0
    for comp in range(n):
        for ex, v in tau.components[comp].items():
            P, Q = ex[:p], ex[p:]
            if comp == j and Q[j] == P[j] + 1 and all(Q[i] == P[i] for i in range(p) if i != j):
                if sum(P) <= Nz:
                    lp[_zeta_key(P)] = v
                continue
            if comp == p + j and P[j] == Q[j] + 1 and all(Q[i] == P[i] for i in range(p) if i != j):
                if sum(Q) <= Nz:
                    lm[_zeta_key(Q)] = v
                continue
            if comp != j and comp != p + j and sum(ex) == 1 and ex[comp] == 1 and _close(be, v, be.one()):
                continue
            defect = max(defect, abs(complex(v)))
    return TruncatedSeries(p, Nz, lp, be), TruncatedSeries(p, Nz, lm, be), defect


def _rho_z(s: TruncatedSeries, alg: IndexAlgebra) -> TruncatedSeries:
    """``conj(s o rho_z)``: conjugate coefficients, swap ``zeta_s <-> zeta_s'``."""
    perm = list(range(alg.p))
    for a, b in zip(alg.s, alg.sp):
        perm[a], perm[b] = b, a
    terms = {}
    for ex, v in s.items():
        new = [0] * alg.p
        for i, e in enumerate(ex):
            new[perm[i]] += e
        terms[pack(new)] = s.backend.conj(v)
    return TruncatedSeries(s.n, s.N, terms, s.backend)


def _series_residual(a: TruncatedSeries, b: TruncatedSeries) -> float:
    return (a - b).max_abs()


def reality_residuals(Lambda1: Sequence[TruncatedSeries], alg: IndexAlgebra) -> dict:
    """Residuals of the reality relations satisfied by the multipliers ``Lambda_{1j}``."""
    out = {}
    one = None
    for j, L in enumerate(Lambda1):
        if one is None:
            one = TruncatedSeries.const(1, L.n, L.N, L.backend)
        kind = alg.kinds[j]
        if kind is Kind.ELLIPTIC:
            out[f"e{j + 1}"] = _series_residual(L, _rho_z(L, alg))
        elif kind is Kind.HYPERBOLIC:
            out[f"h{j + 1}"] = _series_residual(L * _rho_z(L, alg), one)
        else:
            k = alg.partner[j]
            out[f"s{j + 1}"] = _series_residual(L * _rho_z(Lambda1[k], alg), one)
    return out


def _phi2(a: TruncatedSeries, p: int, N: int, j: int, be: Backend, acc: list) -> None:
    """Accumulate ``xi_j -> a(zeta) xi_j``, ``eta_j -> eta_j / a(zeta)`` into ``acc``."""
    n = 2 * p
    zeta = JetMap([TruncatedSeries(n, N, {unit(i) + unit(p + i): be.one()}, be) for i in range(p)])
    a_x = compose_series(_relift(a, N), zeta, order=N)
    ainv_x = compose_series(_relift(a.inverse(), N), zeta, order=N)
    acc[j] = acc[j] * a_x
    acc[p + j] = acc[p + j] * ainv_x


def mw_normalform(fam: DeckFamily, report: Optional[SpectrumReport] = None, *,
                  eps_res: float = 1e-9, strict_hypotheses: bool = False) -> NormalFormResult:
    """Normal form of an abelian deck family.

    The ``sigma_j`` are normalized by ``normalize_abelian``, the involutions
    are transported, the multipliers ``Lambda_{kj}`` are read off and a
    final rescaling ``xi_j -> a_j xi_j``, ``eta_j -> eta_j / a_j`` with
    ``a_j = (Lambda_{1j} Lambda_{2j})^{1/4}`` makes ``Lambda_{2j} = 1/Lambda_{1j}``.

    Returns
    -------
    NormalFormResult
        ``Lambda1[j]`` series in ``zeta`` truncated at ``(N-1)//2``;
        ``M[j] = Lambda1[j] / Lambda2[j]``; ``conjugator`` maps normal-form
        coordinates to the original coordinates.
    """
    be, N, p = fam.backend, fam.N, fam.p
    rep = report if report is not None else family_report(fam)
    warnings = []
    if any(k is Kind.HYPERBOLIC or k is Kind.INFINITE for k in rep.kinds):
        if strict_hypotheses:
            raise NormalFormError("hyperbolic slots are outside the convergent normal form")
        warnings.append("hyperbolic slot: normal form is formal only")
    if rep.abelian is False:
        raise NormalFormError("family is not abelian (sigma has a unimodular multiplier)")
    sf = to_standard(fam, rep)
    alg = sf.alg
    nf = normalize_abelian(sf.sigma, eps_res=eps_res)
    Psi = nf.conjugator
    sf2 = sf.conjugate(Psi)
    Nz = max((N - 1) // 2, 0)
    L1, L2, defects = [], [], {}
    for j in range(p):
        a, am, d1 = _extract_Lambda(sf2.tau1[j], j, p, Nz)
        b, bm, d2 = _extract_Lambda(sf2.tau2[j], j, p, Nz)
        defects[f"tau1_shape_{j + 1}"] = d1
        defects[f"tau2_shape_{j + 1}"] = d2
        defects[f"tau1_inverse_{j + 1}"] = _series_residual(a * am, TruncatedSeries.const(1, p, Nz, be))
        L1.append(a)
        L2.append(b)
    acc = [TruncatedSeries.var(i, 2 * p, N, be) for i in range(2 * p)]
    scale = []
    for j in range(p):
        prod = L1[j] * L2[j]
        try:
            a = prod.binomial_power(Fraction(1, 4)) if be.exact else _float_root(prod, 4)
        except Exception as exc:
            raise BranchInconsistency(f"slot {j + 1}: Lambda_1 Lambda_2 has no unit-constant fourth root") from exc
        scale.append(a)
        _phi2(a, p, N, j, be, acc)
    phi2 = JetMap(acc)
    sf3 = sf2.conjugate(phi2)
    Lam1, Lam2 = [], []
    for j in range(p):
        a, _, d1 = _extract_Lambda(sf3.tau1[j], j, p, Nz)
        b, _, d2 = _extract_Lambda(sf3.tau2[j], j, p, Nz)
        defects[f"tau1_shape_{j + 1}"] = max(defects[f"tau1_shape_{j + 1}"], d1)
        defects[f"tau2_shape_{j + 1}"] = max(defects[f"tau2_shape_{j + 1}"], d2)
        Lam1.append(a)
        Lam2.append(b)
    one = TruncatedSeries.const(1, p, Nz, be)
    residuals = dict(nf.residuals)
    residuals.update(defects)
    for j in range(p):
        residuals[f"Lambda2_Lambda1_{j + 1}"] = _series_residual(Lam1[j] * Lam2[j], one)
        residuals[f"Lambda1_at_0_{j + 1}"] = abs(complex(Lam1[j].coeff([0] * p) - sf.lam[j]))
    rr = reality_residuals(Lam1, alg)
    residuals.update({f"reality_{k}": v for k, v in rr.items()})
    tol = 0.0 if be.exact else 1e-8
    if any(v > tol for v in rr.values()):
        raise BranchInconsistency(f"reality relations fail: {rr}")
    rho_std = sf.rho_std()
    residuals["rho_commutation"] = max(_map_residual(sf3.rho.holo, rho_std.holo), 0.0)
    comm = 0.0
    for s in sf3.sigma:
        for i in range(p):
            Si = sf.S(i)
            comm = max(comm, _commutator_residual(s, Si))
    residuals["sigma_S_commutation"] = comm
    M = [Lam1[j] * Lam2[j].inverse() for j in range(p)]
    conj_total = jet_compose(sf.frame, jet_compose(Psi, phi2))
    out = NormalFormResult(conj_total, sf3.sigma, nf.multipliers, Lam1, Lam2, M, list(sf.lam), list(alg.kinds),
                           list(alg.partner), sf3.tau1, sf3.tau2, residuals, None, warnings + nf.warnings, N, be)
    return out


def _float_root(s: TruncatedSeries, k: int) -> TruncatedSeries:
    c0 = complex(s.coeff([0] * s.n))
    if abs(c0 - 1) > 1e-8:
        raise ValueError("constant term is not 1")
    return s.scale(1 / c0).binomial_power(Fraction(1, k))


# ---------------------------------------------------------------------------
# realization of the normal form
# ---------------------------------------------------------------------------


@dataclass
class RealizedNormalForm:
    """Manifold ``z_{p+j} = Lambda_{1j}(zeta) zeta_j`` with ``zeta`` solving the defining equations.

    Attributes
    ----------
    Lambda : list of TruncatedSeries
        ``Lambda_{1j}`` in ``zeta``.
    A, B : list of TruncatedSeries
        Coefficient series in ``zeta``.
    zeta : JetMap
        ``zeta(z, w)`` as series in ``2p`` variables (``w`` stands for ``conj z``).
    spec : ManifoldSpec
        The realized manifold truncated at ``N + 1``.
    flatness : dict
        Residuals of the identities ``z_{p+e} = conj z_{p+e}`` and
        ``z_{p+s} / Lambda_{1s}^2 = conj z_{p+s'}`` on the manifold.
    """

    p: int
    N: int
    kinds: list
    partner: list
    lam: list
    Lambda: list
    A: list
    B: list
    zeta: JetMap
    spec: ManifoldSpec
    flatness: dict
    backend: Backend = EXACT

    def to_json(self) -> dict:
        to = self.backend.to_json
        return {"p": self.p, "truncation": self.N, "kinds": [k.value for k in self.kinds],
                "lambda": [to(x) for x in self.lam], "Lambda": [s.to_json() for s in self.Lambda],
                "A": [s.to_json() for s in self.A], "B": [s.to_json() for s in self.B],
                "E": self.spec.to_json()["E"], "flatness": self.flatness}


def _swap_conj(s: TruncatedSeries, p: int) -> TruncatedSeries:
    """``conj(s(conj w, conj z))`` for a series in ``(z, w)``."""
    terms = {}
    for ex, v in s.items():
        terms[pack(list(ex[p:]) + list(ex[:p]))] = s.backend.conj(v)
    return TruncatedSeries(s.n, s.N, terms, s.backend)


def _ab_series(L: TruncatedSeries, kind: Kind):
    be = L.backend
    one = TruncatedSeries.const(1, L.n, L.N, be)
    L2 = L * L
    c0 = L2.coeff([0] * L.n)
    if _close(be, c0, be.one(), 1e-14):
        raise ValueError("lambda^2 = 1 is a pole of the coefficient formulas")
    den = ((one - L2) * (one - L2)).inverse()
    A = ((one + L2) if kind is Kind.ELLIPTIC else (L + L2 * L)) * den
    B = L * den
    return A, B


def realize_normal_form(nf: NormalFormResult, N: Optional[int] = None) -> RealizedNormalForm:
    """Realize the normal form as a manifold in ``(z', z'')`` coordinates.

    Examples
    --------
    >>> two = TruncatedSeries.const(2, 1, 2)
    >>> nf = NormalFormResult(JetMap.identity(2, 4), [], Lambda1=[two], Lambda2=[two.inverse()],
    ...                       M=[two * two], lam=[2], kinds=[Kind.ELLIPTIC], partner=[0], N=4)
    >>> rf = realize_normal_form(nf)
    >>> str(rf.A[0].coeff([0])), str(rf.B[0].coeff([0]))
    ('5/9', '2/9')
    """
    if nf.Lambda1 is None:
        raise ValueError("normal form carries no Lambda data")
    kinds = list(nf.kinds)
    if any(k in (Kind.HYPERBOLIC, Kind.INFINITE) for k in kinds):
        raise ValueError("realization covers elliptic and complex slots only")
    p = len(nf.Lambda1)
    be = nf.backend
    N = nf.N if N is None else N
    partner = list(nf.partner) if nf.partner is not None else list(range(p))
    A, B = [], []
    for j, L in enumerate(nf.Lambda1):
        a, b = _ab_series(L, kinds[j])
        A.append(a)
        B.append(b)
    n = 2 * p
    M = N + 1
    z = [TruncatedSeries.var(i, n, M, be) for i in range(p)]
    w = [TruncatedSeries.var(p + i, n, M, be) for i in range(p)]
    cplx = [j for j in range(p) if kinds[j] is Kind.COMPLEX]
    half = len(cplx) // 2
    s_idx, sp_idx = cplx[:half], cplx[half:]
    zeta = JetMap([TruncatedSeries.zero(n, M, be) for _ in range(p)])
    for _ in range(M + 2):
        Az = [compose_series(_relift(a, M), zeta, order=M) for a in A]
        Bz = [compose_series(_relift(b, M), zeta, order=M) for b in B]
        Lz = [compose_series(_relift(L, M), zeta, order=M) for L in nf.Lambda1]
        new = [None] * p
        for j in range(p):
            if kinds[j] is Kind.ELLIPTIC:
                new[j] = Az[j] * z[j] * w[j] - Bz[j] * (z[j] * z[j] + w[j] * w[j])
        for s, sp in zip(s_idx, sp_idx):
            new[s] = Az[s] * z[s] * w[sp] - Bz[s] * (z[s] * z[s] + Lz[s] * Lz[s] * w[sp] * w[sp])
            new[sp] = Az[sp] * w[s] * z[sp] - Bz[sp] * (z[sp] * z[sp] + Lz[sp] * Lz[sp] * w[s] * w[s])
        nz = JetMap(new)
        if nz == zeta:
            break
        zeta = nz
    Lz = [compose_series(_relift(L, M), zeta, order=M) for L in nf.Lambda1]
    E = tuple(Lz[j] * zeta.components[j] for j in range(p))
    spec = ManifoldSpec(p, N, E, None, None, be, "realized normal form")
    flat = {}
    for j in range(p):
        if kinds[j] is Kind.ELLIPTIC:
            flat[f"e{j + 1}"] = _series_residual(E[j], _swap_conj(E[j], p))
    for s, sp in zip(s_idx, sp_idx):
        inv = Lz[s].inverse()
        flat[f"s{s + 1}"] = _series_residual(E[s] * inv * inv, _swap_conj(E[sp], p))
    return RealizedNormalForm(p, N, kinds, partner, list(nf.lam), list(nf.Lambda1), A, B, zeta, spec, flat, be)


def _eval(s: TruncatedSeries, pt) -> complex:
    return complex(s.evaluate([complex(x) for x in pt]))


def solve_zeta(rf: RealizedNormalForm, zp: Sequence[complex], *, r0: float = 1e-2, tol: float = 1e-12,
               max_iter: int = 50) -> np.ndarray:
    """Solve the ``zeta`` equations at ``z'`` with ``w = conj z'`` by fixed-point iteration.

    Examples
    --------
    >>> two = TruncatedSeries.const(2, 1, 2)
    >>> nf = NormalFormResult(JetMap.identity(2, 4), [], Lambda1=[two], Lambda2=[two.inverse()],
    ...                       M=[two * two], lam=[2], kinds=[Kind.ELLIPTIC], partner=[0], N=4)
    >>> bool(abs(solve_zeta(realize_normal_form(nf), [0.003])[0] - 0.003 ** 2 / 9) < 1e-15)
    True
    """
    z = np.array([complex(x) for x in zp])
    p = rf.p
    if z.shape != (p,):
        raise ValueError(f"expected {p} coordinates")
    if float(np.max(np.abs(z))) > r0:
        raise ValueError(f"|z'| = {float(np.max(np.abs(z))):.3g} exceeds the radius guard {r0}")
    w = np.conj(z)
    cplx = [j for j in range(p) if rf.kinds[j] is Kind.COMPLEX]
    half = len(cplx) // 2
    pairs = list(zip(cplx[:half], cplx[half:]))
    zeta = np.zeros(p, dtype=complex)
    for it in range(1, max_iter + 1):
        A = [_eval(a, zeta) for a in rf.A]
        B = [_eval(b, zeta) for b in rf.B]
        L = [_eval(x, zeta) for x in rf.Lambda]
        new = np.zeros(p, dtype=complex)
        for j in range(p):
            if rf.kinds[j] is Kind.ELLIPTIC:
                new[j] = A[j] * z[j] * w[j] - B[j] * (z[j] ** 2 + w[j] ** 2)
        for s, sp in pairs:
            new[s] = A[s] * z[s] * w[sp] - B[s] * (z[s] ** 2 + L[s] ** 2 * w[sp] ** 2)
            new[sp] = A[sp] * w[s] * z[sp] - B[sp] * (z[sp] ** 2 + L[sp] ** 2 * w[s] ** 2)
        if float(np.max(np.abs(new - zeta))) <= tol * max(1.0, float(np.max(np.abs(new)))):
            return new
        zeta = new
    raise NoConvergence(max_iter, "zeta fixed-point")


# ---------------------------------------------------------------------------
# hull polydiscs
# ---------------------------------------------------------------------------


@dataclass
class HullPolydisc:
    """Ellipses ``A_j |z_j|^2 - B_j (z_j^2 + conj z_j^2) <= x_{p+j}`` over ``x''``.

    ``semi_axes[j]`` is ``(major, minor)``; ``radius_bound[j] = C1 sqrt(x_{p+j})``.
    """

    x: list
    zeta: list
    S: list
    A: list
    B: list
    semi_axes: list
    C1: float
    radius_bound: list
    max_boundary_radius: list
    degenerate: list
    contained: bool

    def contains(self, z: Sequence[complex]) -> bool:
        for j, zj in enumerate(z):
            zj = complex(zj)
            val = self.A[j] * abs(zj) ** 2 - self.B[j] * 2 * (zj * zj).real
            if val > self.x[j] + 1e-15:
                return False
        return True

    def to_json(self) -> dict:
        return {"x": self.x, "zeta": self.zeta, "S": self.S, "A": self.A, "B": self.B,
                "semi_axes": [list(t) for t in self.semi_axes], "C1": self.C1,
                "radius_bound": self.radius_bound, "max_boundary_radius": self.max_boundary_radius,
                "degenerate": self.degenerate, "contained": self.contained}


def _R_map(rf: RealizedNormalForm, zeta: np.ndarray) -> np.ndarray:
    return np.array([_eval(rf.Lambda[j], zeta) * zeta[j] for j in range(rf.p)])


def _R_jac(rf: RealizedNormalForm, zeta: np.ndarray) -> np.ndarray:
    p = rf.p
    J = np.zeros((p, p), dtype=complex)
    for j in range(p):
        L = _eval(rf.Lambda[j], zeta)
        for k in range(p):
            J[j, k] = _eval(rf.Lambda[j].diff(k), zeta) * zeta[j] + (L if j == k else 0)
    return J


def _invert_R(rf: RealizedNormalForm, x: np.ndarray, tol: float = 1e-15, max_iter: int = 50) -> np.ndarray:
    zeta = np.array([x[j] / complex(rf.lam[j]) for j in range(rf.p)], dtype=complex)
    for _ in range(max_iter):
        F = _R_map(rf, zeta) - x
        if float(np.max(np.abs(F))) <= tol * max(1.0, float(np.max(np.abs(x)))):
            return zeta
        zeta = zeta - np.linalg.solve(_R_jac(rf, zeta), F)
    F = _R_map(rf, zeta) - x
    if float(np.max(np.abs(F))) <= 1e-13 * max(1.0, float(np.max(np.abs(x)))):
        return zeta
    raise NoConvergence(max_iter, "Newton inversion of zeta -> Lambda(zeta) zeta")


def _hull_coeffs(rf: RealizedNormalForm, zeta: np.ndarray):
    A, B, S = [], [], []
    for j in range(rf.p):
        L = _eval(rf.Lambda[j], zeta)
        s = 1 / L
        A.append((_eval(rf.A[j], zeta) / s).real)
        B.append((_eval(rf.B[j], zeta) / s).real)
        S.append(s.real)
    return A, B, S


def _c1(rf: RealizedNormalForm, slack: float) -> float:
    A, B, _ = _hull_coeffs(rf, np.zeros(rf.p, dtype=complex))
    worst = max(1 / math.sqrt(a - 2 * abs(b)) for a, b in zip(A, B))
    return (1 + slack) * worst


def _jacobian_guard(rf: RealizedNormalForm, eps: float) -> bool:
    p = rf.p
    d0 = abs(np.linalg.det(_R_jac(rf, np.zeros(p, dtype=complex))))
    for corner in np.ndindex(*([2] * p)):
        x = np.array([eps * c for c in corner], dtype=complex)
        try:
            zeta = _invert_R(rf, x)
        except (NoConvergence, np.linalg.LinAlgError):
            return False
        d = abs(np.linalg.det(_R_jac(rf, zeta)))
        if not (0.5 * d0 <= d <= 2 * d0):
            return False
        A, B, _ = _hull_coeffs(rf, zeta)
        if any(a - 2 * abs(b) <= 0 for a, b in zip(A, B)):
            return False
    return True


def default_hull_epsilon(rf: RealizedNormalForm, cap: float = 1e-2) -> float:
    """Largest dyadic ``eps <= cap`` at which the inversion of ``zeta -> Lambda(zeta) zeta`` is guarded."""
    k = math.ceil(-math.log2(cap))
    for kk in range(k, k + 40):
        eps = 2.0 ** (-kk)
        if _jacobian_guard(rf, eps):
            return eps
    raise HullError("no admissible epsilon found")


def hull_polydiscs(rf: RealizedNormalForm, x: Sequence[float], *, eps: Optional[float] = None,
                   samples: int = 256, C1_slack: float = 0.05) -> HullPolydisc:
    """Polydisc ``D(x'')`` of the hull over ``x''`` for a purely elliptic normal form.

    Examples
    --------
    >>> two = TruncatedSeries.const(2, 1, 2)
    >>> nf = NormalFormResult(JetMap.identity(2, 4), [], Lambda1=[two], Lambda2=[two.inverse()],
    ...                       M=[two * two], lam=[2], kinds=[Kind.ELLIPTIC], partner=[0], N=4)
    >>> hp = hull_polydiscs(realize_normal_form(nf), [0.004])
    >>> [round(v, 12) for v in hp.semi_axes[0]] == [round(3 * (0.002) ** 0.5, 12), round(0.002 ** 0.5, 12)]
    True
    """
    if any(k is not Kind.ELLIPTIC for k in rf.kinds):
        raise HullError("hull polydiscs are defined for purely elliptic normal forms")
    xs = np.array([float(v) for v in x])
    if xs.shape != (rf.p,):
        raise HullError(f"expected {rf.p} coordinates")
    if np.any(xs < 0):
        raise HullError("x'' must lie in the closed positive orthant")
    if eps is None:
        eps = default_hull_epsilon(rf)
    if np.any(xs > eps):
        raise HullError(f"x'' exceeds the admissible epsilon {eps}")
    zeta = _invert_R(rf, xs.astype(complex))
    A, B, S = _hull_coeffs(rf, zeta)
    C1 = _c1(rf, C1_slack)
    axes, bounds, maxr, degen = [], [], [], []
    contained = True
    th = np.linspace(0, 2 * np.pi, samples, endpoint=False)
    for j in range(rf.p):
        t = float(xs[j])
        bound = C1 * math.sqrt(t)
        bounds.append(bound)
        if t == 0.0:
            axes.append((0.0, 0.0))
            maxr.append(0.0)
            degen.append(True)
            continue
        degen.append(False)
        # (A - 2B) u^2 + (A + 2B) v^2 <= t with z = u + i v
        a1, a2 = A[j] - 2 * B[j], A[j] + 2 * B[j]
        if a1 <= 0 or a2 <= 0:
            raise HullError(f"slot {j + 1}: quadratic form is not positive definite")
        su, sv = math.sqrt(t / a1), math.sqrt(t / a2)
        axes.append((max(su, sv), min(su, sv)))
        r = np.abs(su * np.cos(th) + 1j * sv * np.sin(th))
        maxr.append(float(np.max(r)))
        if float(np.max(r)) > bound:
            contained = False
    hp = HullPolydisc([float(v) for v in xs], [complex(v) for v in zeta], S, A, B, axes, C1, bounds, maxr,
                      degen, contained)
    if not contained:
        raise HullError(f"containment radius bound fails: {maxr} > {bounds}")
    return hp


# ---------------------------------------------------------------------------
# decomposition with respect to the involution family
# ---------------------------------------------------------------------------


def centralizer_projection(X: JetMap, mode: str, alg: IndexAlgebra) -> JetMap:
    """Project a homogeneous map onto the centralizer part ``G``.

    ``mode = "S_T1_rho"`` projects onto maps commuting with ``S``, ``T_1``
    and ``rho``; ``mode = "T1_T2_rho"`` onto maps commuting with every
    ``T_{1j}``, ``T_{2j}`` and ``rho``.
    """
    if mode not in ("S_T1_rho", "T1_T2_rho"):
        raise ValueError(f"unknown mode {mode!r}")
    p = alg.p
    n = 2 * p
    be = X.backend
    half = be.coerce(Fraction(1, 2))
    degs = {degree(k) for c in X.components for k in c.terms}
    U = [X.components[j].terms for j in range(p)]
    V = [X.components[p + j].terms for j in range(p)]
    out_U = [dict() for _ in range(p)]
    out_V = [dict() for _ in range(p)]
    z = be.zero()

    def u(j, P, Q):
        return U[j].get(pack(tuple(P) + tuple(Q)), z)

    def consistent(j, P, Q):
        """Value of ``U''`` on the block where the reality pairing acts (R_j or N_j)."""
        kind = alg.kinds[j]
        if mode == "S_T1_rho":
            if kind is Kind.ELLIPTIC:
                nu, _ = alg.nu(j, P, Q)
                P2, Q2 = alg.rho_e(P, Q)
                return half * (u(j, P, Q) + be.coerce(nu) * be.conj(u(j, P2, Q2)))
            P2, Q2 = alg.rho(P, Q)
            if kind is Kind.COMPLEX:
                return half * (u(j, P, Q) + be.conj(u(alg.partner[j], P2, Q2)))
            return half * (u(j, P, Q) + be.conj(u(j, P2, Q2)))
        if kind is Kind.ELLIPTIC:
            P2, Q2 = alg.iota_e(j, P, Q)
            return half * (u(j, P, Q) + be.conj(u(j, P2, Q2)))
        P2, Q2 = alg.rho(P, Q)
        if kind is Kind.COMPLEX:
            return half * (u(j, P, Q) + be.conj(u(alg.partner[j], P2, Q2)))
        return half * (u(j, P, Q) + be.conj(u(j, P2, Q2)))

    for d in degs:
        for ex in monomials(n, d):
            P, Q = ex[:p], ex[p:]
            for j in range(p):
                if not alg.in_R(j, P, Q):
                    continue
                if mode == "S_T1_rho" or alg.in_N(j, P, Q):
                    val = consistent(j, P, Q)
                else:
                    A, Bv = alg.AB(j, P, Q)
                    _, nup = alg.nu(j, P, Q)
                    val = be.coerce(nup) * consistent(j, A, Bv)
                if be.is_zero(val):
                    continue
                nu, _ = alg.nu(j, P, Q)
                out_U[j][pack(ex)] = val
                out_V[j][pack(tuple(Q) + tuple(P))] = be.coerce(nu) * val
    comps = [TruncatedSeries(n, X.N, out_U[j], be) for j in range(p)]
    comps += [TruncatedSeries(n, X.N, out_V[j], be) for j in range(p)]
    return JetMap(comps)


def decompose_wrt_family(F: JetMap, mode: str, alg: IndexAlgebra):
    """Split ``F = H o G^{-1}`` with ``G`` in the centralizer and ``H`` normalized.

    Parameters
    ----------
    F : JetMap
        Tangent to the identity, in standard coordinates.
    mode : {"S_T1_rho", "T1_T2_rho"}
    alg : IndexAlgebra

    Examples
    --------
    >>> from crsing.scalars import GaussQ
    >>> alg = IndexAlgebra([Kind.ELLIPTIC], [4], [2])
    >>> c = GaussQ(3, 5)
    >>> xi, eta = TruncatedSeries.var(0, 2, 3), TruncatedSeries.var(1, 2, 3)
    >>> F = JetMap([xi + (xi * xi * eta).scale(c), eta])
    >>> H, G = decompose_wrt_family(F, "S_T1_rho", alg)
    >>> str(H.components[0].coeff([2, 1])), str(G.components[0].coeff([2, 1]))
    ('(0+5i)', '-3')
    """
    return _split_by_projection(F, lambda r: centralizer_projection(r, mode, alg))


# ---------------------------------------------------------------------------
# linearization of the involutions
# ---------------------------------------------------------------------------


class _MonoMat:
    """Linear map ``x_i -> vals[i] x_{perm[i]}``."""

    def __init__(self, M, be: Backend):
        n = len(M)
        self.perm, self.vals = [], []
        for i in range(n):
            nz = [c for c in range(n) if not (be.is_zero(M[i][c]) if be.exact else abs(complex(M[i][c])) < 1e-14)]
            if len(nz) != 1:
                raise LinearFrameError("linear part is not a monomial matrix")
            self.perm.append(nz[0])
            self.vals.append(M[i][nz[0]])
        self.be = be
        self.n = n

    def left(self, phi: dict) -> dict:
        """``T o phi`` for ``phi = {(comp, key): coeff}``."""
        out = {}
        for i in range(self.n):
            m = self.perm[i]
            for (c, k), v in phi.items():
                if c == m:
                    out[(i, k)] = self.vals[i] * v
        return out

    def right(self, phi: dict) -> dict:
        """``phi o T``."""
        out: dict = {}
        for (c, k), v in phi.items():
            ex = unpack(k, self.n)
            coef = v
            new = [0] * self.n
            for t, q in enumerate(ex):
                if q:
                    coef = coef * self.vals[t] ** q
                    new[self.perm[t]] += q
            key = (c, pack(new))
            out[key] = out.get(key, self.be.zero()) + coef
        return out


def _rho_conj_terms(phi: dict, perm: Sequence[int], be: Backend) -> dict:
    """``rho o phi o rho`` with ``rho(x) = R(conj x)``, ``R`` the permutation ``perm``."""
    n = len(perm)
    inv = [0] * n
    for i, m in enumerate(perm):
        inv[m] = i
    out = {}
    for (c, k), v in phi.items():
        ex = unpack(k, n)
        new = [0] * n
        for t, q in enumerate(ex):
            new[perm[t]] += q
        out[(inv[c], pack(new))] = be.conj(v)
    return out


def _map_terms(F: JetMap) -> dict:
    return {(c, k): v for c, comp in enumerate(F.components) for k, v in comp.terms.items()}


def _terms_to_map(terms: dict, n: int, N: int, be: Backend) -> JetMap:
    comps = [dict() for _ in range(n)]
    for (c, k), v in terms.items():
        if not (be.is_zero(v) if be.exact else abs(complex(v)) < 1e-300):
            comps[c][k] = v
    return JetMap([TruncatedSeries(n, N, d, be) for d in comps])


def _support_basis(alg: IndexAlgebra, k: int, family: bool, be: Backend) -> list:
    """Basis of degree-``k`` maps commuting with ``S`` (and with ``T_1`` if ``family``)."""
    p = alg.p
    n = 2 * p
    basis = []
    for ex in monomials(n, k):
        P, Q = ex[:p], ex[p:]
        for j in range(p):
            if not alg.in_R(j, P, Q):
                continue
            if family:
                nu, _ = alg.nu(j, P, Q)
                basis.append({(j, pack(ex)): be.one(), (p + j, pack(tuple(Q) + tuple(P))): be.coerce(nu)})
            else:
                basis.append({(j, pack(ex)): be.one()})
                basis.append({(p + j, pack(tuple(Q) + tuple(P))): be.one()})
    return basis


def _solve_homological(eqs: list, residuals: list, basis: list, be: Backend, k: int, stage: str) -> dict:
    """Find ``phi`` in span(basis) with ``T phi - phi o T = -R`` for every pair ``(T, R)``."""
    rows: dict = {}
    cols = []
    for b in basis:
        col = {}
        for e, T in enumerate(eqs):
            img = T.left(b)
            for key, v in T.right(b).items():
                img[key] = img.get(key, be.zero()) - v
            for key, v in img.items():
                col[(e,) + key] = v
        cols.append(col)
        for key in col:
            rows.setdefault(key, len(rows))
    for e, R in enumerate(residuals):
        for key in R:
            rows.setdefault((e,) + key, len(rows))
    if not rows:
        return {}
    m = len(rows)
    nb = len(basis)
    A = [[be.zero()] * (nb + 1) for _ in range(m)]
    for c, col in enumerate(cols):
        for key, v in col.items():
            A[rows[key]][c] = A[rows[key]][c] + v
    for e, R in enumerate(residuals):
        for key, v in R.items():
            A[rows[(e,) + key]][nb] = A[rows[(e,) + key]][nb] - v
    Rr, piv = rref(A, be)
    if nb in piv:
        bad = [r for r in range(len(piv)) if piv[r] == nb]
        res = max((abs(complex(v)) for R in residuals for v in R.values()), default=0.0)
        labels = {v: key for key, v in rows.items()}
        raise ObstructionAtDegree(k, res, stage, {"unknowns": nb, "equations": m,
                                                  "inconsistent_rows": [str(labels.get(r)) for r in bad]})
    phi: dict = {}
    for r, c in enumerate(piv):
        val = Rr[r][nb]
        if (be.is_zero(val) if be.exact else abs(complex(val)) < 1e-14):
            continue
        for key, v in basis[c].items():
            phi[key] = phi.get(key, be.zero()) + val * v
    return phi


def _linearize(sf: StandardFamily, taus: list, Ts: list, mirror: list, family: bool, stage: str) -> JetMap:
    """Degree-wise ``Psi`` with ``tau o Psi = Psi o T`` for each ``(tau, T)``.

    ``taus[i]`` are first involutions with linear models ``Ts[i]``; the
    second involutions are ``rho taus[mirror[i]] rho`` with models
    ``rho Ts[mirror[i]] rho``.  Because every correction commutes with
    ``rho``, their residuals are the ``rho``-conjugates of the first ones.
    """
    p, N, be = sf.p, sf.N, sf.backend
    n = 2 * p
    perm = sf.rho_perm()
    if sf.rho.permutation() != perm:
        raise LinearFrameError("anti-holomorphic involution is not in standard form")
    half = be.coerce(Fraction(1, 2))
    T2s = [permute_conj(Ts[m], perm) for m in mirror]
    mats = [_MonoMat(T.linear_part, be) for T in list(Ts) + T2s]
    Psi = JetMap.identity(n, N, be)
    mode = "T1_T2_rho" if family else "S_T1_rho"
    for k in range(2, N + 1):
        # Psi has no degree-k part yet, so [Psi o T]_k = 0
        r1 = [jet_compose(tau, Psi, order=k).homogeneous(k) for tau in taus]
        res = [_map_terms(r) for r in r1] + [_map_terms(permute_conj(r1[m], perm)) for m in mirror]
        if not any(res):
            continue
        basis = _support_basis(sf.alg, k, family, be)
        phi = _solve_homological(mats, res, basis, be, k, stage)
        rphi = _rho_conj_terms(phi, perm, be)
        sym = {}
        for key in set(phi) | set(rphi):
            sym[key] = half * (phi.get(key, be.zero()) + rphi.get(key, be.zero()))
        phi_map = _terms_to_map(sym, n, N, be)
        G = centralizer_projection(phi_map, mode, sf.alg)
        Psi = Psi + (phi_map - G)
    worst = _map_residual(permute_conj(Psi, perm), Psi)
    for tau, T in zip(taus, Ts):
        M = _MonoMat(T.linear_part, be)
        PT = _terms_to_map(M.right(_map_terms(Psi)), n, N, be)
        worst = max(worst, _map_residual(jet_compose(tau, Psi), PT))
    if (be.exact and worst != 0.0) or (not be.exact and worst > 1e-8):
        raise ObstructionAtDegree(N, worst, stage, {"note": "final conjugacy check"})
    return Psi


def _as_standard(fam, report=None) -> StandardFamily:
    return fam if isinstance(fam, StandardFamily) else to_standard(fam, report)


def linearize_tau_pair(fam, report: Optional[SpectrumReport] = None) -> JetMap:
    """Normalized ``Psi`` commuting with ``S`` and ``rho`` that linearizes ``tau_1`` and ``tau_2``.

    The input is a deck family (converted to standard coordinates) or a
    ``StandardFamily`` whose ``sigma_j`` are linear.  The returned map acts
    in standard coordinates.
    """
    sf = _as_standard(fam, report)
    return _linearize(sf, [sf.tau1_total()], [sf.T1()], [0], False, "tau_pair")


def linearize_tau_family(fam, report: Optional[SpectrumReport] = None) -> JetMap:
    """Normalized ``Psi`` commuting with ``S``, ``T_1``, ``rho`` that linearizes every ``tau_{1j}``."""
    sf = _as_standard(fam, report)
    return _linearize(sf, list(sf.tau1), [sf.T1(j) for j in range(sf.p)], list(sf.partner), True, "tau_family")


@dataclass
class RigidityReport:
    """Outcome of the linearization pipeline.

    ``equivalence`` maps the quadric's original coordinates to the
    manifold's, with ``equivalence^{-1} o tau_{1j} o equivalence`` equal to
    the quadric's involutions when ``residual == 0``.
    """

    ok: bool
    stage: str
    conjugator: Optional[JetMap] = None
    equivalence: Optional[JetMap] = None
    residual: Optional[float] = None
    stage_maps: dict = field(default_factory=dict)
    obstruction: Optional[dict] = None
    notes: list = field(default_factory=list)

    def to_json(self) -> dict:
        out = {"ok": self.ok, "stage": self.stage, "residual": self.residual, "notes": self.notes,
               "obstruction": self.obstruction}
        if self.equivalence is not None:
            out["equivalence"] = self.equivalence.to_json()
        return out


def _family_residual(F: JetMap, fam_M: list, rho_M: AntiholomorphicJetMap, fam_Q: list,
                     rho_Q: AntiholomorphicJetMap) -> float:
    Finv = jet_invert(F)
    r = 0.0
    for a, b in zip(fam_M, fam_Q):
        r = max(r, _map_residual(jet_compose(Finv, jet_compose(a, F)), b))
    rr = compose_any(Finv, rho_M, F)
    return max(r, _map_residual(rr.holo, rho_Q.holo))


def rigidity_pipeline(source, *, report: Optional[SpectrumReport] = None,
                      quadric: Optional[DeckFamily] = None) -> RigidityReport:
    """Formal equivalence to the product quadric by successive linearization.

    Stages: linear frame, normalization of the ``sigma_j`` (must come out
    linear), ``linearize_tau_pair``, ``linearize_tau_family``.

    Parameters
    ----------
    source : ManifoldSpec or DeckFamily
    quadric : DeckFamily, optional
        Deck family of the target quadric; derived from the declared
        components of a spec when omitted.
    """
    spec = source if isinstance(source, ManifoldSpec) else None
    if spec is not None:
        fam = build_deck_family(spec)
        if not fam.conditionD:
            return RigidityReport(False, "deck", obstruction={"group_order": fam.group_order},
                                  notes=["condition D fails: deck family incomplete"])
        if report is None:
            report = classify(spec)
        if quadric is None and spec.components is not None:
            quadric = build_deck_family(build_product_quadric(spec.components, spec.N, spec.backend))
    else:
        fam = source
    be = fam.backend
    try:
        sf = to_standard(fam, report)
    except (LinearFrameError, NormalFormError) as exc:
        return RigidityReport(False, "frame", obstruction={"message": str(exc)})
    stage_maps = {"frame": sf.frame}
    nf = normalize_abelian(sf.sigma, check_commute=False, verify=False)
    nonlin = max((c.max_abs() for f in nf.family for c in f.degree_range(2, f.N).components), default=0.0)
    if nonlin != 0.0 and (be.exact or nonlin > 1e-8):
        return RigidityReport(False, "sigma", obstruction={"nonlinear_normal_form": nonlin},
                              notes=["sigma normal form is nonlinear: not formally equivalent to the quadric"])
    stage_maps["sigma"] = nf.conjugator
    sf = sf.conjugate(nf.conjugator, sigma=nf.family)
    try:
        P1 = linearize_tau_pair(sf)
    except ObstructionAtDegree as exc:
        return RigidityReport(False, "tau_pair", obstruction={"degree": exc.degree, "residual": exc.residual,
                                                               "system": exc.system})
    stage_maps["tau_pair"] = P1
    sf = sf.conjugate(P1, with_sigma=False)
    try:
        P2 = linearize_tau_family(sf)
    except ObstructionAtDegree as exc:
        return RigidityReport(False, "tau_family", obstruction={"degree": exc.degree, "residual": exc.residual,
                                                                 "system": exc.system})
    stage_maps["tau_family"] = P2
    # linearize_tau_family verified tau_{1j} o P2 = P2 o T_{1j}
    sf = sf.conjugate(P2, with_sigma=False, tau1=[sf.T1(j) for j in range(sf.p)])
    conj = sf.frame
    std_res = 0.0
    for j in range(sf.p):
        std_res = max(std_res, _map_residual(sf.tau1[j], sf.T1(j)))
    std_res = max(std_res, _map_residual(sf.rho.holo, sf.rho_std().holo))
    out = RigidityReport(std_res == 0.0 or (not be.exact and std_res <= 1e-10), "done", conj, None, std_res,
                         stage_maps)
    if quadric is not None:
        qsf = to_standard(quadric)
        if not all(_close(be, a, b, 1e-10) for a, b in zip(qsf.lam, sf.lam)):
            out.notes.append("quadric multipliers differ from the manifold's; equivalence not formed")
            return out
        equiv = jet_compose(conj, qsf.frame_inv)
        out.equivalence = equiv
        out.residual = max(std_res, _family_residual(equiv, fam.generators, fam.rho, quadric.generators,
                                                     quadric.rho))
        out.ok = out.residual == 0.0 or (not be.exact and out.residual <= 1e-10)
    return out
