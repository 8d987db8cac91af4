"""Asymptotic totally real pairs and attached complex submanifolds.

For a manifold ``z_{p+j} = E_j(z', w')`` whose quadratic part is
``L_j(z', w')^2`` with ``L_j = z_j + C_jm w_m`` (one ``m`` per ``j``), we
look for two holomorphic jets ``rho1(z') = A z' + R(z')`` and
``rho2(z') = At z' + Rt(z')`` such that

* ``E_j(z', rho1(z')) = E_j(z', rho2(z'))`` and
* ``Ebar_j(u, rho1^{-1}(u)) = Ebar_j(u, rho2^{-1}(u))``,

where ``Ebar`` has conjugated coefficients.  The graph ``w' = rho1(z')``
is then the complexification of a complex submanifold ``K`` meeting the
manifold along the fixed sets of the anti-holomorphic involutions
``z -> conj(rho_i(z))``.  ``K`` is ``z_{p+j} = E_j(z', rho1(z'))``.

The linear parts satisfy ``L_j(z, At z) = -L_j(z, A z)``, so at degree
``k + 1`` the unknown degree-``k`` terms enter both equations multiplied
by the linear form ``2 L_j(z, A z)``.  Dividing by it gives a linear
system for ``(R_k, Rt_k)``; when the known part is not divisible the
manifold has no attached submanifold of that sign type.

Slots follow the manifold module: hyperbolic slots first, then complex
slots ``s`` and their partners ``s' = s + s_*``.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Any, Optional, Sequence

from .deck import DeckFamily
from .linalg import SingularMatrix, mat_inv, mat_mul, rref
from .manifold import Kind, ManifoldSpec, SpectrumReport, classify
from .scalars import EXACT, Backend, BackendMismatch
from .series import JetMap, TruncatedSeries, jet_compose, jet_invert, monomials, pack, unit, unpack

__all__ = [
    "AttachError",
    "EllipticObstruction",
    "ResonanceViolation",
    "DivisibilityObstruction",
    "SignVector",
    "AttachResult",
    "PairEnumeration",
    "InvarianceReport",
    "quadratic_square_roots",
    "asymptotic_linear",
    "nonresonance_violations",
    "attach_solve",
    "enumerate_pairs",
    "invariance_check",
]


class AttachError(ArithmeticError):
    """Base class for attachment failures."""


class EllipticObstruction(AttachError):
    """An elliptic slot admits no root ``|a| = 1`` with ``|a + 1/gamma| = 1``."""


class ResonanceViolation(AttachError):
    """A resonant block of the per-degree system is inconsistent."""

    def __init__(self, Q: Sequence[int], j: int, degree: Optional[int] = None):
        self.Q, self.j, self.degree = tuple(Q), j, degree
        super().__init__(f"resonant block for component {j + 1}, exponent {self.Q} is inconsistent")


class DivisibilityObstruction(AttachError):
    """The known part at some degree is not divisible by the leading linear form."""

    def __init__(self, degree: int, component: int, system: str = "direct"):
        self.degree, self.component, self.system = degree, component, system
        super().__init__(
            f"{system} equation for component {component + 1} is not divisible at degree {degree}")


@dataclass(frozen=True)
class SignVector:
    """One sign per hyperbolic slot followed by one per complex pair."""

    values: tuple

    def __post_init__(self):
        if any(v not in (1, -1) for v in self.values):
            raise ValueError("signs must be +1 or -1")

    def __neg__(self) -> "SignVector":
        return SignVector(tuple(-v for v in self.values))

    def __len__(self) -> int:
        return len(self.values)

    def per_slot(self, kinds: Sequence[Kind], partner: Sequence[int]) -> list:
        """Sign of every slot; a complex partner inherits the sign of its pair."""
        out: list = [None] * len(kinds)
        it = iter(self.values)
        for j, k in enumerate(kinds):
            if k is Kind.HYPERBOLIC:
                out[j] = next(it)
        for j, k in enumerate(kinds):
            if k is Kind.COMPLEX and partner[j] > j:
                out[j] = out[partner[j]] = next(it)
        return out

    @classmethod
    def parse(cls, text: str) -> "SignVector":
        """``"+-+"`` or ``"1,-1,1"``."""
        t = text.strip()
        if t and set(t) <= {"+", "-"}:
            return cls(tuple(1 if c == "+" else -1 for c in t))
        return cls(tuple(int(x) for x in t.split(",") if x.strip()))

    def __str__(self) -> str:
        return "".join("+" if v > 0 else "-" for v in self.values)

    @classmethod
    def classes(cls, n: int) -> list:
        """Representatives modulo ``eps ~ -eps`` (first sign fixed to ``+``)."""
        if n == 0:
            return [cls(())]
        return [cls((1,) + rest) for rest in itertools.product((1, -1), repeat=n - 1)]


def _sign_count(kinds: Sequence[Kind], partner: Sequence[int]) -> int:
    return sum(1 for j, k in enumerate(kinds)
               if k is Kind.HYPERBOLIC or (k is Kind.COMPLEX and partner[j] > j))


# ---------------------------------------------------------------------------
# linear data
# ---------------------------------------------------------------------------


def quadratic_square_roots(spec: ManifoldSpec) -> tuple[list, list]:
    """Matrix ``C`` and target slots ``pi`` with ``[E_j]_2 = (z_j + C_{j,pi_j} w_{pi_j})^2``.

    Raises
    ------
    AttachError
        If some quadratic part is not the square of such a linear form.
    """
    p, be = spec.p, spec.backend
    n = 2 * p
    C = [[be.zero()] * p for _ in range(p)]
    pi: list = [None] * p
    two = be.coerce(2)
    for j, e in enumerate(spec.E):
        q = e.homogeneous(2).truncate(2)
        zz = [0] * n
        zz[j] = 2
        if not be.is_zero(q.coeff(zz) - be.one()):
            raise AttachError(f"component {j + 1}: quadratic part is not (z_{j + 1} + c w)^2")
        for m in range(p):
            ex = [0] * n
            ex[j] += 1
            ex[p + m] += 1
            c = q.coeff(ex)
            if not be.is_zero(c):
                if pi[j] is not None:
                    raise AttachError(f"component {j + 1}: linear form couples several w variables")
                C[j][m] = c / two
                pi[j] = m
        if pi[j] is None:
            raise AttachError(f"component {j + 1}: quadratic part has no z w coupling")
        lin = TruncatedSeries(n, 2, {unit(j): be.one(), unit(p + pi[j]): C[j][pi[j]]}, be)
        gap = lin * lin - q
        if not gap.is_zero() if be.exact else gap.max_abs() > 1e-12:
            raise AttachError(f"component {j + 1}: quadratic part is not a perfect square")
    return C, pi


def _gamma_matrix(C, be) -> list:
    half = be.one() / be.coerce(2)
    return [[c * half for c in r] for r in C]


def _eq(a, b, be, tol=1e-10) -> bool:
    return be.is_zero(a - b) if be.exact else abs(complex(a) - complex(b)) <= tol


def asymptotic_linear(report: SpectrumReport, eps: SignVector, C: Optional[list] = None,
                      backend: Backend = EXACT):
    """Linear parts ``(A, At, nu)`` of an asymptotic pair with sign vector ``eps``.

    ``A`` is block diagonal: ``a_h`` on each hyperbolic slot and the
    off-diagonal pair ``(a_s, conj(a_s)^{-1})`` on each complex pair.
    ``At = -gamma^{-1} - A`` and ``nu = diag(At^{-1} A)``.  The root on each
    block is the one giving ``nu_h = mu_h^{eps_h}``,
    ``nu_s = conj(mu_s)^{-eps_s}`` and ``nu_{s'} = mu_s^{eps_s}``, so that
    ``a_h = -lambda_h`` and ``a_s = -1`` for ``eps = +1`` and the tangent
    space of the graph of ``A`` is ``eta = 0`` there.

    Parameters
    ----------
    report : SpectrumReport
    eps : SignVector
    C : matrix, optional
        Coupling matrix from :func:`quadratic_square_roots`; rebuilt from
        the report's ``gamma`` when omitted.

    Examples
    --------
    >>> from crsing.manifold import ComponentType, build_product_quadric, classify
    >>> rep = classify(build_product_quadric([ComponentType.complex("1/4")], N=2))
    >>> A, At, nu = asymptotic_linear(rep, SignVector((1,)))
    >>> [str(x) for x in (A[0][1], At[0][1], nu[0], nu[1])]
    ['-1', '-1/3', '1/3', '3']
    """
    be = backend
    p = report.p
    kinds, partner = report.kinds, report.partner
    if any(k is Kind.ELLIPTIC for k in kinds):
        raise EllipticObstruction("elliptic slots admit no asymptotic totally real pair")
    if any(k is Kind.INFINITE for k in kinds):
        raise AttachError("hyperbolic slots with gamma = inf are not in square form")
    if len(eps) != _sign_count(kinds, partner):
        raise ValueError(f"need {_sign_count(kinds, partner)} signs, got {len(eps)}")
    if C is None:
        C = [[be.zero()] * p for _ in range(p)]
        for j, k in enumerate(kinds):
            g = be.coerce(report.gamma[j])
            if k is Kind.HYPERBOLIC:
                C[j][j] = 2 * g
            elif partner[j] > j:
                C[j][partner[j]] = 2 * g
                C[partner[j]][j] = 2 * (be.one() - be.conj(g))
    G = _gamma_matrix(C, be)
    sl = eps.per_slot(kinds, partner)
    one, zero = be.one(), be.zero()
    A = [[zero] * p for _ in range(p)]
    want: list = [None] * p
    for j, k in enumerate(kinds):
        if k is Kind.HYPERBOLIC:
            lam = be.coerce(report.lam[j])
            if not _eq(lam + be.conj(lam), one / G[j][j], be):
                raise AttachError(f"slot {j + 1}: lambda + conj(lambda) != 1/gamma")
            mu = lam * lam
            want[j] = mu if sl[j] > 0 else one / mu
            roots = [-lam, -be.conj(lam)]
            A[j][j] = roots
        elif partner[j] > j:
            s, t = j, partner[j]
            g, gt = G[s][t], G[t][s]
            if not _eq(gt, one - be.conj(g), be):
                raise AttachError(f"slots {s + 1},{t + 1}: couplings are not gamma, 1 - conj(gamma)")
            mu = one / be.conj(g) - one
            if _eq(mu * be.conj(mu), one, be):
                raise AttachError(f"slot {s + 1}: |mu_s| = 1, eigenvalues are not distinct")
            want[s] = one / be.conj(mu) if sl[s] > 0 else be.conj(mu)
            want[t] = mu if sl[s] > 0 else one / mu
            A[s][t] = [-one, -one / mu]
    Ginv = mat_inv(G, be)

    def assemble(choice):
        M = [[zero] * p for _ in range(p)]
        for j, k in enumerate(kinds):
            if k is Kind.HYPERBOLIC:
                M[j][j] = A[j][j][choice[j]]
            elif partner[j] > j:
                a = A[j][partner[j]][choice[j]]
                M[j][partner[j]] = a
                M[partner[j]][j] = one / be.conj(a)
        Mt = [[-Ginv[r][c] - M[r][c] for c in range(p)] for r in range(p)]
        return M, Mt

    choice = [0] * p
    for j, k in enumerate(kinds):
        if k is Kind.HYPERBOLIC or (k is Kind.COMPLEX and partner[j] > j):
            for c in (0, 1):
                choice[j] = c
                M, Mt = assemble(choice)
                try:
                    nu = _diag_nu(M, Mt, be)
                except SingularMatrix:
                    continue
                idx = [j] if k is Kind.HYPERBOLIC else [j, partner[j]]
                if all(_eq(nu[i], want[i], be) for i in idx):
                    break
            else:
                raise AttachError(f"slot {j + 1}: no root matches the requested sign")
    M, Mt = assemble(choice)
    for X, name in ((M, "A"), (Mt, "At")):
        P = mat_mul(X, [[be.conj(x) for x in r] for r in X], be)
        if not all(_eq(P[r][c], one if r == c else zero, be) for r in range(p) for c in range(p)):
            raise AttachError(f"{name} conj({name}) != I")
    return M, Mt, _diag_nu(M, Mt, be)


def _diag_nu(A, At, be) -> list:
    N = mat_mul(mat_inv(At, be), A, be)
    p = len(A)
    for r in range(p):
        for c in range(p):
            if r != c and not _eq(N[r][c], be.zero(), be):
                raise AttachError("At^{-1} A is not diagonal")
    return [N[j][j] for j in range(p)]


def nonresonance_violations(nu: Sequence[Any], N: int, backend: Backend = EXACT,
                            tol: float = 1e-10) -> list:
    """All ``(j, Q)`` with ``2 <= |Q| <= N`` and ``nu^Q = 1/nu_j``."""
    be = backend
    p = len(nu)
    out = []
    inv = [be.one() / x for x in nu]
    for d in range(2, N + 1):
        for Q in monomials(p, d):
            try:
                v = be.one()
                for x, q in zip(nu, Q):
                    for _ in range(q):
                        v = v * x
                hits = [_eq(v, inv[j], be, tol) for j in range(p)]
            except BackendMismatch:
                # entries from different quadratic fields: compare numerically
                vc = complex(1)
                for x, q in zip(nu, Q):
                    vc *= complex(x) ** q
                hits = [abs(vc - complex(inv[j])) <= tol for j in range(p)]
            out.extend((j, tuple(Q)) for j in range(p) if hits[j])
    return out


# ---------------------------------------------------------------------------
# solver
# ---------------------------------------------------------------------------


@dataclass
class AttachResult:
    """Asymptotic pair and attached submanifold for one sign vector.

    ``rho1``, ``rho2`` are the holomorphic jets ``w' = rho_i(z')``; the
    involutions are ``z -> conj(rho_i(z))``.  ``K[j]`` is the series with
    ``z_{p+j} = K[j](z')`` on the attached submanifold.  ``f``, ``fstar``
    are set for square-form input only.
    """

    eps: SignVector
    nu: list
    A: list
    At: list
    rho1: JetMap
    rho2: JetMap
    K: list
    f: Optional[JetMap]
    fstar: Optional[JetMap]
    N: int
    backend: Backend
    diagnostics: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        be = self.backend
        enc = be.to_json
        return {
            "eps": list(self.eps.values),
            "nu": [enc(x) for x in self.nu],
            "A": [[enc(x) for x in r] for r in self.A],
            "At": [[enc(x) for x in r] for r in self.At],
            "rho1": self.rho1.to_json(),
            "rho2": self.rho2.to_json(),
            "K": [k.to_json() for k in self.K],
            "f": self.f.to_json() if self.f is not None else None,
            "fstar": self.fstar.to_json() if self.fstar is not None else None,
            "N": self.N,
            "diagnostics": self.diagnostics,
        }


def _max_abs(F: JetMap) -> float:
    return float(max((c.max_abs() for c in F.components), default=0.0))


def _graph(rho: JetMap) -> JetMap:
    """``z -> (z, rho(z))``."""
    p = len(rho)
    ident = JetMap.identity(p, rho.N, rho.components[0].backend)
    return JetMap(list(ident.components) + list(rho.components))


def _monomial_rows(M, be) -> list:
    """``[(col, value)]`` per row of a monomial matrix."""
    out = []
    for r in M:
        nz = [(c, x) for c, x in enumerate(r) if not _eq(x, be.zero(), be, 1e-14)]
        if len(nz) != 1:
            raise AttachError("linear part is not a monomial matrix")
        out.append(nz[0])
    return out


def _divide(s: TruncatedSeries, var: int, c, be, tol) -> Optional[TruncatedSeries]:
    """``s / (c z_var)`` or ``None`` when not divisible."""
    terms = {}
    inv = be.one() / c
    for e, v in s.items():
        if e[var] == 0:
            if be.exact or abs(complex(v)) > tol:
                return None
            continue
        e2 = list(e)
        e2[var] -= 1
        terms[pack(e2)] = v * inv
    return TruncatedSeries(s.n, s.N, terms, be)


def _linear_form(C, pi, M, j, p, conjugate, be) -> tuple[int, Any]:
    """``z_j + C_{j,pi_j} (M z)_{pi_j}`` as ``(variable, coefficient)``."""
    c = be.conj(C[j][pi[j]]) if conjugate else C[j][pi[j]]
    coeffs = [be.zero()] * p
    coeffs[j] = be.one()
    for v in range(p):
        coeffs[v] = coeffs[v] + c * M[pi[j]][v]
    nz = [(v, x) for v, x in enumerate(coeffs) if not _eq(x, be.zero(), be, 1e-14)]
    if len(nz) != 1:
        raise AttachError(f"component {j + 1}: leading linear form is not a single variable")
    return nz[0]


def _solve_blocks(cols: dict, rhs: dict, be, tol: float, degree: int, nvars: int):
    """Solve a sparse system block by block.

    ``cols[u]`` maps equation keys to coefficients of unknown ``u``.
    Returns ``(solution, resonant)`` where ``resonant`` lists the unknowns
    of singular but consistent blocks (free unknowns are set to zero).
    """
    parent: dict = {}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for u in cols:
        parent[("u", u)] = ("u", u)
    for e in rhs:
        parent[("e", e)] = ("e", e)
    for u, col in cols.items():
        for e in col:
            parent.setdefault(("e", e), ("e", e))
            a, b = find(("u", u)), find(("e", e))
            if a != b:
                parent[a] = b
    blocks: dict = {}
    for key in parent:
        blocks.setdefault(find(key), []).append(key)
    sol, resonant = {}, []
    for members in blocks.values():
        us = sorted(k[1] for k in members if k[0] == "u")
        es = sorted(k[1] for k in members if k[0] == "e")
        if not us:
            bad = [e for e in es if not _eq(rhs.get(e, be.zero()), be.zero(), be, tol)]
            if bad:
                raise AttachError(f"degree {degree}: equation {bad[0]} has no unknowns")
            continue
        mat = [[cols[u].get(e, be.zero()) for u in us] + [rhs.get(e, be.zero())] for e in es]
        R, piv = rref(mat, be, None if be.exact else tol)
        n = len(us)
        if n in piv:
            _, j, Qk = us[0]
            raise ResonanceViolation(unpack(Qk, nvars), j, degree)
        for u in us:
            sol[u] = be.zero()
        for i, c in enumerate(piv):
            sol[us[c]] = R[i][n]
        if len(piv) < n:
            resonant.append([(u[1], unpack(u[2], nvars)) for u in us])
    return sol, resonant



def attach_solve(spec: ManifoldSpec, eps: SignVector, report: Optional[SpectrumReport] = None,
                 tol: float = 1e-10) -> AttachResult:
    """Asymptotic pair and attached submanifold of sign type ``eps``.

    Raises
    ------
    EllipticObstruction
        If the quadric has an elliptic slot.
    DivisibilityObstruction
        If at some degree the known part is not divisible by the leading
        linear form.
    ResonanceViolation
        If a resonant block of the per-degree system is inconsistent.

    Examples
    --------
    >>> from crsing.manifold import ComponentType, build_product_quadric
    >>> spec = build_product_quadric([ComponentType.hyperbolic(1)], N=4)
    >>> res = attach_solve(spec, SignVector((1,)))
    >>> [(e, str(c)) for e, c in res.K[0].items()]
    [((2,), '-3')]
    """
    be = spec.backend
    p, N = spec.p, spec.N
    rep = report if report is not None else classify(spec)
    C, pi = quadratic_square_roots(spec)
    A, At, nu = asymptotic_linear(rep, eps, C, be)
    Ainv, Atinv = mat_inv(A, be), mat_inv(At, be)
    violations = nonresonance_violations(nu, N, be, tol)
    # leading linear forms of both systems, and the sign flip between branches
    lead1, lead2 = [], []
    for j in range(p):
        v1, c1 = _linear_form(C, pi, A, j, p, False, be)
        w1, d1 = _linear_form(C, pi, At, j, p, False, be)
        v2, c2 = _linear_form(C, pi, Ainv, j, p, True, be)
        w2, d2 = _linear_form(C, pi, Atinv, j, p, True, be)
        if v1 != w1 or v2 != w2 or not _eq(c1, -d1, be) or not _eq(c2, -d2, be):
            raise AttachError(f"component {j + 1}: branch linear forms are not opposite")
        lead1.append((v1, c1))
        lead2.append((v2, c2))
    Eb = JetMap(list(spec.E), allow_constant=False)
    Ebar = Eb.conj()
    rows_inv = [_monomial_rows(Ainv, be), _monomial_rows(Atinv, be)]
    Cbar = [[be.conj(x) for x in r] for r in C]
    two = be.coerce(2)
    rho = [JetMap.linear(A, N + 1, be), JetMap.linear(At, N + 1, be)]
    resonant_all = []
    for k in range(2, N + 1):
        inv = [jet_invert(r) for r in rho]
        D1 = (jet_compose(Eb, _graph(rho[0]), k + 1) - jet_compose(Eb, _graph(rho[1]), k + 1))
        D2 = (jet_compose(Ebar, _graph(inv[0]), k + 1) - jet_compose(Ebar, _graph(inv[1]), k + 1))
        rhs: dict = {}
        for j in range(p):
            for sysname, D, (v, c) in (("direct", D1, lead1[j]), ("conjugate", D2, lead2[j])):
                Z = _divide(D[j].homogeneous(k + 1), v, two * c, be, tol)
                if Z is None:
                    raise DivisibilityObstruction(k + 1, j, sysname)
                for e, val in Z.items():
                    rhs[(sysname, j, pack(e))] = -val
        cols: dict = {}
        for Q in monomials(p, k):
            qk = pack(Q)
            for m in range(p):
                for b in (0, 1):
                    col: dict = {}
                    for j in range(p):
                        if not _eq(C[j][m], be.zero(), be, 0.0):
                            col[("direct", j, qk)] = C[j][m]
                    # conjugate system: delta = -Minv e_m (Minv u)^Q
                    rows = rows_inv[b]
                    coef = be.one()
                    Q2 = [0] * p
                    for i, q in enumerate(Q):
                        ci, ai = rows[i]
                        Q2[ci] += q
                        for _ in range(q):
                            coef = coef * ai
                    q2 = pack(Q2)
                    for r, (ci, ai) in enumerate(rows):
                        if ci != m:
                            continue
                        dval = -ai * coef
                        for j in range(p):
                            cb = Cbar[j][r]
                            if not _eq(cb, be.zero(), be, 0.0):
                                key = ("conjugate", j, q2)
                                col[key] = col.get(key, be.zero()) + cb * dval
                    cols[(b, m, qk)] = col
        sol, resonant = _solve_blocks(cols, rhs, be, tol, k, p)
        resonant_all.extend({"degree": k, "unknowns": [[j + 1, list(Q)] for j, Q in blk]}
                            for blk in resonant)
        for b in (0, 1):
            comps = []
            for m in range(p):
                terms = {qk: v for (bb, mm, qk), v in sol.items()
                         if bb == b and mm == m and not _eq(v, be.zero(), be, 0.0)}
                comps.append(rho[b].components[m] + TruncatedSeries(p, N + 1, terms, be))
            rho[b] = JetMap(comps)
    rho1, rho2 = rho
    G1, G2 = _graph(rho1), _graph(rho2)
    K1 = jet_compose(Eb, G1, N + 1)
    K2 = jet_compose(Eb, G2, N + 1)
    inv = [jet_invert(r) for r in rho]
    S1 = jet_compose(Ebar, _graph(inv[0]), N + 1)
    S2 = jet_compose(Ebar, _graph(inv[1]), N + 1)
    r1N, r2N = rho1.truncate(N), rho2.truncate(N)
    ident = JetMap.identity(p, N, be)
    invol = [_max_abs(jet_compose(r.conj(), r, N) - ident) for r in (r1N, r2N)]
    diag = {
        "nonresonance_violations": [[j + 1, list(Q)] for j, Q in violations],
        "resonant_blocks": resonant_all,
        "involution_residual": invol,
        "K_agreement_residual": _max_abs(K1 - K2),
        "conjugate_agreement_residual": _max_abs(S1 - S2),
    }
    f = fstar = None
    if spec.square_form is not None:
        B, Rsq = spec.square_form
        phi = []
        for j in range(p):
            lin = TruncatedSeries(2 * p, N + 1, {unit(p + m): B[j][m] for m in range(p)}, be)
            phi.append(lin + Rsq[j])
        Phi = JetMap(phi)
        half = be.one() / two
        f = (jet_compose(Phi, G2, N) - jet_compose(Phi, G1, N)).scale(half)
        fsum = jet_compose(Phi, G2, N) + jet_compose(Phi, G1, N)
        Phib = Phi.conj()
        P1 = jet_compose(Phib, _graph(inv[0]), N)
        P2 = jet_compose(Phib, _graph(inv[1]), N)
        fstar = (P2 - P1).scale(half)
        diag["square_root_residual"] = max(_max_abs(fsum), _max_abs(P1 + P2))
    return AttachResult(eps, nu, A, At, r1N, r2N, list(K1.components), f, fstar, N, be, diag)


# ---------------------------------------------------------------------------
# enumeration and invariance
# ---------------------------------------------------------------------------


@dataclass
class PairEnumeration:
    """Results over the sign classes modulo ``eps ~ -eps``."""

    results: list
    failures: dict
    expected: int
    obstruction: Optional[str] = None

    @property
    def count(self) -> int:
        return len(self.results)

    def to_json(self) -> dict:
        return {
            "count": self.count,
            "expected": self.expected,
            "obstruction": self.obstruction,
            "results": [r.to_json() for r in self.results],
            "failures": self.failures,
        }


def enumerate_pairs(spec: ManifoldSpec, report: Optional[SpectrumReport] = None,
                    tol: float = 1e-10) -> PairEnumeration:
    """Run :func:`attach_solve` over all sign classes.

    Examples
    --------
    >>> from crsing.manifold import ComponentType, build_product_quadric
    >>> spec = build_product_quadric([ComponentType.elliptic("1/4")], N=3)
    >>> en = enumerate_pairs(spec)
    >>> en.count, en.obstruction
    (0, 'EllipticObstruction')
    """
    rep = report if report is not None else classify(spec)
    if any(k is Kind.ELLIPTIC for k in rep.kinds):
        return PairEnumeration([], {}, 0, "EllipticObstruction")
    n = _sign_count(rep.kinds, rep.partner)
    results, failures = [], {}
    for eps in SignVector.classes(n):
        try:
            results.append(attach_solve(spec, eps, rep, tol))
        except AttachError as exc:
            failures[str(eps)] = f"{type(exc).__name__}: {exc}"
    return PairEnumeration(results, failures, 2 ** max(n - 1, 0))


@dataclass
class InvarianceReport:
    """Residuals of the deck-family checks for one attached submanifold."""

    sigma_residual: float
    tau_residual: float
    tangent_pattern: list
    expected_pattern: list
    tangent_ok: bool

    @property
    def residual(self) -> float:
        return max(self.sigma_residual, self.tau_residual)

    def to_json(self) -> dict:
        return {
            "sigma_residual": self.sigma_residual,
            "tau_residual": self.tau_residual,
            "tangent_pattern": self.tangent_pattern,
            "expected_pattern": self.expected_pattern,
            "tangent_ok": self.tangent_ok,
        }


def _graph_residual(F: JetMap, rho_src: JetMap, rho_dst: JetMap, N: int) -> float:
    """How far ``F`` maps the graph of ``rho_src`` off the graph of ``rho_dst``."""
    p = len(rho_src)
    img = jet_compose(F, _graph(rho_src), N)
    z = JetMap(list(img.components[:p]))
    w = JetMap(list(img.components[p:]))
    diff = w - jet_compose(rho_dst, z, N)
    return _max_abs(diff)


def invariance_check(res: AttachResult, fam: DeckFamily,
                     report: Optional[SpectrumReport] = None) -> InvarianceReport:
    """Check ``sigma(H) = H``, ``tau_1(H_1) = H_2`` and the tangent space of ``H``.

    ``H_i`` is the graph ``w' = rho_i(z')``.  The tangent pattern records,
    per slot, which standard coordinate vanishes on ``T_0 H_1``: ``"eta"``
    for ``eta_j = 0`` and ``"xi"`` for ``xi_j = 0``.
    """
    from .normalform import standard_frame

    be = res.backend
    p = len(res.A)
    N = min(res.N, fam.N)
    r1, r2 = res.rho1.truncate(N), res.rho2.truncate(N)
    sig = fam.sigma_total.truncate(N)
    tau = fam.tau1_total.truncate(N)
    s_res = max(_graph_residual(sig, r1, r1, N), _graph_residual(sig, r2, r2, N))
    t_res = _graph_residual(tau, r1, r2, N)
    L = standard_frame(fam, report)[0]
    Linv = mat_inv(L, be)
    one, zero = be.one(), be.zero()
    T = [[(one if r == c else zero) for c in range(p)] for r in range(p)] + [list(r) for r in res.A]
    M = mat_mul(Linv, T, be)

    def zero_row(r):
        return all(_eq(x, zero, be, 1e-9) for x in M[r])

    pattern = []
    for j in range(p):
        zx, ze = zero_row(j), zero_row(p + j)
        pattern.append("eta" if ze and not zx else "xi" if zx and not ze else "mixed")
    rep = report if report is not None else classify_from_family(fam)
    sl = res.eps.per_slot(rep.kinds, rep.partner)
    expected = ["eta" if s > 0 else "xi" for s in sl]
    return InvarianceReport(float(s_res), float(t_res), pattern, expected, pattern == expected)


def classify_from_family(fam: DeckFamily) -> SpectrumReport:
    from .normalform import family_report

    return family_report(fam)
