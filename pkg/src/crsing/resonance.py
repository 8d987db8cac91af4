"""Index combinatorics for centralizers and small-divisor sequences.

Multiindex pairs ``(P, Q)`` index monomials ``xi^P eta^Q`` in the
diagonal coordinates of the linear family; ``P`` and ``Q`` have one entry
per slot, slots ordered elliptic, hyperbolic, complex ``s``, partner
``s'``.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from fractions import Fraction
from math import comb
from typing import Any, Iterable, Optional, Sequence

import numpy as np

from .manifold import Kind, SpectrumReport
from .scalars import EXACT, Backend, BackendMismatch, GaussQ, QSurd

__all__ = [
    "UndecidableResonance",
    "NotPoincareType",
    "BudgetExceeded",
    "ResonanceMode",
    "IndexAlgebra",
    "IndexPair",
    "Witness",
    "SmallDivisorReport",
    "in_Rj",
    "in_Nj",
    "nu_values",
    "index_maps",
    "poincare_witness",
    "poincare_scan",
    "omega_nu",
    "omega_ideal",
    "sigma_eigenvalues",
]

ENUM_BUDGET = 10 ** 7


class UndecidableResonance(ArithmeticError):
    """Float tolerance cannot decide whether a power of an eigenvalue equals 1."""


class NotPoincareType(ArithmeticError):
    """No witness satisfies the Poincare-type bound."""


class BudgetExceeded(RuntimeError):
    """Enumeration would exceed the configured budget."""


class ResonanceMode:
    EXACT = "exact"
    ROTATION = "rotation"
    TOLERANCE = "tolerance"


def _is_exact(x) -> bool:
    return isinstance(x, (GaussQ, QSurd))


class IndexAlgebra:
    """Eigenvalue data and resonance decisions for a product-type family.

    Parameters
    ----------
    kinds : sequence of Kind
        Per slot.
    mu, lam : sequences
        ``mu_j = lam_j^2`` per slot; exact scalars or complex floats.
    rotation : sequence
        Per slot ``None``, a Fraction ``theta/pi`` with ``lam = exp(i theta)``,
        or ``"irrational"``.
    eps_res : float
        Tolerance for float decisions; values in ``(eps_res, 1e3 eps_res)``
        are undecidable.
    """

    def __init__(self, kinds: Sequence[Kind], mu: Sequence[Any], lam: Sequence[Any],
                 rotation: Optional[Sequence[Any]] = None, eps_res: float = 1e-9):
        self.kinds = [Kind(k) for k in kinds]
        self.p = len(self.kinds)
        self.mu = list(mu)
        self.lam = list(lam)
        self.rotation = list(rotation) if rotation is not None else [None] * self.p
        self.eps_res = eps_res
        self.e = [j for j, k in enumerate(self.kinds) if k is Kind.ELLIPTIC]
        self.h = [j for j, k in enumerate(self.kinds) if k in (Kind.HYPERBOLIC, Kind.INFINITE)]
        cx = [j for j, k in enumerate(self.kinds) if k is Kind.COMPLEX]
        if len(cx) % 2:
            raise ValueError("complex slots come in pairs")
        half = len(cx) // 2
        self.s = cx[:half]
        self.sp = cx[half:]
        if self.e + self.h + self.s + self.sp != list(range(self.p)):
            raise ValueError("slots must be ordered elliptic, hyperbolic, complex s, complex s'")
        self.partner = list(range(self.p))
        for a, b in zip(self.s, self.sp):
            self.partner[a] = b
            self.partner[b] = a
        self.decisions: dict = {}
        self._unit_cache: dict = {}

    @classmethod
    def from_report(cls, rep: SpectrumReport, eps_res: float = 1e-9) -> "IndexAlgebra":
        return cls(rep.kinds, rep.mu, rep.lam, rep.rotation, eps_res)

    @property
    def n(self) -> int:
        return 2 * self.p

    def _record(self, mode: str) -> None:
        self.decisions[mode] = self.decisions.get(mode, 0) + 1

    # unit-power decisions ----------------------------------------------------
    def mu_power_is_one(self, j: int, k: int) -> bool:
        """Decide ``mu_j^k == 1``."""
        if k == 0:
            return True
        key = (j, k)
        hit = self._unit_cache.get(key)
        if hit is not None:
            return hit
        res = self._decide_unit(self.mu[j], self.rotation[j], k)
        self._unit_cache[key] = res
        return res

    def lam_power_sign(self, j: int, k: int) -> Optional[int]:
        """``lam_j^k`` if it is ``+1`` or ``-1``, else ``None``."""
        if k == 0:
            return 1
        lam = self.lam[j]
        rot = self.rotation[j]
        if _is_exact(lam):
            self._record(ResonanceMode.EXACT)
            try:
                v = lam ** k
            except BackendMismatch:
                v = None
            if v is not None:
                if not (v - 1):
                    return 1
                if not (v + 1):
                    return -1
                return None
        if rot is not None:
            self._record(ResonanceMode.ROTATION)
            if rot == "irrational":
                return None
            t = Fraction(rot) * k  # lam^k = exp(i pi t)
            if t.denominator != 1:
                return None
            return 1 if t.numerator % 2 == 0 else -1
        self._record(ResonanceMode.TOLERANCE)
        v = complex(lam) ** k
        for s in (1, -1):
            d = abs(v - s)
            if d <= self.eps_res:
                return s
            if d < 1e3 * self.eps_res:
                raise UndecidableResonance(f"|lam_{j + 1}^{k} - ({s})| = {d:.3g}")
        return None

    def _decide_unit(self, m, rot, k: int) -> bool:
        if _is_exact(m):
            self._record(ResonanceMode.EXACT)
            try:
                return not (m ** k - 1)
            except BackendMismatch:
                pass
        mc = complex(m)
        if abs(abs(mc) - 1) > 1e-6:
            self._record(ResonanceMode.EXACT)
            return False
        if rot is not None:
            self._record(ResonanceMode.ROTATION)
            if rot == "irrational":
                return False
            return (Fraction(rot) * k).denominator == 1  # mu = exp(2 pi i rot)
        self._record(ResonanceMode.TOLERANCE)
        d = abs(mc ** k - 1)
        if d <= self.eps_res:
            return True
        if d < 1e3 * self.eps_res:
            raise UndecidableResonance(f"|mu^{k} - 1| = {d:.3g}")
        return False

    # index sets ----------------------------------------------------------------
    def in_R(self, j: int, P: Sequence[int], Q: Sequence[int]) -> bool:
        if sum(P) + sum(Q) < 2:
            return False
        for i in range(self.p):
            k = P[i] - Q[i] - (1 if i == j else 0)
            if not self.mu_power_is_one(i, k):
                return False
        return True

    def in_N(self, j: int, P: Sequence[int], Q: Sequence[int]) -> bool:
        return self.in_R(j, P, Q) and all(P[i] >= Q[i] for i in range(self.p) if i != j)

    def nu(self, j: int, P: Sequence[int], Q: Sequence[int]) -> tuple[int, int]:
        """``(nu_PQ, nu+_PQ)`` for ``(P, Q)`` in ``R_j``."""
        if not self.in_R(j, P, Q):
            raise ValueError(f"{(tuple(P), tuple(Q))} is not in R_{j + 1}")
        nu = 1
        nup = 1
        for h in self.h:
            if h == j:
                s = self.lam_power_sign(h, P[h] - Q[h] - 1)
            else:
                s = self.lam_power_sign(h, Q[h] - P[h])
            if s is None:
                raise ArithmeticError("nu is not +-1; resonance decision inconsistent")
            nu *= s
            if h != j and Q[h] > P[h]:
                nup *= s
        if self.p == 1:
            nup = 1
        return nu, nup

    # index maps ----------------------------------------------------------------
    def rho_a(self, P, Q) -> tuple:
        out = list(P)
        for i in self.e:
            out[i] = Q[i]
        for i in self.h:
            out[i] = P[i]
        for a, b in zip(self.s, self.sp):
            out[a] = P[b]
            out[b] = P[a]
        return tuple(out)

    def rho_b(self, P, Q) -> tuple:
        out = list(Q)
        for i in self.e:
            out[i] = P[i]
        for i in self.h:
            out[i] = Q[i]
        for a, b in zip(self.s, self.sp):
            out[a] = Q[b]
            out[b] = Q[a]
        return tuple(out)

    def rho(self, P, Q) -> tuple:
        return self.rho_a(P, Q), self.rho_b(P, Q)

    def rho_e(self, P, Q) -> tuple:
        return self.rho_b(P, Q), self.rho_a(P, Q)

    def AB(self, j: int, P, Q) -> tuple:
        A = tuple(P[k] if k == j else max(P[k], Q[k]) for k in range(self.p))
        B = tuple(Q[k] if k == j else min(P[k], Q[k]) for k in range(self.p))
        return A, B

    def iota_e(self, j: int, P, Q) -> tuple:
        return self.AB(j, *self.rho_e(P, Q))

    # linear family -------------------------------------------------------------
    def sigma_eigenvalues(self) -> list:
        """``mu_{i,.}`` for the diagonal ``S_i`` on ``(xi, eta)``: ``mu_i`` on ``xi_i``, ``mu_i^{-1}`` on ``eta_i``."""
        return sigma_eigenvalues(self.mu)


def sigma_eigenvalues(mu: Sequence[Any]) -> list:
    p = len(mu)
    out = []
    for i, m in enumerate(mu):
        one = EXACT.one() if _is_exact(m) else 1.0
        row = [one] * (2 * p)
        row[i] = m
        row[p + i] = one / m
        out.append(row)
    return out


@dataclass(frozen=True)
class IndexPair:
    """``(P, Q)`` together with the component index ``j`` (0-based)."""

    j: int
    P: tuple
    Q: tuple

    def __post_init__(self):
        object.__setattr__(self, "P", tuple(int(x) for x in self.P))
        object.__setattr__(self, "Q", tuple(int(x) for x in self.Q))
        if len(self.P) != len(self.Q):
            raise ValueError("P and Q must have equal length")


def _pair(pair, P=None, Q=None) -> IndexPair:
    if isinstance(pair, IndexPair):
        return pair
    return IndexPair(int(pair), tuple(P), tuple(Q))


def in_Rj(alg: IndexAlgebra, pair, P=None, Q=None) -> bool:
    """Membership in ``R_j``; accepts an IndexPair or ``(j, P, Q)``."""
    ip = _pair(pair, P, Q)
    return alg.in_R(ip.j, ip.P, ip.Q)


def in_Nj(alg: IndexAlgebra, pair, P=None, Q=None) -> bool:
    ip = _pair(pair, P, Q)
    return alg.in_N(ip.j, ip.P, ip.Q)


def nu_values(alg: IndexAlgebra, pair, P=None, Q=None) -> tuple[int, int]:
    ip = _pair(pair, P, Q)
    return alg.nu(ip.j, ip.P, ip.Q)


def index_maps(alg: IndexAlgebra, pair, P=None, Q=None) -> dict:
    ip = _pair(pair, P, Q)
    j, P, Q = ip.j, ip.P, ip.Q
    return {
        "rho": alg.rho(P, Q),
        "rho_a": alg.rho_a(P, Q),
        "rho_b": alg.rho_b(P, Q),
        "rho_e": alg.rho_e(P, Q),
        "AB": alg.AB(j, P, Q),
        "iota_e": alg.iota_e(j, P, Q),
    }


# ---------------------------------------------------------------------------
# Poincare type
# ---------------------------------------------------------------------------


@dataclass
class Witness:
    i: int
    Qp: tuple
    value: float  # max(|mu_i^{Q'}|, |mu_i^{-Q'}|)
    bound: float  # c^{-1} d^{|Q'|}


def _pair_exponent(Q: Sequence[int], i: int, p: int) -> int:
    return Q[i] - Q[i + p]


def _target_exponent(i: int, j: int, p: int) -> int:
    if j == i:
        return 1
    if j == i + p:
        return -1
    return 0


def poincare_constants(mu: Sequence[Any]) -> tuple[float, float]:
    """``d`` from the smallest eigenvalue modulus and ``c = 2 d^{2p}``.

    Any witness value is at least 1, so this ``c`` covers every
    ``|Q'| <= 2p``; larger ``Q'`` are covered by the growth of ``d``.
    """
    p = len(mu)
    mods = [abs(complex(m)) for m in mu]
    dmin = min(max(r, 1 / r) for r in mods)
    d = dmin ** (1.0 / (2 * p))
    return d, 2 * d ** (2 * p)


def poincare_witness(mu, j: int, Q: Sequence[int], d: Optional[float] = None,
                     c: Optional[float] = None) -> Witness:
    """Witness ``(i, Q')`` for the family ``S_1..S_p`` with ``mu_i`` on ``xi_i``, ``mu_i^{-1}`` on ``eta_i``.

    ``mu`` is an IndexAlgebra or the list of ``mu_i``.  ``j`` indexes the
    ``2p`` coordinates (0-based); ``Q`` has length ``2p``.
    """
    if isinstance(mu, IndexAlgebra):
        mu = mu.mu
    p = len(mu)
    if len(Q) != 2 * p or not 0 <= j < 2 * p:
        raise ValueError("Q must have length 2p and j must index 2p coordinates")
    d0, c0 = poincare_constants(mu)
    d = d0 if d is None else d
    c = c0 if c is None else c
    if d <= 1 + 1e-12:
        raise NotPoincareType("d <= 1: some eigenvalue has modulus one")
    logs = [math.log(abs(complex(m))) for m in mu]
    exps = [_pair_exponent(Q, i, p) for i in range(p)]
    nonres = [l for l in range(p) if not _mu_power_equals(mu[l], exps[l], _target_exponent(l, j, p))]
    if not nonres:
        raise ValueError(f"(j, Q) = ({j}, {tuple(Q)}) is resonant for every map")
    Qp = list(Q)
    for i in range(p):
        m = min(Q[i], Q[i + p])
        Qp[i] -= m
        Qp[i + p] -= m
    size = sum(Qp)
    if size <= 2 * p:
        i = nonres[0]
    else:
        i = max(range(p), key=lambda k: (Qp[k] + Qp[k + p], -k))
    e = Qp[i] - Qp[i + p]
    if _mu_power_equals(mu[i], e, _target_exponent(i, j, p)):
        raise NotPoincareType(f"witness {i} is resonant at Q={tuple(Q)}")
    value = math.exp(abs(e * logs[i])) if abs(e * logs[i]) < 700 else math.inf
    bound = d ** size / c
    if not value > bound:
        raise NotPoincareType(f"|mu_{i + 1}^Q'| = {value:.3g} does not exceed {bound:.3g} at Q={tuple(Q)}")
    return Witness(i, tuple(Qp), value, bound)


def _mu_power_equals(m, k: int, t: int) -> bool:
    if _is_exact(m):
        try:
            return not (m ** (k - t) - 1)
        except BackendMismatch:
            pass
    mc = complex(m)
    if abs(abs(mc) - 1) > 1e-12:
        return k == t
    return abs(mc ** (k - t) - 1) < 1e-12


def poincare_scan(mu: Sequence[Any], max_degree: int) -> dict:
    """Check witnesses for every ``(j, Q)`` with ``|Q| <= max_degree`` (vectorised).

    Requires ``|mu_i| != 1`` so that resonance reduces to integer
    comparisons of exponents.
    """
    p = len(mu)
    mods = [abs(complex(m)) for m in mu]
    if any(abs(r - 1) < 1e-12 for r in mods):
        raise NotPoincareType("an eigenvalue lies on the unit circle")
    d, c = poincare_constants(mu)
    logs = np.array([abs(math.log(r)) for r in mods])
    n = 2 * p
    Qs = _all_multiindices(n, max_degree)
    checked = 0
    worst_margin = math.inf
    mins = np.minimum(Qs[:, :p], Qs[:, p:])
    Qp = Qs.copy()
    Qp[:, :p] -= mins
    Qp[:, p:] -= mins
    size = Qp.sum(axis=1)
    exps = Qs[:, :p] - Qs[:, p:]
    pair_tot = Qp[:, :p] + Qp[:, p:]
    big_i = np.argmax(pair_tot, axis=1)
    for j in range(n):
        tgt = np.array([_target_exponent(i, j, p) for i in range(p)])
        nonres = exps != tgt  # per map
        valid = nonres.any(axis=1)
        first = np.argmax(nonres, axis=1)
        i_sel = np.where(size <= 2 * p, first, big_i)
        rows = np.arange(len(Qs))
        e_sel = exps[rows, i_sel]
        ok_res = e_sel != tgt[i_sel]
        logval = np.abs(e_sel) * logs[i_sel]
        logbound = size * math.log(d) - math.log(c)
        margin = logval - logbound
        good = ok_res & (margin > 0)
        bad = valid & ~good
        if bad.any():
            k = int(np.argmax(bad))
            raise NotPoincareType(f"no witness at j={j}, Q={tuple(int(x) for x in Qs[k])}")
        checked += int(valid.sum())
        if valid.any():
            worst_margin = min(worst_margin, float(margin[valid].min()))
    return {"checked": checked, "d": d, "c": c, "min_log_margin": worst_margin}


def _all_multiindices(n: int, max_degree: int) -> np.ndarray:
    total = comb(max_degree + n, n)
    if total > ENUM_BUDGET:
        raise BudgetExceeded(f"{total} multiindices exceed the budget {ENUM_BUDGET}")
    out = []

    def rec(prefix, left, k):
        if k == n - 1:
            for v in range(left + 1):
                out.append(prefix + [v])
            return
        for v in range(left + 1):
            rec(prefix + [v], left - v, k + 1)

    if n <= 2 or total < 2000:
        rec([], max_degree, 0)
        return np.array(out, dtype=np.int64).reshape(-1, n)
    # build iteratively for speed
    arr = np.arange(max_degree + 1, dtype=np.int64).reshape(-1, 1)
    for _ in range(n - 1):
        s = arr.sum(axis=1)
        parts = []
        for v in range(max_degree + 1):
            keep = arr[s + v <= max_degree]
            parts.append(np.hstack([keep, np.full((len(keep), 1), v, dtype=np.int64)]))
        arr = np.vstack(parts)
    return arr


# ---------------------------------------------------------------------------
# small-divisor sequences
# ---------------------------------------------------------------------------


@dataclass
class SmallDivisorReport:
    kind: str
    omega: list
    brjuno_partial: list
    resonant: bool
    witnesses: list = field(default_factory=list)
    exact: bool = False

    def to_json(self) -> dict:
        def f(x):
            return "inf" if math.isinf(x) else x
        return {"kind": self.kind, "omega": [f(x) for x in self.omega],
                "brjuno_partial": [f(x) for x in self.brjuno_partial],
                "resonant": self.resonant, "witnesses": self.witnesses, "exact": self.exact}


def _brjuno(omega: Sequence[float]) -> list:
    out = []
    s = 0.0
    for k, w in enumerate(omega, start=1):
        s = math.inf if w <= 0 else s - math.log(w) / 2 ** k
        out.append(s)
    return out


def _count_upto(n: int, deg: int) -> int:
    return comb(deg + n, n)


def _float_powers(vals: np.ndarray, E: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        logv = np.log(vals.astype(complex))
        return np.exp(E @ logv)


def omega_nu(nu: Sequence[Any], k_max: int, zero_tol: float = 1e-12) -> SmallDivisorReport:
    """``omega(k) = min over 1 < |P| <= 2^k, i of |nu^P - nu_i|, |nu^P - nu_i^{-1}|``.

    Exact scalars are evaluated exactly (values equal to zero certify a
    resonance); floats use ``zero_tol`` to flag resonance.
    """
    if k_max < 1:
        raise ValueError("k_max must be at least 1")
    p = len(nu)
    if _count_upto(p, 2 ** k_max) > ENUM_BUDGET:
        raise BudgetExceeded(f"|P| <= 2^{k_max} in {p} variables exceeds the budget")
    exact = all(_is_exact(x) for x in nu) and _count_upto(p, 2 ** k_max) <= 2 * 10 ** 4
    targets = list(nu) + [EXACT.one() / x if exact else 1 / complex(x) for x in nu]
    omega = []
    resonant = False
    best = math.inf
    for k in range(1, k_max + 1):
        lo = 2 if k == 1 else 2 ** (k - 1) + 1
        hi = 2 ** k
        for dgr in range(lo, hi + 1):
            if exact:
                for P in _monos(p, dgr):
                    v = EXACT.one()
                    for x, e in zip(nu, P):
                        if e:
                            v = v * x ** e
                    for t in targets:
                        diff = v - t
                        if not diff:
                            resonant = True
                            best = 0.0
                        else:
                            try:
                                best = min(best, abs(complex(diff)))
                            except OverflowError:
                                pass
            else:
                E = np.array(list(_monos(p, dgr)), dtype=float).reshape(-1, p)
                vals = _float_powers(np.array([complex(x) for x in nu]), E)
                for t in targets:
                    dd = np.abs(vals - complex(t))
                    dd = dd[np.isfinite(dd)]
                    if dd.size:
                        m = float(dd.min())
                        if m <= zero_tol:
                            resonant = True
                            m = 0.0
                        best = min(best, m)
        omega.append(best)
    return SmallDivisorReport("omega_nu", omega, _brjuno(omega), resonant, exact=exact)


def _monos(n: int, d: int):
    if n == 1:
        yield (d,)
        return
    for first in range(d, -1, -1):
        for rest in _monos(n - 1, d - first):
            yield (first,) + rest


def omega_ideal(maps: Sequence[Sequence[Any]], k_max: int, zero_tol: float = 1e-12) -> SmallDivisorReport:
    """Small divisors of diagonal maps off the ideal generated by ``x_i x_{i+p}``.

    ``omega(k) = inf max_i |mu_i^Q - mu_{i,j}|`` over ``2 <= |Q| <= 2^k``,
    all ``j``, ``min(q_i, q_{i+p}) = 0``, excluding zero values.
    """
    if k_max < 1:
        raise ValueError("k_max must be at least 1 (empty range otherwise)")
    M = [[complex(x) for x in row] for row in maps]
    n = len(M[0])
    if n % 2:
        raise ValueError("maps act on 2p coordinates")
    p = n // 2
    # Q off the ideal: per pair choose which side carries the exponent
    if _count_upto(n, 2 ** k_max) > ENUM_BUDGET:
        raise BudgetExceeded("enumeration budget exceeded")
    mu = np.array(M)  # l x n
    omega = []
    best = math.inf
    resonant_seen = False
    for k in range(1, k_max + 1):
        lo = 2 if k == 1 else 2 ** (k - 1) + 1
        hi = 2 ** k
        for dgr in range(lo, hi + 1):
            Qs = np.array([q for q in _monos(n, dgr)
                           if all(min(q[i], q[i + p]) == 0 for i in range(p))], dtype=float).reshape(-1, n)
            if not len(Qs):
                continue
            powers = np.stack([_float_powers(mu[i], Qs) for i in range(len(M))])  # l x m
            for j in range(n):
                diffs = np.abs(powers - mu[:, j:j + 1])  # l x m
                mx = diffs.max(axis=0)
                mx = mx[np.isfinite(mx)]
                nz = mx[mx > zero_tol]
                if nz.size < mx.size:
                    resonant_seen = True
                if nz.size:
                    best = min(best, float(nz.min()))
        omega.append(best)
    rep = SmallDivisorReport("omega_ideal", omega, _brjuno(omega), False)
    rep.witnesses = [{"excluded_zero_values": resonant_seen}]
    return rep
