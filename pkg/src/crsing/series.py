"""Truncated multivariate power series and jet-map calculus.

Monomials are packed into integers, eight bits per variable, so that
multiplying monomials is integer addition.  A series keeps every
coefficient of total degree ``<= N``; anything above is discarded.
"""
from __future__ import annotations

import itertools
from functools import lru_cache
from typing import Any, Callable, Iterable, Iterator, Mapping, Optional, Sequence

from .scalars import Backend, BackendMismatch, EXACT, FLOAT, get_backend

__all__ = [
    "pack",
    "unpack",
    "degree",
    "monomials",
    "grlex_key",
    "TruncatedSeries",
    "JetMap",
    "AntiholomorphicJetMap",
    "series_mul",
    "jet_compose",
    "jet_compose_many",
    "jet_invert",
    "reynolds_linearize",
    "permute_conj",
    "compose_any",
    "compose_series",
    "unit",
    "SeriesError",
    "SingularLinearPart",
    "GroupClosureError",
]

_BITS = 8
_MASK = (1 << _BITS) - 1
MAX_ORDER = _MASK


class SeriesError(ValueError):
    """Invalid series operation (dimension, order or backend mismatch)."""


class SingularLinearPart(SeriesError):
    """The linear part of a jet is not invertible."""


class GroupClosureError(SeriesError):
    """A finite set of jets is not closed under composition."""


def pack(exps: Sequence[int]) -> int:
    k = 0
    for i, e in enumerate(exps):
        if e < 0 or e > _MASK:
            raise SeriesError(f"exponent {e} out of range")
        k |= e << (_BITS * i)
    return k


@lru_cache(maxsize=None)
def unpack(key: int, n: int) -> tuple[int, ...]:
    return tuple((key >> (_BITS * i)) & _MASK for i in range(n))


@lru_cache(maxsize=None)
def degree(key: int) -> int:
    d = 0
    while key:
        d += key & _MASK
        key >>= _BITS
    return d


def unit(i: int) -> int:
    return 1 << (_BITS * i)


def grlex_key(exps: Sequence[int]) -> tuple:
    """Sort key for graded lexicographic order (x1 > x2 > ... within a degree)."""
    return (sum(exps), tuple(-e for e in exps))


@lru_cache(maxsize=None)
def _monomials_of_degree(n: int, d: int) -> tuple[tuple[int, ...], ...]:
    if n == 0:
        return ((),) if d == 0 else ()
    out = []
    for first in range(d, -1, -1):
        for rest in _monomials_of_degree(n - 1, d - first):
            out.append((first,) + rest)
    return tuple(out)


def monomials(n: int, d: int) -> tuple[tuple[int, ...], ...]:
    """All exponent vectors of length ``n`` and total degree ``d`` in grlex order."""
    return _monomials_of_degree(n, d)


def _check_order(N: int) -> None:
    if N < 0 or N > MAX_ORDER:
        raise SeriesError(f"truncation order {N} out of range")


class TruncatedSeries:
    """Power series in ``n`` variables truncated above total degree ``N``.

    Parameters
    ----------
    n : int
        Number of variables.
    N : int
        Truncation degree; coefficients of degree ``> N`` are never stored.
    terms : mapping
        Packed monomial key to coefficient.  Zero coefficients are dropped.
    backend : Backend
        Coefficient arithmetic.
    """

    __slots__ = ("n", "N", "terms", "backend")

    def __init__(self, n: int, N: int, terms: Optional[Mapping[int, Any]] = None,
                 backend: Backend = EXACT, *, _trusted: bool = False):
        _check_order(N)
        self.n = n
        self.N = N
        self.backend = backend
        if _trusted:
            self.terms = terms  # type: ignore[assignment]
            return
        out = {}
        if terms:
            co = backend.coerce
            isz = backend.is_zero
            for k, c in terms.items():
                if degree(k) > N:
                    continue
                c = co(c)
                if not isz(c):
                    out[k] = c
        self.terms = out

    # construction -------------------------------------------------------
    @classmethod
    def zero(cls, n: int, N: int, backend: Backend = EXACT) -> "TruncatedSeries":
        return cls(n, N, {}, backend, _trusted=True)

    @classmethod
    def const(cls, c: Any, n: int, N: int, backend: Backend = EXACT) -> "TruncatedSeries":
        return cls(n, N, {0: c}, backend)

    @classmethod
    def var(cls, i: int, n: int, N: int, backend: Backend = EXACT) -> "TruncatedSeries":
        if N < 1:
            return cls.zero(n, N, backend)
        return cls(n, N, {unit(i): 1}, backend)

    @classmethod
    def from_exps(cls, items: Mapping[Sequence[int], Any] | Iterable[tuple[Sequence[int], Any]],
                  n: int, N: int, backend: Backend = EXACT) -> "TruncatedSeries":
        it = items.items() if isinstance(items, Mapping) else items
        acc: dict[int, Any] = {}
        co = backend.coerce
        for e, c in it:
            if len(e) != n:
                raise SeriesError(f"exponent {tuple(e)} has wrong length for n={n}")
            k = pack(e)
            acc[k] = acc[k] + co(c) if k in acc else co(c)
        return cls(n, N, acc, backend)

    @classmethod
    def monomial(cls, exps: Sequence[int], n: int, N: int, c: Any = 1,
                 backend: Backend = EXACT) -> "TruncatedSeries":
        return cls.from_exps({tuple(exps): c}, n, N, backend)

    def _new(self, terms: dict, N: Optional[int] = None) -> "TruncatedSeries":
        return TruncatedSeries(self.n, self.N if N is None else N, terms, self.backend, _trusted=True)

    def _clean(self, terms: dict) -> dict:
        isz = self.backend.is_zero
        return {k: c for k, c in terms.items() if not isz(c)}

    # inspection ---------------------------------------------------------
    def coeff(self, exps: Sequence[int]) -> Any:
        c = self.terms.get(pack(exps))
        return self.backend.zero() if c is None else c

    def items(self) -> Iterator[tuple[tuple[int, ...], Any]]:
        """Yield ``(exponents, coefficient)`` pairs in graded-lex order."""
        n = self.n
        pairs = [(unpack(k, n), c) for k, c in self.terms.items()]
        pairs.sort(key=lambda t: grlex_key(t[0]))
        return iter(pairs)

    def is_zero(self) -> bool:
        return not self.terms

    def __bool__(self) -> bool:
        return bool(self.terms)

    def order(self) -> Optional[int]:
        """Lowest degree present, or None for the zero series."""
        if not self.terms:
            return None
        return min(degree(k) for k in self.terms)

    def max_degree(self) -> Optional[int]:
        if not self.terms:
            return None
        return max(degree(k) for k in self.terms)

    def max_abs(self) -> float:
        return max((abs(complex(c)) for c in self.terms.values()), default=0.0)

    def __len__(self) -> int:
        return len(self.terms)

    # structural ---------------------------------------------------------
    def _compat(self, o: "TruncatedSeries") -> None:
        if not isinstance(o, TruncatedSeries):
            raise SeriesError("expected TruncatedSeries")
        if o.n != self.n:
            raise SeriesError(f"variable count mismatch: {self.n} vs {o.n}")
        if o.N != self.N:
            raise SeriesError(f"truncation mismatch: {self.N} vs {o.N}")
        if o.backend is not self.backend:
            raise BackendMismatch(f"backend mismatch: {self.backend.name} vs {o.backend.name}")

    def truncate(self, M: int) -> "TruncatedSeries":
        """Same series viewed at truncation order ``M`` (dropping or padding)."""
        _check_order(M)
        if M >= self.N:
            return self._new(dict(self.terms), M)
        return self._new({k: c for k, c in self.terms.items() if degree(k) <= M}, M)

    def homogeneous(self, d: int) -> "TruncatedSeries":
        return self._new({k: c for k, c in self.terms.items() if degree(k) == d})

    def degree_range(self, lo: int, hi: int) -> "TruncatedSeries":
        return self._new({k: c for k, c in self.terms.items() if lo <= degree(k) <= hi})

    def conj(self) -> "TruncatedSeries":
        """Series with complex-conjugated coefficients."""
        cj = self.backend.conj
        return self._new({k: cj(c) for k, c in self.terms.items()})

    def map_coeffs(self, fn: Callable[[Any], Any]) -> "TruncatedSeries":
        return TruncatedSeries(self.n, self.N, {k: fn(c) for k, c in self.terms.items()}, self.backend)

    def to_backend(self, backend: Backend) -> "TruncatedSeries":
        if backend is self.backend:
            return self
        return TruncatedSeries(self.n, self.N, {k: backend.coerce(c) for k, c in self.terms.items()}, backend)

    def embed(self, n_new: int, positions: Sequence[int]) -> "TruncatedSeries":
        """Reindex variables: old variable ``i`` becomes new variable ``positions[i]``."""
        out = {}
        for k, c in self.terms.items():
            e = unpack(k, self.n)
            ne = [0] * n_new
            for i, ei in enumerate(e):
                ne[positions[i]] += ei
            out[pack(ne)] = c
        return TruncatedSeries(n_new, self.N, out, self.backend, _trusted=True)

    # arithmetic ---------------------------------------------------------
    def __add__(self, o):
        if isinstance(o, TruncatedSeries):
            self._compat(o)
            out = dict(self.terms)
            for k, c in o.terms.items():
                v = out.get(k)
                out[k] = c if v is None else v + c
            return self._new(self._clean(out))
        return self + TruncatedSeries.const(o, self.n, self.N, self.backend)

    __radd__ = __add__

    def __neg__(self):
        return self._new({k: -c for k, c in self.terms.items()})

    def __sub__(self, o):
        if isinstance(o, TruncatedSeries):
            self._compat(o)
            out = dict(self.terms)
            for k, c in o.terms.items():
                v = out.get(k)
                out[k] = -c if v is None else v - c
            return self._new(self._clean(out))
        return self - TruncatedSeries.const(o, self.n, self.N, self.backend)

    def __rsub__(self, o):
        return (-self) + o

    def scale(self, c: Any) -> "TruncatedSeries":
        c = self.backend.coerce(c)
        if self.backend.is_zero(c):
            return self._new({})
        return self._new(self._clean({k: v * c for k, v in self.terms.items()}))

    def __mul__(self, o):
        if isinstance(o, TruncatedSeries):
            return series_mul(self, o)
        return self.scale(o)

    def __rmul__(self, o):
        return self.scale(o)

    def __pow__(self, k: int) -> "TruncatedSeries":
        if k < 0:
            return self.inverse() ** (-k)
        out = TruncatedSeries.const(1, self.n, self.N, self.backend)
        base = self
        while k:
            if k & 1:
                out = out * base
            k >>= 1
            if k:
                base = base * base
        return out

    def inverse(self) -> "TruncatedSeries":
        """Multiplicative inverse of a series with nonzero constant term."""
        c0 = self.terms.get(0)
        if c0 is None or self.backend.is_zero(c0):
            raise SeriesError("series with zero constant term is not invertible")
        inv0 = self.backend.one() / c0
        h = self.scale(inv0) - 1  # O(1) part with unit constant removed
        out = TruncatedSeries.const(1, self.n, self.N, self.backend)
        term = out
        for _ in range(self.N):
            term = -(term * h)
            if not term:
                break
            out = out + term
        return out.scale(inv0)

    def power_series(self, coeffs: Sequence[Any]) -> "TruncatedSeries":
        """Evaluate ``sum_k coeffs[k] * self**k`` for a series with zero constant term."""
        if self.terms.get(0) is not None and not self.backend.is_zero(self.terms[0]):
            raise SeriesError("power_series requires zero constant term")
        out = TruncatedSeries.zero(self.n, self.N, self.backend)
        p = TruncatedSeries.const(1, self.n, self.N, self.backend)
        for k, a in enumerate(coeffs):
            if k > self.N:
                break
            if a:
                out = out + p.scale(a)
            p = p * self
            if not p:
                break
        return out

    def binomial_power(self, alpha) -> "TruncatedSeries":
        """``self**alpha`` for rational ``alpha`` when the constant term is 1."""
        c0 = self.terms.get(0)
        if c0 is None or not self.backend.is_zero(c0 - self.backend.one()):
            raise SeriesError("binomial_power requires constant term 1")
        h = self - 1
        coeffs = [self.backend.one()]
        c = self.backend.one()
        for k in range(1, self.N + 1):
            c = c * (self.backend.coerce(alpha) - (k - 1)) / k
            coeffs.append(c)
        return h.power_series(coeffs)

    def diff(self, i: int) -> "TruncatedSeries":
        """Partial derivative in variable ``i`` (keeps the truncation order)."""
        sh = _BITS * i
        u = 1 << sh
        out = {}
        for k, c in self.terms.items():
            e = (k >> sh) & _MASK
            if e:
                out[k - u] = c * e
        return self._new(out)

    def evaluate(self, point: Sequence[complex]) -> complex:
        """Numerical value at a point (float arithmetic)."""
        tot = 0j
        n = self.n
        for k, c in self.terms.items():
            e = unpack(k, n)
            v = complex(c)
            for x, ei in zip(point, e):
                if ei:
                    v *= x ** ei
            tot += v
        return tot

    def __eq__(self, o):
        if not isinstance(o, TruncatedSeries):
            return NotImplemented
        return self.n == o.n and self.N == o.N and self.terms == o.terms

    __hash__ = None  # type: ignore[assignment]

    def residual(self, o: "TruncatedSeries") -> float:
        return (self - o).max_abs()

    # serialization --------------------------------------------------------
    def to_json(self) -> list[dict]:
        to = self.backend.to_json
        return [dict(exp=list(e), **to(c)) for e, c in self.items()]

    @classmethod
    def from_json(cls, data: Sequence[Mapping], n: int, N: int, backend: Backend = EXACT) -> "TruncatedSeries":
        fj = backend.from_json
        return cls.from_exps([(tuple(d["exp"]), fj(d)) for d in data], n, N, backend)

    def __repr__(self):
        if not self.terms:
            return f"TruncatedSeries(n={self.n}, N={self.N}, 0)"
        parts = []
        for e, c in self.items():
            mono = "*".join(f"x{i + 1}" + (f"^{p}" if p > 1 else "") for i, p in enumerate(e) if p)
            parts.append(f"{c!r}" + (f"*{mono}" if mono else ""))
        return f"TruncatedSeries(n={self.n}, N={self.N}, " + " + ".join(parts) + ")"


def _by_degree(terms: Mapping[int, Any]) -> dict[int, list]:
    out: dict[int, list] = {}
    for k, c in terms.items():
        out.setdefault(degree(k), []).append((k, c))
    return out


def _mul_terms(a: Mapping[int, Any], b: Mapping[int, Any], N: int) -> dict:
    if not a or not b:
        return {}
    ad = _by_degree(a)
    bd = _by_degree(b)
    bdegs = sorted(bd)
    out: dict[int, Any] = {}
    get = out.get
    for da, alist in ad.items():
        for db in bdegs:
            if da + db > N:
                break
            blist = bd[db]
            for ka, ca in alist:
                for kb, cb in blist:
                    k = ka + kb
                    v = get(k)
                    p = ca * cb
                    out[k] = p if v is None else v + p
    return out


def series_mul(a: TruncatedSeries, b: TruncatedSeries) -> TruncatedSeries:
    """Cauchy product truncated at degree ``N``."""
    a._compat(b)
    return a._new(a._clean(_mul_terms(a.terms, b.terms, a.N)))


# ---------------------------------------------------------------------------
# jet maps
# ---------------------------------------------------------------------------


class JetMap:
    """Map germ ``C^n_in -> C^n_out`` given by truncated component series.

    Components carry no constant term; ``linear_part`` is the matrix of
    degree-one coefficients (rows index outputs).
    """

    __slots__ = ("components", "n_in", "n_out", "N", "backend")

    def __init__(self, components: Sequence[TruncatedSeries], *, allow_constant: bool = False):
        comps = list(components)
        if not comps:
            raise SeriesError("JetMap needs at least one component")
        n, N, be = comps[0].n, comps[0].N, comps[0].backend
        for c in comps:
            if c.n != n or c.N != N:
                raise SeriesError("JetMap components must share n and N")
            if c.backend is not be:
                raise BackendMismatch("JetMap components must share a backend")
            if not allow_constant and 0 in c.terms:
                raise SeriesError("JetMap components must vanish at the origin")
        self.components = tuple(comps)
        self.n_in = n
        self.n_out = len(comps)
        self.N = N
        self.backend = be

    # construction -------------------------------------------------------
    @classmethod
    def identity(cls, n: int, N: int, backend: Backend = EXACT) -> "JetMap":
        return cls([TruncatedSeries.var(i, n, N, backend) for i in range(n)])

    @classmethod
    def linear(cls, matrix: Sequence[Sequence[Any]], N: int, backend: Backend = EXACT) -> "JetMap":
        rows = [list(r) for r in matrix]
        n = len(rows[0])
        comps = []
        for r in rows:
            if len(r) != n:
                raise SeriesError("ragged matrix")
            comps.append(TruncatedSeries(n, N, {unit(j): v for j, v in enumerate(r)}, backend))
        return cls(comps)

    @property
    def linear_part(self) -> list[list[Any]]:
        z = self.backend.zero()
        return [[c.terms.get(unit(j), z) for j in range(self.n_in)] for c in self.components]

    def __getitem__(self, i: int) -> TruncatedSeries:
        return self.components[i]

    def __iter__(self):
        return iter(self.components)

    def __len__(self):
        return self.n_out

    # structural -----------------------------------------------------------
    def truncate(self, M: int) -> "JetMap":
        return JetMap([c.truncate(M) for c in self.components])

    def homogeneous(self, d: int) -> "JetMap":
        return JetMap([c.homogeneous(d) for c in self.components])

    def degree_range(self, lo: int, hi: int) -> "JetMap":
        return JetMap([c.degree_range(lo, hi) for c in self.components])

    def linear_map(self) -> "JetMap":
        return self.homogeneous(1)

    def conj(self) -> "JetMap":
        return JetMap([c.conj() for c in self.components])

    def to_backend(self, backend: Backend) -> "JetMap":
        return JetMap([c.to_backend(backend) for c in self.components])

    def __add__(self, o: "JetMap") -> "JetMap":
        self._same_shape(o)
        return JetMap([a + b for a, b in zip(self.components, o.components)])

    def __sub__(self, o: "JetMap") -> "JetMap":
        self._same_shape(o)
        return JetMap([a - b for a, b in zip(self.components, o.components)])

    def __neg__(self) -> "JetMap":
        return JetMap([-a for a in self.components])

    def scale(self, c: Any) -> "JetMap":
        return JetMap([a.scale(c) for a in self.components])

    def _same_shape(self, o: "JetMap") -> None:
        if not isinstance(o, JetMap) or o.n_in != self.n_in or o.n_out != self.n_out or o.N != self.N:
            raise SeriesError("JetMap shape mismatch")

    def __eq__(self, o):
        if not isinstance(o, JetMap):
            return NotImplemented
        return self.components == o.components

    __hash__ = None  # type: ignore[assignment]

    def residual(self, o: "JetMap") -> float:
        """Max absolute coefficient of ``self - o``."""
        return max(a.residual(b) for a, b in zip(self.components, o.components))

    def is_identity(self, tol: Optional[float] = None) -> bool:
        idm = JetMap.identity(self.n_in, self.N, self.backend)
        if self.backend.exact:
            return self == idm
        return self.residual(idm) <= (self.backend.tol if tol is None else tol)

    def compose(self, g: "JetMap", order: Optional[int] = None) -> "JetMap":
        return jet_compose(self, g, order)

    def __matmul__(self, g: "JetMap") -> "JetMap":
        return jet_compose(self, g)

    def inverse(self) -> "JetMap":
        return jet_invert(self)

    def evaluate(self, point: Sequence[complex]) -> list[complex]:
        return [c.evaluate(point) for c in self.components]

    def to_json(self) -> list:
        return [c.to_json() for c in self.components]

    @classmethod
    def from_json(cls, data: Sequence, n: int, N: int, backend: Backend = EXACT) -> "JetMap":
        return cls([TruncatedSeries.from_json(d, n, N, backend) for d in data])

    def __repr__(self):
        return "JetMap(\n  " + ",\n  ".join(repr(c) for c in self.components) + "\n)"


class _PowerCache:
    """Truncated monomials ``g^Q`` built incrementally from smaller powers."""

    def __init__(self, g: JetMap, N: int):
        self.N = N
        self.g = [c.truncate(N).terms for c in g.components]
        self.cache: dict[int, dict] = {0: {0: g.backend.one()}}
        self.n = g.n_out
        # lowest degree of each component, used to skip powers that vanish
        self.low = [min((degree(k) for k in t), default=N + 1) for t in self.g]

    def get(self, key: int) -> dict:
        c = self.cache.get(key)
        if c is not None:
            return c
        e = unpack(key, self.n)
        i = next(j for j, v in enumerate(e) if v)
        lowdeg = sum(ei * self.low[j] for j, ei in enumerate(e))
        if lowdeg > self.N:
            res: dict = {}
        else:
            prev = self.get(key - unit(i))
            res = _mul_terms(prev, self.g[i], self.N)
        self.cache[key] = res
        return res


def jet_compose(f: JetMap, g: JetMap, order: Optional[int] = None) -> JetMap:
    """Composition ``f o g`` truncated at degree ``order`` (default ``N``).

    Degree-``k`` coefficients of the result depend only on the ``k``-jets
    of ``f`` and ``g`` because ``g`` has no constant term.
    """
    if f.n_in != g.n_out:
        raise SeriesError(f"cannot compose: f takes {f.n_in} inputs, g gives {g.n_out}")
    if f.backend is not g.backend:
        raise BackendMismatch("compose across backends")
    for c in g.components:
        if 0 in c.terms:
            raise SeriesError("inner map has a nonzero constant term")
    N = min(f.N, g.N) if order is None else order
    return _compose_cached(f, _PowerCache(g, N), g.n_in, N)


def jet_compose_many(fs: Sequence[JetMap], g: JetMap, order: Optional[int] = None) -> list:
    """``[f o g for f in fs]`` sharing the table of powers of ``g``."""
    if not fs:
        return []
    for c in g.components:
        if 0 in c.terms:
            raise SeriesError("inner map has a nonzero constant term")
    N = min(min(f.N for f in fs), g.N) if order is None else order
    pc = _PowerCache(g, N)
    out = []
    for f in fs:
        if f.n_in != g.n_out:
            raise SeriesError(f"cannot compose: f takes {f.n_in} inputs, g gives {g.n_out}")
        if f.backend is not g.backend:
            raise BackendMismatch("compose across backends")
        out.append(_compose_cached(f, pc, g.n_in, N))
    return out


def _compose_cached(f: JetMap, pc: "_PowerCache", n_in: int, N: int) -> JetMap:
    be = f.backend
    isz = be.is_zero
    out = []
    for comp in f.components:
        acc: dict[int, Any] = {}
        for k, c in comp.terms.items():
            if degree(k) > N:
                continue
            pw = pc.get(k)
            for m, v in pw.items():
                p = c * v
                w = acc.get(m)
                acc[m] = p if w is None else w + p
        acc = {m: v for m, v in acc.items() if not isz(v)}
        out.append(TruncatedSeries(n_in, N, acc, be, _trusted=True))
    return JetMap(out, allow_constant=True)


def compose_series(s: TruncatedSeries, g: JetMap, order: Optional[int] = None) -> TruncatedSeries:
    """Substitute ``g`` into a single series."""
    return jet_compose(JetMap([s], allow_constant=True), g, order).components[0]


def jet_invert(f: JetMap) -> JetMap:
    """Compositional inverse of a square jet with invertible linear part."""
    from .linalg import mat_inv, SingularMatrix

    if f.n_in != f.n_out:
        raise SeriesError("only square jets can be inverted")
    n, N, be = f.n_in, f.N, f.backend
    try:
        Linv = mat_inv(f.linear_part, be)
    except SingularMatrix as exc:
        raise SingularLinearPart(str(exc)) from exc
    Linv_map = JetMap.linear(Linv, N, be)
    h = f.degree_range(2, N)
    g = Linv_map
    for k in range(2, N + 1):
        # degree-k part of g solves L g_k = -[h(g_{<k})]_k
        hk = jet_compose(h, g, k).homogeneous(k)
        corr = jet_compose(Linv_map, hk).truncate(N)
        g = g - corr
    return g


def reynolds_linearize(group: Sequence[JetMap], check: bool = True) -> JetMap:
    """Average ``(Lg)^{-1} o g`` over a finite group of jets fixing the origin.

    The result ``phi`` is tangent to the identity and satisfies
    ``phi o h = Lh o phi`` for every group element ``h``.
    """
    from .linalg import mat_inv, SingularMatrix

    if not group:
        raise SeriesError("empty group")
    be, N, n = group[0].backend, group[0].N, group[0].n_in
    if check:
        _check_closure(group)
    acc = None
    for g in group:
        try:
            Li = JetMap.linear(mat_inv(g.linear_part, be), N, be)
        except SingularMatrix as exc:
            raise SingularLinearPart(str(exc)) from exc
        t = jet_compose(Li, g)
        acc = t if acc is None else acc + t
    return acc.scale(be.one() / len(group))


def _find(group: Sequence[JetMap], h: JetMap) -> bool:
    be = h.backend
    for g in group:
        if be.exact:
            if g == h:
                return True
        elif g.residual(h) <= be.tol:
            return True
    return False


def _check_closure(group: Sequence[JetMap]) -> None:
    for a in group:
        for b in group:
            if not _find(group, jet_compose(a, b)):
                raise GroupClosureError("group is not closed under composition mod degree N+1")


# ---------------------------------------------------------------------------
# anti-holomorphic maps
# ---------------------------------------------------------------------------


class AntiholomorphicJetMap:
    """The map ``x -> F(conj(x))`` stored through its holomorphic part ``F``."""

    __slots__ = ("holo",)

    def __init__(self, holo: JetMap):
        self.holo = holo

    @property
    def N(self) -> int:
        return self.holo.N

    @property
    def backend(self) -> Backend:
        return self.holo.backend

    @property
    def n(self) -> int:
        return self.holo.n_in

    def compose(self, other):
        """``self o other``; conjugation is applied once per anti-holomorphic factor."""
        if isinstance(other, AntiholomorphicJetMap):
            return jet_compose(self.holo, other.holo.conj())
        if isinstance(other, JetMap):
            return AntiholomorphicJetMap(jet_compose(self.holo, other.conj()))
        raise SeriesError("cannot compose with that object")

    def rcompose(self, g: JetMap) -> "AntiholomorphicJetMap":
        """``g o self``."""
        return AntiholomorphicJetMap(jet_compose(g, self.holo))

    def __matmul__(self, other):
        return self.compose(other)

    def __rmatmul__(self, g):
        if isinstance(g, JetMap):
            return self.rcompose(g)
        return NotImplemented

    def permutation(self) -> Optional[list]:
        """``perm`` with ``holo(y)_i = y_{perm[i]}`` when ``holo`` is a coordinate permutation."""
        one = self.backend.one()
        perm = []
        for c in self.holo.components:
            if len(c.terms) != 1:
                return None
            (k, v), = c.terms.items()
            if degree(k) != 1 or not self.backend.is_zero_tol(v - one):
                return None
            perm.append(unpack(k, self.n).index(1))
        return perm if sorted(perm) == list(range(self.n)) else None

    def conjugate_map(self, g: JetMap) -> JetMap:
        """``self o g o self`` for holomorphic ``g``."""
        perm = self.permutation()
        if perm is None or g.n_in != self.n or g.n_out != self.n:
            return self.compose(self.rcompose(g))
        return permute_conj(g, perm)

    def evaluate(self, point: Sequence[complex]) -> list[complex]:
        return self.holo.evaluate([complex(x).conjugate() for x in point])

    def truncate(self, M: int) -> "AntiholomorphicJetMap":
        return AntiholomorphicJetMap(self.holo.truncate(M))

    def __eq__(self, o):
        if not isinstance(o, AntiholomorphicJetMap):
            return NotImplemented
        return self.holo == o.holo

    __hash__ = None  # type: ignore[assignment]

    def to_json(self) -> dict:
        return {"antiholomorphic": True, "holomorphic_part": self.holo.to_json()}

    def __repr__(self):
        return f"AntiholomorphicJetMap({self.holo!r})"


def permute_conj(g: JetMap, perm: Sequence[int]) -> JetMap:
    """``R o conj(g) o R`` for the coordinate permutation ``R(y)_i = y_{perm[i]}`` (``R^2 = id``)."""
    n = g.n_in
    be = g.backend
    inv = [0] * n
    for i, m in enumerate(perm):
        inv[m] = i
    out: list = [dict() for _ in range(n)]
    for c, comp in enumerate(g.components):
        tgt = out[inv[c]]
        for k, v in comp.terms.items():
            ex = unpack(k, n)
            new = [0] * n
            for t, q in enumerate(ex):
                if q:
                    new[perm[t]] += q
            tgt[pack(new)] = be.conj(v)
    return JetMap([TruncatedSeries(n, g.N, d, be, _trusted=True) for d in out])


def compose_any(*maps):
    """Left-to-right written composition ``maps[0] o maps[1] o ...``."""
    out = maps[-1]
    for m in reversed(maps[:-1]):
        if isinstance(m, AntiholomorphicJetMap):
            out = m.compose(out)
        elif isinstance(out, AntiholomorphicJetMap):
            out = out.rcompose(m)
        else:
            out = jet_compose(m, out)
    return out
