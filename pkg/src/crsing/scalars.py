"""Scalar fields for the two computation backends.

The exact backend works over the Gaussian rationals ``Q(i)``, optionally
extended by one real or imaginary quadratic surd ``sqrt(r)``.  The float
backend uses Python ``complex``.  Every series, map and matrix in one
computation carries a single :class:`Backend` instance.
"""
from __future__ import annotations

import cmath
import math
from fractions import Fraction
from typing import Any, Optional, Union

import gmpy2
from gmpy2 import mpq, mpz

__all__ = [
    "GaussQ",
    "QSurd",
    "Backend",
    "EXACT",
    "FLOAT",
    "get_backend",
    "BackendMismatch",
]

_ZERO = mpq(0)
_ONE = mpq(1)


class BackendMismatch(TypeError):
    """Raised when objects from different backends are combined."""


def _q(x: Any) -> mpq:
    if isinstance(x, mpq):
        return x
    if isinstance(x, Fraction):
        return mpq(x.numerator, x.denominator)
    if isinstance(x, float):
        if not math.isfinite(x):
            raise ValueError("non-finite value in exact backend")
        return mpq(x)
    return mpq(x)


class GaussQ:
    """Gaussian rational ``re + i*im`` with ``mpq`` parts."""

    __slots__ = ("re", "im")

    def __init__(self, re: Any = 0, im: Any = 0):
        self.re = _q(re)
        self.im = _q(im)

    @staticmethod
    def _raw(re: mpq, im: mpq) -> "GaussQ":
        g = GaussQ.__new__(GaussQ)
        g.re = re
        g.im = im
        return g

    # arithmetic -----------------------------------------------------------
    def __add__(self, o):
        if type(o) is GaussQ:
            return GaussQ._raw(self.re + o.re, self.im + o.im)
        if isinstance(o, (int, mpq, Fraction)):
            return GaussQ._raw(self.re + _q(o), self.im)
        return NotImplemented

    __radd__ = __add__

    def __sub__(self, o):
        if type(o) is GaussQ:
            return GaussQ._raw(self.re - o.re, self.im - o.im)
        if isinstance(o, (int, mpq, Fraction)):
            return GaussQ._raw(self.re - _q(o), self.im)
        return NotImplemented

    def __rsub__(self, o):
        if isinstance(o, (int, mpq, Fraction)):
            return GaussQ._raw(_q(o) - self.re, -self.im)
        return NotImplemented

    def __neg__(self):
        return GaussQ._raw(-self.re, -self.im)

    def __pos__(self):
        return self

    def __mul__(self, o):
        if type(o) is GaussQ:
            a, b, c, d = self.re, self.im, o.re, o.im
            if not b:
                if not d:
                    return GaussQ._raw(a * c, _ZERO)
                return GaussQ._raw(a * c, a * d)
            if not d:
                return GaussQ._raw(a * c, b * c)
            return GaussQ._raw(a * c - b * d, a * d + b * c)
        if isinstance(o, (int, mpq, Fraction)):
            o = _q(o)
            return GaussQ._raw(self.re * o, self.im * o)
        return NotImplemented

    __rmul__ = __mul__

    def inverse(self) -> "GaussQ":
        a, b = self.re, self.im
        if not b:
            if not a:
                raise ZeroDivisionError("division by exact zero")
            return GaussQ._raw(1 / a, _ZERO)
        n = a * a + b * b
        return GaussQ._raw(a / n, -b / n)

    def __truediv__(self, o):
        if type(o) is GaussQ:
            return self * o.inverse()
        if isinstance(o, (int, mpq, Fraction)):
            o = _q(o)
            if not o:
                raise ZeroDivisionError("division by exact zero")
            return GaussQ._raw(self.re / o, self.im / o)
        return NotImplemented

    def __rtruediv__(self, o):
        if isinstance(o, (int, mpq, Fraction)):
            return GaussQ(o) * self.inverse()
        return NotImplemented

    def __pow__(self, k: int):
        if not isinstance(k, int):
            return NotImplemented
        if k < 0:
            return self.inverse() ** (-k)
        out = GaussQ._raw(_ONE, _ZERO)
        base = self
        while k:
            if k & 1:
                out = out * base
            base = base * base
            k >>= 1
        return out

    def conjugate(self) -> "GaussQ":
        return GaussQ._raw(self.re, -self.im)

    def __bool__(self):
        return bool(self.re) or bool(self.im)

    def __eq__(self, o):
        if type(o) is GaussQ:
            return self.re == o.re and self.im == o.im
        if isinstance(o, (int, mpq, Fraction)):
            return not self.im and self.re == o
        if isinstance(o, complex):
            return complex(self) == o
        return NotImplemented

    def __hash__(self):
        if not self.im:
            return hash(self.re)
        return hash((self.re, self.im))

    def __complex__(self):
        return complex(float(self.re), float(self.im))

    def __abs__(self) -> float:
        return abs(complex(self))

    def abs2(self) -> mpq:
        return self.re * self.re + self.im * self.im

    def is_real(self) -> bool:
        return not self.im

    def __repr__(self):
        if not self.im:
            return f"{self.re}"
        return f"({self.re}{'+' if self.im >= 0 else '-'}{abs(self.im)}i)"


def _squarefree_split(n: int) -> tuple[int, int]:
    """Return ``(c, r)`` with ``n = c*c*r`` and ``r`` squarefree (n > 0)."""
    c, r = 1, 1
    m = n
    p = 2
    while p * p <= m:
        while m % (p * p) == 0:
            m //= p * p
            c *= p
        if m % p == 0:
            r *= p
            m //= p
        p += 1 if p == 2 else 2
    return c, r * m


class QSurd:
    """Element ``a + b*sqrt(r)`` with Gaussian rational ``a, b``.

    ``r`` is a squarefree integer (possibly negative).  Complex conjugation
    acts on ``a`` and ``b`` and fixes ``sqrt(r)`` when ``r > 0``; for ``r < 0``
    the surd is ``i*sqrt(|r|)`` and is normalized away at construction, so
    ``r`` is always positive here.
    """

    __slots__ = ("a", "b", "r")

    def __init__(self, a: GaussQ, b: GaussQ, r: int):
        if r <= 0:
            raise ValueError("QSurd radicand must be positive")
        self.a = a
        self.b = b
        self.r = r

    @staticmethod
    def make(a: GaussQ, b: GaussQ, r: int):
        if not b:
            return a
        return QSurd(a, b, r)

    def _lift(self, o):
        if type(o) is QSurd:
            if o.r != self.r:
                raise BackendMismatch(f"surds sqrt({self.r}) and sqrt({o.r}) do not mix; use the float backend")
            return o
        if type(o) is GaussQ:
            return QSurd(o, GaussQ._raw(_ZERO, _ZERO), self.r)
        if isinstance(o, (int, mpq, Fraction)):
            return QSurd(GaussQ(o), GaussQ._raw(_ZERO, _ZERO), self.r)
        return None

    def __add__(self, o):
        o = self._lift(o)
        if o is None:
            return NotImplemented
        return QSurd.make(self.a + o.a, self.b + o.b, self.r)

    __radd__ = __add__

    def __sub__(self, o):
        o = self._lift(o)
        if o is None:
            return NotImplemented
        return QSurd.make(self.a - o.a, self.b - o.b, self.r)

    def __rsub__(self, o):
        o = self._lift(o)
        if o is None:
            return NotImplemented
        return o - self

    def __neg__(self):
        return QSurd(-self.a, -self.b, self.r)

    def __mul__(self, o):
        if type(o) is GaussQ or isinstance(o, (int, mpq, Fraction)):
            return QSurd.make(self.a * o, self.b * o, self.r)
        o = self._lift(o)
        if o is None:
            return NotImplemented
        a = self.a * o.a + self.b * o.b * self.r
        b = self.a * o.b + self.b * o.a
        return QSurd.make(a, b, self.r)

    __rmul__ = __mul__

    def inverse(self):
        n = self.a * self.a - self.b * self.b * self.r
        if not n:
            raise ZeroDivisionError("division by exact zero")
        return QSurd.make(self.a / n, -self.b / n, self.r)

    def __truediv__(self, o):
        if type(o) is GaussQ or isinstance(o, (int, mpq, Fraction)):
            return QSurd.make(self.a / o, self.b / o, self.r)
        o = self._lift(o)
        if o is None:
            return NotImplemented
        return self * o.inverse()

    def __rtruediv__(self, o):
        o = self._lift(o)
        if o is None:
            return NotImplemented
        return o * self.inverse()

    def __pow__(self, k: int):
        if k < 0:
            return self.inverse() ** (-k)
        out = _lift_one(self.r)
        base = self
        while k:
            if k & 1:
                out = out * base
            base = base * base
            k >>= 1
        return out

    def conjugate(self):
        return QSurd.make(self.a.conjugate(), self.b.conjugate(), self.r)

    def __bool__(self):
        return bool(self.a) or bool(self.b)

    def __eq__(self, o):
        try:
            d = self - o
        except BackendMismatch:
            return False
        if d is NotImplemented:
            return NotImplemented
        return not d

    def __hash__(self):
        return hash((self.a, self.b, self.r))

    def __complex__(self):
        return complex(self.a) + complex(self.b) * math.sqrt(self.r)

    def __abs__(self):
        return abs(complex(self))

    def __repr__(self):
        return f"({self.a!r} + {self.b!r}*sqrt({self.r}))"


def _lift_one(r: int) -> QSurd:
    return QSurd(GaussQ(1), GaussQ(0), r)


Scalar = Union[GaussQ, QSurd, complex]


def _parse_rational(s: Any) -> mpq:
    if isinstance(s, str):
        s = s.strip()
        if "/" in s or s.lstrip("-").isdigit():
            return mpq(s)
        return mpq(Fraction(s))
    return _q(s)


def _isqrt_exact(n: mpz) -> Optional[mpz]:
    if n < 0:
        return None
    r = gmpy2.isqrt(n)
    return r if r * r == n else None


def _sqrt_rational(q: mpq) -> Optional[mpq]:
    if q < 0:
        return None
    a = _isqrt_exact(q.numerator)
    b = _isqrt_exact(q.denominator)
    if a is None or b is None:
        return None
    return mpq(a, b)


class Backend:
    """Coefficient arithmetic policy for one computation."""

    name: str = "abstract"
    exact: bool = False
    drop_tol: float = 0.0
    tol: float = 0.0

    def coerce(self, x: Any) -> Scalar:
        raise NotImplementedError

    def zero(self) -> Scalar:
        return self.coerce(0)

    def one(self) -> Scalar:
        return self.coerce(1)

    def is_zero(self, c: Scalar) -> bool:
        raise NotImplementedError

    def close(self, a: Scalar, b: Scalar, tol: Optional[float] = None) -> bool:
        return self.is_zero_tol(a - b, tol)

    def is_zero_tol(self, c: Scalar, tol: Optional[float] = None) -> bool:
        raise NotImplementedError

    def conj(self, c: Scalar) -> Scalar:
        return c.conjugate()

    def sqrt(self, c: Scalar) -> Optional[Scalar]:
        raise NotImplementedError

    def to_complex(self, c: Scalar) -> complex:
        return complex(c)

    def to_json(self, c: Scalar) -> dict:
        raise NotImplementedError

    def from_json(self, d: Any) -> Scalar:
        if isinstance(d, dict):
            return self.coerce_pair(d.get("re", 0), d.get("im", 0))
        return self.coerce(d)

    def coerce_pair(self, re: Any, im: Any) -> Scalar:
        raise NotImplementedError

    def __repr__(self):
        return f"Backend({self.name})"


class ExactBackend(Backend):
    name = "exact"
    exact = True

    def coerce(self, x: Any) -> Scalar:
        if type(x) is GaussQ or type(x) is QSurd:
            return x
        if isinstance(x, complex):
            return GaussQ(mpq(x.real), mpq(x.imag))
        if isinstance(x, str):
            return self.coerce_pair(x, 0)
        return GaussQ(x)

    def coerce_pair(self, re: Any, im: Any) -> Scalar:
        return GaussQ(_parse_rational(re), _parse_rational(im))

    def is_zero(self, c: Scalar) -> bool:
        return not c

    def is_zero_tol(self, c: Scalar, tol: Optional[float] = None) -> bool:
        return not c

    def sqrt(self, c: Scalar) -> Optional[Scalar]:
        """Exact square root with nonnegative real part, when representable."""
        if type(c) is QSurd:
            return None
        c = self.coerce(c)
        a, b = c.re, c.im
        if not b:
            if a >= 0:
                s = _sqrt_rational(a)
                if s is not None:
                    return GaussQ(s)
                num, den = a.numerator, a.denominator
                cc, r = _squarefree_split(int(num * den))
                return QSurd(GaussQ(0), GaussQ(mpq(cc, den)), r)
            s = _sqrt_rational(-a)
            if s is not None:
                return GaussQ(0, s)
            num, den = (-a).numerator, (-a).denominator
            cc, r = _squarefree_split(int(num * den))
            return QSurd(GaussQ(0), GaussQ(0, mpq(cc, den)), r)
        m = _sqrt_rational(a * a + b * b)
        if m is None:
            return None
        x = _sqrt_rational((m + a) / 2)
        if x is None:
            return None
        if x:
            y = b / (2 * x)
        else:
            y = _sqrt_rational((m - a) / 2)
            if y is None:
                return None
            if b < 0:
                y = -y
        return GaussQ(x, y)

    def to_json(self, c: Scalar) -> dict:
        if type(c) is QSurd:
            z = complex(c)
            return {"re": repr(z.real), "im": repr(z.imag), "surd": {
                "a": self.to_json(c.a), "b": self.to_json(c.b), "r": c.r}}
        return {"re": str(c.re), "im": str(c.im)}

    def from_json(self, d: Any) -> Scalar:
        if isinstance(d, dict) and "surd" in d:
            s = d["surd"]
            return QSurd.make(self.from_json(s["a"]), self.from_json(s["b"]), int(s["r"]))
        return super().from_json(d)


class FloatBackend(Backend):
    name = "float"
    exact = False
    drop_tol = 1e-14
    tol = 1e-10

    def coerce(self, x: Any) -> complex:
        if isinstance(x, complex):
            return x
        if type(x) is GaussQ or type(x) is QSurd:
            return complex(x)
        if isinstance(x, str):
            return complex(float(Fraction(x)))
        return complex(float(x))

    def coerce_pair(self, re: Any, im: Any) -> complex:
        return complex(float(Fraction(str(re))), float(Fraction(str(im))))

    def is_zero(self, c: complex) -> bool:
        return abs(c) < self.drop_tol

    def is_zero_tol(self, c: complex, tol: Optional[float] = None) -> bool:
        return abs(c) <= (self.tol if tol is None else tol)

    def sqrt(self, c: complex) -> complex:
        return cmath.sqrt(c)

    def to_json(self, c: complex) -> dict:
        return {"re": repr(c.real), "im": repr(c.imag)}


EXACT = ExactBackend()
FLOAT = FloatBackend()


def get_backend(name: Union[str, Backend]) -> Backend:
    if isinstance(name, Backend):
        return name
    if name == "exact":
        return EXACT
    if name == "float":
        return FLOAT
    raise ValueError(f"unknown backend {name!r}")
