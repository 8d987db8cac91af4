"""Dense linear algebra over a coefficient backend.

Exact matrices are reduced by Gauss-Jordan elimination on the
backend scalars (no pivot growth issues for the sizes used here); float
matrices go through numpy.
"""
from __future__ import annotations

from typing import Any, Optional, Sequence

import numpy as np

from .scalars import Backend, EXACT

__all__ = [
    "SingularMatrix",
    "eye",
    "zeros",
    "mat_mul",
    "mat_vec",
    "mat_sub",
    "transpose",
    "conj_matrix",
    "mat_inv",
    "det",
    "solve",
    "rref",
    "kernel",
    "rank",
    "to_numpy",
    "mat_equal",
]

Matrix = list


class SingularMatrix(ArithmeticError):
    """Matrix is singular to the backend's tolerance."""


def eye(n: int, backend: Backend = EXACT) -> Matrix:
    o, z = backend.one(), backend.zero()
    return [[o if i == j else z for j in range(n)] for i in range(n)]


def zeros(m: int, n: int, backend: Backend = EXACT) -> Matrix:
    z = backend.zero()
    return [[z] * n for _ in range(m)]


def transpose(A: Sequence[Sequence[Any]]) -> Matrix:
    return [list(r) for r in zip(*A)]


def conj_matrix(A: Sequence[Sequence[Any]], backend: Backend = EXACT) -> Matrix:
    return [[backend.conj(x) for x in r] for r in A]


def mat_mul(A: Sequence[Sequence[Any]], B: Sequence[Sequence[Any]], backend: Backend = EXACT) -> Matrix:
    z = backend.zero()
    Bt = transpose(B)
    out = []
    for r in A:
        row = []
        for c in Bt:
            s = z
            for a, b in zip(r, c):
                if a and b:
                    s = s + a * b
            row.append(s)
        out.append(row)
    return out


def mat_vec(A: Sequence[Sequence[Any]], v: Sequence[Any], backend: Backend = EXACT) -> list:
    z = backend.zero()
    out = []
    for r in A:
        s = z
        for a, b in zip(r, v):
            if a and b:
                s = s + a * b
        out.append(s)
    return out


def mat_sub(A, B) -> Matrix:
    return [[a - b for a, b in zip(r, s)] for r, s in zip(A, B)]


def mat_equal(A, B, backend: Backend = EXACT, tol: Optional[float] = None) -> bool:
    if backend.exact:
        return all(backend.is_zero(a - b) for r, s in zip(A, B) for a, b in zip(r, s))
    return all(backend.is_zero_tol(a - b, tol) for r, s in zip(A, B) for a, b in zip(r, s))


def to_numpy(A: Sequence[Sequence[Any]]) -> np.ndarray:
    return np.array([[complex(x) for x in r] for r in A], dtype=complex)


def _from_numpy(M: np.ndarray, backend: Backend) -> Matrix:
    return [[backend.coerce(complex(x)) for x in r] for r in M]


def _pivot(col: list, start: int, backend: Backend, tol: float) -> Optional[int]:
    if backend.exact:
        for i in range(start, len(col)):
            if col[i]:
                return i
        return None
    best, bi = tol, None
    for i in range(start, len(col)):
        a = abs(col[i])
        if a > best:
            best, bi = a, i
    return bi


def rref(A: Sequence[Sequence[Any]], backend: Backend = EXACT, tol: Optional[float] = None):
    """Reduced row echelon form and pivot columns."""
    M = [list(r) for r in A]
    m = len(M)
    n = len(M[0]) if m else 0
    if tol is None:
        scale = max((abs(complex(x)) for r in M for x in r), default=0.0)
        tol = 0.0 if backend.exact else 1e-9 * max(scale, 1.0)
    pivots = []
    r = 0
    for c in range(n):
        if r >= m:
            break
        p = _pivot([M[i][c] for i in range(m)], r, backend, tol)
        if p is None:
            continue
        M[r], M[p] = M[p], M[r]
        inv = backend.one() / M[r][c]
        M[r] = [x * inv for x in M[r]]
        for i in range(m):
            if i != r:
                f = M[i][c]
                if f:
                    M[i] = [a - f * b for a, b in zip(M[i], M[r])]
        pivots.append(c)
        r += 1
    if not backend.exact:
        M = [[0j if abs(x) < tol else x for x in row] for row in M]
    return M, pivots


def rank(A, backend: Backend = EXACT, tol: Optional[float] = None) -> int:
    if not backend.exact:
        return int(np.linalg.matrix_rank(to_numpy(A), tol=tol))
    return len(rref(A, backend)[1])


def kernel(A, backend: Backend = EXACT, tol: Optional[float] = None) -> list[list]:
    """Basis of the right null space, one vector per free column."""
    if not A:
        return []
    R, piv = rref(A, backend, tol)
    n = len(A[0])
    free = [c for c in range(n) if c not in piv]
    basis = []
    for f in free:
        v = [backend.zero()] * n
        v[f] = backend.one()
        for i, pc in enumerate(piv):
            v[pc] = -R[i][f]
        basis.append(v)
    return basis


def det(A, backend: Backend = EXACT):
    n = len(A)
    if n == 0:
        return backend.one()
    if not backend.exact:
        return complex(np.linalg.det(to_numpy(A)))
    M = [list(r) for r in A]
    d = backend.one()
    for c in range(n):
        p = _pivot([M[i][c] for i in range(n)], c, backend, 0.0)
        if p is None:
            return backend.zero()
        if p != c:
            M[c], M[p] = M[p], M[c]
            d = -d
        piv = M[c][c]
        d = d * piv
        inv = backend.one() / piv
        for i in range(c + 1, n):
            f = M[i][c]
            if f:
                f = f * inv
                M[i] = [a - f * b for a, b in zip(M[i], M[c])]
    return d


def mat_inv(A, backend: Backend = EXACT) -> Matrix:
    n = len(A)
    if not backend.exact:
        N = to_numpy(A)
        if np.linalg.cond(N) > 1e12:
            raise SingularMatrix("matrix is numerically singular")
        return _from_numpy(np.linalg.inv(N), backend)
    aug = [list(r) + e for r, e in zip(A, eye(n, backend))]
    R, piv = rref(aug, backend)
    if piv[:n] != list(range(n)):
        raise SingularMatrix("matrix is singular")
    return [r[n:] for r in R]


def solve(A, b: Sequence[Any], backend: Backend = EXACT) -> list:
    """Solve ``A x = b`` for square nonsingular ``A``."""
    if not backend.exact:
        N = to_numpy(A)
        if np.linalg.cond(N) > 1e12:
            raise SingularMatrix("matrix is numerically singular")
        return [backend.coerce(complex(x)) for x in np.linalg.solve(N, np.array([complex(x) for x in b]))]
    n = len(A)
    aug = [list(r) + [bi] for r, bi in zip(A, b)]
    R, piv = rref(aug, backend)
    if piv[:n] != list(range(n)):
        raise SingularMatrix("matrix is singular")
    return [R[i][n] for i in range(n)]
