"""Exact linear algebra against numpy."""
from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from crsing.linalg import (SingularMatrix, det, eye, kernel, mat_inv, mat_mul, mat_vec, rank, rref, solve,
                           to_numpy)
from crsing.scalars import EXACT, FLOAT, GaussQ

entry = st.builds(GaussQ, st.integers(-5, 5), st.integers(-3, 3))


def matrices(m, n):
    return st.lists(st.lists(entry, min_size=n, max_size=n), min_size=m, max_size=m)


@given(matrices(3, 3))
def test_det_matches_numpy(A):
    assert abs(complex(det(A)) - np.linalg.det(to_numpy(A))) < 1e-8 * (1 + abs(np.linalg.det(to_numpy(A))))


@given(matrices(3, 4))
def test_rank_matches_numpy(A):
    assert rank(A) == np.linalg.matrix_rank(to_numpy(A))


@given(matrices(3, 5))
def test_kernel_vectors_annihilated(A):
    K = kernel(A)
    assert len(K) == 5 - rank(A)
    for v in K:
        assert all(not x for x in mat_vec(A, v))


@given(matrices(3, 3))
def test_inverse(A):
    if not det(A):
        with pytest.raises(SingularMatrix):
            mat_inv(A)
        return
    assert mat_mul(A, mat_inv(A)) == eye(3)


@given(matrices(3, 3), st.lists(entry, min_size=3, max_size=3))
def test_solve(A, b):
    if not det(A):
        return
    x = solve(A, b)
    assert mat_vec(A, x) == b


def test_rref_pivots():
    A = [[GaussQ(1), GaussQ(2)], [GaussQ(2), GaussQ(4)]]
    R, piv = rref(A)
    assert piv == [0]
    assert R[1] == [GaussQ(0), GaussQ(0)]


@settings(max_examples=10)
@given(st.integers(0, 10 ** 6))
def test_float_rank_with_tolerance(seed):
    rng = np.random.default_rng(seed)
    u = rng.normal(size=(4, 1)) + 1j * rng.normal(size=(4, 1))
    v = rng.normal(size=(1, 4))
    A = (u @ v).tolist()
    assert rank(A, FLOAT, tol=1e-9) == 1
