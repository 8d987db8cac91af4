"""Exact and floating scalar backends."""
from __future__ import annotations

from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from crsing.scalars import EXACT, FLOAT, BackendMismatch, GaussQ, QSurd, get_backend

rationals = st.fractions(min_value=-100, max_value=100, max_denominator=50)
gauss = st.builds(GaussQ, rationals, rationals)


@given(gauss, gauss, gauss)
def test_field_axioms(a, b, c):
    assert (a + b) + c == a + (b + c)
    assert (a * b) * c == a * (b * c)
    assert a * (b + c) == a * b + a * c
    assert a + b == b + a and a * b == b * a
    assert a - a == GaussQ(0)
    if a:
        assert a * a.inverse() == GaussQ(1)
        assert (b / a) * a == b


@given(gauss, gauss)
def test_conjugation_is_field_automorphism(a, b):
    assert (a * b).conjugate() == a.conjugate() * b.conjugate()
    assert (a + b).conjugate() == a.conjugate() + b.conjugate()
    assert (a * a.conjugate()).is_real()


@given(gauss)
def test_json_round_trip_exact(a):
    assert EXACT.from_json(EXACT.to_json(a)) == a


@given(st.complex_numbers(max_magnitude=1e6, allow_nan=False, allow_infinity=False))
def test_json_round_trip_float(z):
    assert FLOAT.from_json(FLOAT.to_json(z)) == z


@given(gauss)
def test_complex_cast_agrees(a):
    assert abs(complex(a) - complex(float(a.re), float(a.im))) < 1e-12


@pytest.mark.parametrize("x, root", [
    (GaussQ(4), GaussQ(2)),
    (GaussQ(-4), GaussQ(0, 2)),
    (GaussQ(3, 4), GaussQ(2, 1)),
    (GaussQ(Fraction(9, 16)), GaussQ(Fraction(3, 4))),
    (GaussQ(0, 2), GaussQ(1, 1)),
])
def test_exact_sqrt_gaussian(x, root):
    assert EXACT.sqrt(x) == root


@pytest.mark.parametrize("x", [2, 3, Fraction(5, 7), -6])
def test_exact_sqrt_surd(x):
    s = EXACT.sqrt(GaussQ(x))
    assert isinstance(s, QSurd)
    assert s * s == GaussQ(x)
    assert abs(complex(s) ** 2 - x) < 1e-12


def test_surd_json_round_trip():
    s = EXACT.sqrt(GaussQ(3)) + GaussQ(1, 2)
    back = EXACT.from_json(EXACT.to_json(s))
    assert back == s


def test_mixed_radicands_rejected():
    a, b = EXACT.sqrt(GaussQ(2)), EXACT.sqrt(GaussQ(3))
    with pytest.raises(BackendMismatch):
        a + b


@given(st.integers(1, 30))
def test_surd_inverse(k):
    s = EXACT.sqrt(GaussQ(2)) + GaussQ(k)
    assert s * s.inverse() == GaussQ(1)


def test_get_backend():
    assert get_backend("exact") is EXACT
    assert get_backend("float") is FLOAT
    assert get_backend(EXACT) is EXACT
    with pytest.raises(ValueError):
        get_backend("quad")


def test_string_parsing():
    assert EXACT.coerce("2/5") == GaussQ(Fraction(2, 5))
    assert EXACT.coerce_pair("1/2", "-3") == GaussQ(Fraction(1, 2), -3)
