"""Formal computations for real analytic manifolds with CR singularities.

Truncated power series over exact Gaussian rationals (or complex
floats), deck-involution families of quadric-like manifolds, resonance
bookkeeping and normal forms for the associated commuting maps.
"""
from __future__ import annotations

from .scalars import EXACT, FLOAT, GaussQ, QSurd, get_backend
from .series import AntiholomorphicJetMap, JetMap, TruncatedSeries, jet_compose, jet_invert

__version__ = "0.1.0"

__all__ = [
    "EXACT",
    "FLOAT",
    "GaussQ",
    "QSurd",
    "get_backend",
    "TruncatedSeries",
    "JetMap",
    "AntiholomorphicJetMap",
    "jet_compose",
    "jet_invert",
]
