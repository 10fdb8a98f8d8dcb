"""Numerical core: pairwise RBF mean reductions.

Every prior covariance entry of the multi-task model averages an RBF kernel
over the cross product of two Monte Carlo sample blocks, so this reduction
dominates Gram assembly.  A Cython extension provides the fast path; a pure
numpy implementation is selected at import when the extension is missing or
``DAGGP_DISABLE_EXT`` is set.  Both expose the same two functions and agree
to floating-point accuracy.
"""

import os

import numpy as np

from . import fallback as _fallback

if os.environ.get("DAGGP_DISABLE_EXT"):
    _impl = _fallback
    IMPLEMENTATION = "numpy"
else:
    try:
        from . import _pairwise as _impl

        IMPLEMENTATION = "compiled"
    except ImportError:
        _impl = _fallback
        IMPLEMENTATION = "numpy"

__all__ = ["IMPLEMENTATION", "pair_mean_rbf", "self_mean_rbf"]


def _prep(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=np.float64)
    if a.ndim != 2:
        raise ValueError("sample block must be 2-D")
    return a


def pair_mean_rbf(a: np.ndarray, b: np.ndarray, inv_two_l2: float, variance: float) -> float:
    """variance * mean over all (i, j) of exp(-inv_two_l2 * ||a_i - b_j||^2)."""
    a = _prep(a)
    b = _prep(b)
    if a.shape[1] != b.shape[1]:
        raise ValueError("sample blocks differ in dimension")
    return float(_impl.pair_mean_rbf(a, b, float(inv_two_l2), float(variance)))


def self_mean_rbf(a: np.ndarray, inv_two_l2: float, variance: float) -> float:
    """pair_mean_rbf of a block with itself (diagonal pairs included)."""
    a = _prep(a)
    return float(_impl.self_mean_rbf(a, float(inv_two_l2), float(variance)))
