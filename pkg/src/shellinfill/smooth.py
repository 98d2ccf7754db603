"""Smooth (log-sum-exp) replacements for min/max and their weights.

The aggregate with parameter L is

    agg(x; L) = log(sum_i exp(L * x_i)) / L

which approaches max(x) for large positive L and min(x) for large negative
L.  Everything here is evaluated in max-shifted form so no input magnitude
can overflow; for L > 0 the result lies in [max(x), max(x) + log(m)/L] and
for L < 0 in [min(x) - log(m)/|L|, min(x)].
"""

from __future__ import annotations

import numpy as np


def ks_aggregate(values: np.ndarray, L: float) -> float:
    """Smooth max (L > 0) or smooth min (L < 0) of a 1-D array."""
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        raise ValueError("cannot aggregate an empty array")
    # shift by the dominant term: max(L*x) = L*max(x) for L>0, L*min(x) for L<0
    shift = v.max() if L > 0 else v.min()
    return float(shift + np.log(np.exp(L * (v - shift)).sum()) / L)


def ks_weights(values: np.ndarray, L: float) -> np.ndarray:
    """Gradient of ks_aggregate: convex weights exp(L x_i)/sum exp(L x_j)."""
    v = np.asarray(values, dtype=float)
    shift = v.max() if L > 0 else v.min()
    e = np.exp(L * (v - shift))
    return e / e.sum()


def ks_pair(a: np.ndarray, b: np.ndarray, L: float) -> np.ndarray:
    """Elementwise smooth max/min of two same-shape arrays."""
    hi = np.maximum(a, b) if L > 0 else np.minimum(a, b)
    lo = np.minimum(a, b) if L > 0 else np.maximum(a, b)
    # second term is exp of a non-positive exponent; no overflow possible
    return hi + np.log1p(np.exp(L * (lo - hi))) / L


def ks_pair_weights(a: np.ndarray, b: np.ndarray, L: float) -> tuple[np.ndarray, np.ndarray]:
    """Elementwise weights (w_a, w_b) of ks_pair; w_a + w_b = 1, both >= 0."""
    shift = np.maximum(a, b) if L > 0 else np.minimum(a, b)
    ea = np.exp(L * (a - shift))
    eb = np.exp(L * (b - shift))
    s = ea + eb
    return ea / s, eb / s
