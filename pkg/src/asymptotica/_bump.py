"""Closed-form derivatives of the standard smooth bump exp(-1/(1-x^2)).

Every derivative of B(x) = exp(-1/(1-x^2)) on (-1, 1) has the shape

    B^(k)(x) = P_k(x) * (1 - x^2)^(-2k) * B(x)

with P_k an integer-coefficient polynomial obeying

    P_{k+1} = P_k' * (1-x^2)^2 + 4k x (1-x^2) P_k - 2x P_k,   P_0 = 1.

The recurrence keeps evaluation exact-in-form (no finite differences), which
is what the mollifier and test-function evaluators rely on.
"""

from __future__ import annotations

import numpy as np

_MAX_ORDER = 16

# ascending coefficient lists, cached lazily
_POLYS: list[np.ndarray] = [np.array([1], dtype=object)]


def _poly_mul(a, b):
    return np.convolve(a, b)


def _poly_deriv(a):
    if len(a) == 1:
        return np.array([0], dtype=object)
    return np.array([i * c for i, c in enumerate(a)][1:], dtype=object)


def _bump_poly(k: int) -> np.ndarray:
    """Integer-coefficient polynomial P_k of the derivative recurrence."""
    if k >= _MAX_ORDER:
        raise ValueError(f"bump derivative order {k} exceeds supported maximum {_MAX_ORDER - 1}")
    while len(_POLYS) <= k:
        j = len(_POLYS) - 1
        p = _POLYS[j]
        one_minus_sq = np.array([1, 0, -1], dtype=object)
        term1 = _poly_mul(_poly_deriv(p), _poly_mul(one_minus_sq, one_minus_sq))
        term2 = _poly_mul(np.array([0, 4 * j], dtype=object), _poly_mul(one_minus_sq, p))
        term3 = _poly_mul(np.array([0, -2], dtype=object), p)
        n = max(len(term1), len(term2), len(term3))
        out = np.zeros(n, dtype=object)
        out[: len(term1)] += term1
        out[: len(term2)] += term2
        out[: len(term3)] += term3
        _POLYS.append(out)
    return _POLYS[k]


def bump_deriv(x, k: int = 0):
    """k-th derivative of exp(-1/(1-x^2)), zero outside (-1, 1).

    Vectorized; accepts scalars or ndarrays and returns float64 values.
    """
    x = np.asarray(x, dtype=float)
    scalar = x.ndim == 0
    x = np.atleast_1d(x)
    out = np.zeros_like(x)
    inside = np.abs(x) < 1.0
    if np.any(inside):
        xi = x[inside]
        s = 1.0 - xi * xi
        core = np.exp(-1.0 / s)
        if k == 0:
            out[inside] = core
        else:
            coeffs = _bump_poly(k).astype(float)
            p = np.polynomial.polynomial.polyval(xi, coeffs)
            out[inside] = p * s ** (-2 * k) * core
    return float(out[0]) if scalar else out


def bump_sup_deriv(k: int) -> float:
    """Sampled supremum of |B^(k)| on [-1, 1] with one refinement pass."""
    grid = np.linspace(-1.0, 1.0, 4097)
    vals = np.abs(bump_deriv(grid, k))
    i = int(np.argmax(vals))
    lo = grid[max(i - 1, 0)]
    hi = grid[min(i + 1, len(grid) - 1)]
    fine = np.linspace(lo, hi, 2049)
    return float(max(vals[i], np.max(np.abs(bump_deriv(fine, k)))))
