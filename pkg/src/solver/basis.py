"""Legendre modal basis on the reference element [-1, 1] and Gauss–Legendre quadrature.

The element mass matrix in this basis is diagonal, h_j/(2ℓ+1), so every
mass inversion in the solver is a division.
"""
from __future__ import annotations

import functools
from dataclasses import dataclass

import numpy as np

from src.shared.errors import LDGError

MAX_QUAD_POINTS = 64
_NEWTON_MAX_ITER = 20


@dataclass(frozen=True, eq=False)
class QuadRule:
    points: np.ndarray
    weights: np.ndarray

    @property
    def n_points(self) -> int:
        return self.points.size


def legendre_eval(ell: int, s: float | np.ndarray) -> float | np.ndarray:
    """P_ell(s) by the three-term recurrence."""
    s = np.asarray(s, dtype=float)
    p_prev, p = np.ones_like(s), s.copy()
    if ell == 0:
        p = p_prev
    else:
        for n in range(1, ell):
            p_prev, p = p, ((2 * n + 1) * s * p - n * p_prev) / (n + 1)
    return float(p) if p.ndim == 0 else p


def legendre_deriv(ell: int, s: float | np.ndarray) -> float | np.ndarray:
    """dP_ell/ds via P'_{n+1} = P'_{n-1} + (2n+1) P_n."""
    s = np.asarray(s, dtype=float)
    d = np.zeros((max(ell, 1) + 1,) + s.shape)
    p = np.zeros_like(d)
    p[0] = 1.0
    if ell >= 1:
        p[1] = s
        d[1] = 1.0
    for n in range(1, ell):
        p[n + 1] = ((2 * n + 1) * s * p[n] - n * p[n - 1]) / (n + 1)
        d[n + 1] = d[n - 1] + (2 * n + 1) * p[n]
    out = d[ell]
    return float(out) if out.ndim == 0 else out


def legendre_table(k: int, s: np.ndarray) -> np.ndarray:
    """Values P_0..P_k at points s, shape (k+1, len(s))."""
    return np.stack([np.atleast_1d(legendre_eval(ell, s)) for ell in range(k + 1)])


def legendre_deriv_table(k: int, s: np.ndarray) -> np.ndarray:
    """Derivatives P'_0..P'_k at points s, shape (k+1, len(s))."""
    return np.stack([np.atleast_1d(legendre_deriv(ell, s)) for ell in range(k + 1)])


def endpoint_signs(k: int) -> np.ndarray:
    """P_ell(-1) = (-1)^ell for ell = 0..k; P_ell(+1) = 1 needs no table."""
    return (-1.0) ** np.arange(k + 1)


def mass_diagonal(k: int, widths: np.ndarray) -> np.ndarray:
    """Modal mass matrix entries h_j/(2ℓ+1), shape (N, 1, k+1) to broadcast over components."""
    return (np.asarray(widths)[:, None] / (2.0 * np.arange(k + 1) + 1.0))[:, None, :]


@functools.lru_cache(maxsize=MAX_QUAD_POINTS)
def quad_rule(n_points: int) -> QuadRule:
    """n-point Gauss–Legendre rule on [-1, 1].

    numpy's rule seeds the nodes, then Newton iteration on P_n polishes them;
    weights are 2/((1-s^2) P_n'(s)^2).
    """
    if int(n_points) != n_points or not 1 <= n_points <= MAX_QUAD_POINTS:
        raise LDGError(f"unsupported quadrature size {n_points!r} (1..{MAX_QUAD_POINTS})")
    n = int(n_points)
    s, _ = np.polynomial.legendre.leggauss(n)
    for _ in range(_NEWTON_MAX_ITER):
        step = legendre_eval(n, s) / legendre_deriv(n, s)
        s = s - step
        if np.max(np.abs(step)) < 1e-16:
            break
    s = np.sort(s)
    weights = 2.0 / ((1.0 - s**2) * legendre_deriv(n, s) ** 2)
    s = np.atleast_1d(s)
    weights = np.atleast_1d(weights)
    s.setflags(write=False)
    weights.setflags(write=False)
    return QuadRule(points=s, weights=weights)
