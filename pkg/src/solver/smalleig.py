"""Eigendecomposition of small (m ≤ 4) real flux Jacobians.

Problems may hand in an analytic decomposition (validated, then used as is);
otherwise the numeric path runs:
  1. eigenvalues: closed form for m ≤ 3, companion-matrix roots for m = 4,
     polished afterwards by Rayleigh quotients diag(L·J·R)
  2. eigenvalues closer than 1e-8·‖J‖ are clustered and share one
     orthonormal invariant-subspace basis taken from the SVD of J − μI
  3. columns normalised to unit length, first significant entry positive,
     sorted by descending eigenvalue, ties by descending eigenvector
  4. L = R⁻¹

A decomposition flagged ``exact=False`` is a flux-equivalent surrogate used
where the Jacobian has no real eigenbasis (see the Buckley–Leverett problem):
only L·R = I is checked for it.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from src.shared.errors import (
    DefectiveJacobianError,
    EigenDecompositionError,
    NonSymmetrizableJacobianError,
)

MAX_COMPONENTS = 4
CLUSTER_TOL = 1e-8
IMAG_TOL = 1e-8
DEFECT_TOL = 1e-6
INVARIANT_TOL = 1e-10
# closed-form discriminants this close to zero are treated as exact double roots
ROOT_SNAP = 1e-13


@dataclass(frozen=True, eq=False)
class EigenDecomp:
    lam: np.ndarray
    R: np.ndarray
    L: np.ndarray
    exact: bool = True


@dataclass(frozen=True, eq=False)
class EigenBatch:
    """Decompositions for a batch of interfaces: lam (n, m), R and L (n, m, m)."""

    lam: np.ndarray
    R: np.ndarray
    L: np.ndarray
    exact: np.ndarray

    def __len__(self) -> int:
        return self.lam.shape[0]

    def __getitem__(self, i: int) -> EigenDecomp:
        return EigenDecomp(self.lam[i], self.R[i], self.L[i], bool(self.exact[i]))

    @classmethod
    def stack(cls, items: list[EigenDecomp]) -> EigenBatch:
        return cls(
            lam=np.stack([d.lam for d in items]),
            R=np.stack([d.R for d in items]),
            L=np.stack([d.L for d in items]),
            exact=np.array([d.exact for d in items], dtype=bool),
        )


def _spectral_norm(J: np.ndarray) -> np.ndarray:
    return np.linalg.norm(J, ord=2, axis=(-2, -1))


def _charpoly(J: np.ndarray) -> np.ndarray:
    """Monic characteristic polynomial coefficients by Faddeev–LeVerrier."""
    m = J.shape[0]
    coeffs = np.zeros(m + 1)
    coeffs[0] = 1.0
    M = np.zeros_like(J)
    for k in range(1, m + 1):
        M = J @ M + coeffs[k - 1] * np.eye(m)
        coeffs[k] = -np.trace(J @ M) / k
    return coeffs


def _cubic_roots(coeffs: np.ndarray, norm: float) -> np.ndarray:
    """Real roots of s³ + a s² + b s + c by the trigonometric (Viète) form."""
    _, a, b, c = coeffs
    p = (b - a * a / 3.0) / norm**2
    q = (2.0 * a**3 / 27.0 - a * b / 3.0 + c) / norm**3
    if -(4.0 * p**3 + 27.0 * q * q) < -IMAG_TOL:
        raise NonSymmetrizableJacobianError(
            "non-symmetrizable Jacobian: cubic characteristic polynomial has complex roots"
        )
    if p > -1e-14:
        t = np.full(3, np.cbrt(-q))
    else:
        radius = 2.0 * np.sqrt(-p / 3.0)
        arg = np.clip(3.0 * q / (p * radius), -1.0, 1.0)
        if 1.0 - abs(arg) < ROOT_SNAP:
            arg = np.sign(arg)
        phi = np.arccos(arg) / 3.0
        t = radius * np.cos(phi - 2.0 * np.pi * np.arange(3) / 3.0)
    return t * norm - a / 3.0


def _eigenvalues(J: np.ndarray, norm: float) -> np.ndarray:
    m = J.shape[0]
    if m == 1:
        return np.array([J[0, 0]])
    if m == 2:
        half_tr = 0.5 * (J[0, 0] + J[1, 1])
        det = J[0, 0] * J[1, 1] - J[0, 1] * J[1, 0]
        disc = half_tr * half_tr - det
        if abs(disc) < ROOT_SNAP * norm**2:
            disc = 0.0
        if disc < -(IMAG_TOL * norm) ** 2:
            raise NonSymmetrizableJacobianError(
                f"non-symmetrizable Jacobian: complex eigenvalues (discriminant {disc:.3e})"
            )
        root = np.sqrt(max(disc, 0.0))
        return np.array([half_tr + root, half_tr - root])
    coeffs = _charpoly(J)
    if m == 3:
        return _cubic_roots(coeffs, norm)
    roots = np.roots(coeffs)
    if np.max(np.abs(roots.imag)) > 1e-6 * norm:
        raise NonSymmetrizableJacobianError(
            f"non-symmetrizable Jacobian: complex eigenvalues {roots}"
        )
    return roots.real


def _canonical_sign(v: np.ndarray) -> np.ndarray:
    significant = np.flatnonzero(np.abs(v) > 1e-12 * np.max(np.abs(v)))
    return -v if v[significant[0]] < 0 else v


def _numeric(J: np.ndarray) -> EigenDecomp:
    m = J.shape[0]
    norm = float(_spectral_norm(J))
    if norm == 0.0:
        eye = np.eye(m)
        return EigenDecomp(np.zeros(m), eye, eye.copy())

    lam = np.sort(_eigenvalues(J, norm))[::-1]
    # group into clusters of (numerically) repeated eigenvalues
    clusters: list[list[float]] = [[lam[0]]]
    for value in lam[1:]:
        if abs(clusters[-1][-1] - value) < CLUSTER_TOL * norm:
            clusters[-1].append(value)
        else:
            clusters.append([value])

    columns: list[tuple[float, np.ndarray, bool]] = []
    for cluster in clusters:
        mu = float(np.mean(cluster))
        mult = len(cluster)
        _, sigma, vh = np.linalg.svd(J - mu * np.eye(m))
        if mult > 1 and sigma[m - mult] > DEFECT_TOL * norm:
            raise DefectiveJacobianError(
                f"defective Jacobian: eigenvalue {mu:.6e} of multiplicity {mult} "
                f"has a {m - int(np.sum(sigma <= DEFECT_TOL * norm))}-dimensional eigenspace"
            )
        for v in vh[m - mult:]:
            columns.append((mu, _canonical_sign(v / np.linalg.norm(v)), mult == 1))

    columns.sort(key=lambda c: (-c[0], tuple(-c[1])))
    lam_out = np.array([c[0] for c in columns])
    R = np.stack([c[1] for c in columns], axis=1)
    if np.linalg.cond(R) > 1e12:
        raise DefectiveJacobianError("defective Jacobian: eigenvectors are linearly dependent")
    L = np.linalg.inv(R)
    simple = np.array([c[2] for c in columns])
    lam_out = np.where(simple, np.diag(L @ J @ R), lam_out)
    residual = np.max(np.abs(J @ R - R * lam_out[None, :]))
    if residual > DEFECT_TOL * norm:
        raise DefectiveJacobianError(f"defective Jacobian: residual {residual:.3e}")
    return EigenDecomp(lam_out, R, L)


def check_decomposition(J: np.ndarray, eig: EigenDecomp) -> None:
    """Raise EigenDecompositionError unless eig satisfies L·R = I and J·R = R·Λ."""
    m = J.shape[0]
    if eig.lam.shape != (m,) or eig.R.shape != (m, m) or eig.L.shape != (m, m):
        raise EigenDecompositionError("decomposition shape does not match the Jacobian")
    if not (np.all(np.isfinite(eig.lam)) and np.all(np.isreal(eig.lam))):
        raise NonSymmetrizableJacobianError("eigenvalues must be real and finite")
    if np.max(np.abs(eig.L @ eig.R - np.eye(m))) > INVARIANT_TOL:
        raise EigenDecompositionError("left eigenvectors are not the inverse of the right ones")
    if eig.exact:
        residual = np.max(np.abs(J @ eig.R - eig.R * eig.lam[None, :]))
        if residual > INVARIANT_TOL * float(_spectral_norm(J)) + 1e-14:
            raise EigenDecompositionError(f"J·R ≠ R·Λ (residual {residual:.3e})")


def decompose(J: np.ndarray, analytic_hint: EigenDecomp | None = None) -> EigenDecomp:
    J = np.asarray(J, dtype=float)
    if J.ndim != 2 or J.shape[0] != J.shape[1]:
        raise EigenDecompositionError(f"Jacobian must be square, got shape {J.shape}")
    if J.shape[0] > MAX_COMPONENTS:
        raise EigenDecompositionError(f"only m ≤ {MAX_COMPONENTS} is supported, got {J.shape[0]}")
    if analytic_hint is not None:
        check_decomposition(J, analytic_hint)
        return analytic_hint
    return _numeric(J)


def check_batch(J: np.ndarray, batch: EigenBatch) -> None:
    """Vectorised check_decomposition over interfaces; the error names the interface."""
    n, m, _ = J.shape
    eye = np.eye(m)
    if not np.all(np.isfinite(batch.lam)):
        bad = int(np.flatnonzero(~np.all(np.isfinite(batch.lam), axis=1))[0])
        raise NonSymmetrizableJacobianError("non-finite eigenvalue", interface=bad)
    inv_err = np.max(np.abs(batch.L @ batch.R - eye), axis=(1, 2))
    if np.any(inv_err > INVARIANT_TOL):
        bad = int(np.argmax(inv_err))
        raise EigenDecompositionError(
            f"left eigenvectors are not the inverse of the right ones ({inv_err[bad]:.3e})",
            interface=bad,
        )
    residual = np.max(np.abs(J @ batch.R - batch.R * batch.lam[:, None, :]), axis=(1, 2))
    tol = INVARIANT_TOL * _spectral_norm(J) + 1e-14
    violated = batch.exact & (residual > tol)
    if np.any(violated):
        bad = int(np.flatnonzero(violated)[0])
        raise EigenDecompositionError(f"J·R ≠ R·Λ (residual {residual[bad]:.3e})", interface=bad)


def decompose_batch(J: np.ndarray, analytic_hint: EigenBatch | None = None) -> EigenBatch:
    """Decompose Jacobians J of shape (n, m, m), one per interface."""
    J = np.asarray(J, dtype=float)
    if analytic_hint is not None:
        check_batch(J, analytic_hint)
        return analytic_hint
    items = []
    for i, Ji in enumerate(J):
        try:
            items.append(_numeric(Ji))
        except EigenDecompositionError as exc:
            raise type(exc)(exc.detail, interface=i) from exc
    return EigenBatch.stack(items)
