"""m-component degree-k DG functions stored as modal Legendre coefficients.

Layout: coeff[j, i, ℓ] = coefficient of P_ℓ in cell j, component i.

Jump convention: [p] = p⁺ − p⁻ at every interface, where p⁻ is the trace
from the left cell and p⁺ the trace from the right cell.
"""
from __future__ import annotations

from collections.abc import Callable
from dataclasses import dataclass

import numpy as np

from src.shared.errors import MeshError, MissingTraceError
from src.solver.basis import (
    QuadRule,
    endpoint_signs,
    legendre_deriv_table,
    legendre_table,
    mass_diagonal,
)
from src.solver.mesh import Partition1D, cell_points


@dataclass(eq=False)
class DGField:
    coeff: np.ndarray

    def __post_init__(self) -> None:
        self.coeff = np.asarray(self.coeff, dtype=float)
        if self.coeff.ndim != 3:
            raise ValueError(f"coefficients must be (cells, components, modes), got {self.coeff.shape}")

    @classmethod
    def zeros(cls, n_cells: int, n_comp: int, degree: int) -> DGField:
        return cls(np.zeros((n_cells, n_comp, degree + 1)))

    @property
    def n_cells(self) -> int:
        return self.coeff.shape[0]

    @property
    def n_comp(self) -> int:
        return self.coeff.shape[1]

    @property
    def degree(self) -> int:
        return self.coeff.shape[2] - 1

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.coeff.shape

    def eval(self, j: int, s: float) -> np.ndarray:
        """Σ_ℓ coeff[j, i, ℓ] P_ℓ(s) for every component i."""
        if not 0 <= j < self.n_cells:
            raise MeshError(f"cell index {j} out of range [0, {self.n_cells})")
        table = legendre_table(self.degree, np.array([s], dtype=float))[:, 0]
        return self.coeff[j] @ table

    def values_at(self, table: np.ndarray) -> np.ndarray:
        """Point values for a basis table of shape (k+1, n_pts); returns (N, n_pts, m)."""
        return np.einsum("jil,lq->jqi", self.coeff, table)

    def right_traces(self) -> np.ndarray:
        """u(x_{j+1/2}⁻) for every cell, shape (N, m)."""
        return self.coeff.sum(axis=2)

    def left_traces(self) -> np.ndarray:
        """u(x_{j-1/2}⁺) for every cell, shape (N, m)."""
        return self.coeff @ endpoint_signs(self.degree)

    def copy(self) -> DGField:
        return DGField(self.coeff.copy())


@dataclass(frozen=True, eq=False)
class TracePair:
    """One-sided limits at an interface; a side is None at a non-periodic mesh end."""

    _minus: np.ndarray | None
    _plus: np.ndarray | None

    @property
    def minus(self) -> np.ndarray:
        if self._minus is None:
            raise MissingTraceError("no left cell at this boundary interface")
        return self._minus

    @property
    def plus(self) -> np.ndarray:
        if self._plus is None:
            raise MissingTraceError("no right cell at this boundary interface")
        return self._plus

    @property
    def has_minus(self) -> bool:
        return self._minus is not None

    @property
    def has_plus(self) -> bool:
        return self._plus is not None


def jump(minus: np.ndarray, plus: np.ndarray) -> np.ndarray:
    return np.asarray(plus) - np.asarray(minus)


def average(minus: np.ndarray, plus: np.ndarray) -> np.ndarray:
    return 0.5 * (np.asarray(minus) + np.asarray(plus))


def interface_traces(f: DGField, i: int, partition: Partition1D) -> TracePair:
    left, right = partition.neighbours(i)
    minus = f.right_traces()[left] if left is not None else None
    plus = f.left_traces()[right] if right is not None else None
    return TracePair(minus, plus)


def all_interface_traces(f: DGField, partition: Partition1D) -> tuple[np.ndarray, np.ndarray]:
    """(minus, plus) at interfaces 0..N, each shape (N+1, m).

    Periodic meshes wrap; on non-periodic meshes the missing sides of the two
    end interfaces are NaN.
    """
    right, left = f.right_traces(), f.left_traces()
    n, m = right.shape
    minus = np.empty((n + 1, m))
    plus = np.empty((n + 1, m))
    minus[1:] = right
    plus[:-1] = left
    if partition.periodic:
        minus[0] = right[-1]
        plus[-1] = left[0]
    else:
        minus[0] = np.nan
        plus[-1] = np.nan
    return minus, plus


# ── norms ────────────────────────────────────────────────────────────────────

def l2_norm(f: DGField, partition: Partition1D, quad: QuadRule) -> float:
    """√(Σ_j Σ_q w_q (h_j/2) ‖u(x_q)‖²)."""
    values = f.values_at(legendre_table(f.degree, quad.points))
    per_cell = np.einsum("q,jqi->j", quad.weights, values**2)
    return float(np.sqrt(np.sum(0.5 * partition.widths * per_cell)))


def modal_l2_norm(f: DGField, partition: Partition1D) -> float:
    """Same norm from the diagonal mass matrix: √(Σ coeff² h_j/(2ℓ+1))."""
    mass = mass_diagonal(f.degree, partition.widths)
    return float(np.sqrt(np.sum(f.coeff**2 * mass)))


def l2_error(
    f: DGField,
    partition: Partition1D,
    quad: QuadRule,
    exact: Callable[[np.ndarray], np.ndarray],
) -> float:
    """‖exact − f‖ by quadrature; exact maps points (N, n_q) to values (N, n_q, m)."""
    values = f.values_at(legendre_table(f.degree, quad.points))
    diff = exact(cell_points(partition, quad.points)) - values
    per_cell = np.einsum("q,jqi->j", quad.weights, diff**2)
    return float(np.sqrt(np.sum(0.5 * partition.widths * per_cell)))


def boundary_norm(f: DGField) -> float:
    """(Σ_j ‖u⁻_{j+1/2}‖² + ‖u⁺_{j-1/2}‖²)^{1/2}, the cell-boundary norm."""
    return float(np.sqrt(np.sum(f.right_traces() ** 2) + np.sum(f.left_traces() ** 2)))


def derivative_norm(f: DGField, partition: Partition1D, quad: QuadRule) -> float:
    """Broken ‖∂_x u‖, used by the inverse-inequality checks."""
    dvals = f.values_at(legendre_deriv_table(f.degree, quad.points))
    jac = (2.0 / partition.widths)[:, None, None]
    per_cell = np.einsum("q,jqi->j", quad.weights, (jac * dvals) ** 2)
    return float(np.sqrt(np.sum(0.5 * partition.widths * per_cell)))


# ── linear algebra for RK stages ─────────────────────────────────────────────

def _check_same_shape(x: DGField, y: DGField) -> None:
    if x.shape != y.shape:
        raise ValueError(f"shape mismatch {x.shape} vs {y.shape}")


def axpy(a: float, x: DGField, y: DGField) -> DGField:
    """Return a·x + y as a new field."""
    _check_same_shape(x, y)
    return DGField(a * x.coeff + y.coeff)


def scale(a: float, x: DGField) -> DGField:
    return DGField(a * x.coeff)


def copy(x: DGField) -> DGField:
    return x.copy()


def inner(x: DGField, y: DGField, partition: Partition1D) -> float:
    """L2 inner product of two fields through the diagonal mass matrix."""
    _check_same_shape(x, y)
    return float(np.sum(x.coeff * y.coeff * mass_diagonal(x.degree, partition.widths)))


def apply_matrix(M: np.ndarray, f: DGField) -> DGField:
    """Pointwise product M·u for a constant m×m matrix; exact on coefficients."""
    return DGField(np.einsum("ik,jkl->jil", np.asarray(M, dtype=float), f.coeff))


# ── CSV rows ─────────────────────────────────────────────────────────────────

def to_csv_rows(f: DGField) -> list[tuple[int, int, int, float]]:
    """Rows (j, i, ℓ, coeff) in cell-major order."""
    n, m, modes = f.shape
    return [
        (j, i, ell, float(f.coeff[j, i, ell]))
        for j in range(n) for i in range(m) for ell in range(modes)
    ]


def from_csv_rows(rows: list[tuple[int, int, int, float]]) -> DGField:
    n = max(r[0] for r in rows) + 1
    m = max(r[1] for r in rows) + 1
    modes = max(r[2] for r in rows) + 1
    coeff = np.zeros((n, m, modes))
    for j, i, ell, value in rows:
        coeff[int(j), int(i), int(ell)] = float(value)
    return DGField(coeff)
