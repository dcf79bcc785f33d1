"""1D partitions of an interval.

Interfaces are indexed 0..N: interface j sits at nodes[j], i.e. the
half-integer point x_{j-1/2}. Cell j spans (nodes[j], nodes[j+1]). On a
periodic mesh interface N is the same trace pair as interface 0.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from src.shared.errors import MeshError


@dataclass(frozen=True, eq=False)
class Partition1D:
    x_lo: float
    x_hi: float
    nodes: np.ndarray
    widths: np.ndarray
    periodic: bool
    gamma: float

    def __post_init__(self) -> None:
        nodes = np.array(self.nodes, dtype=float)
        widths = np.array(self.widths, dtype=float)
        if nodes.ndim != 1 or nodes.size < 2:
            raise MeshError("a partition needs at least two nodes")
        if widths.shape != (nodes.size - 1,) or not np.all(widths > 0):
            raise MeshError("widths must be positive, one per cell")
        if not np.all(np.diff(nodes) > 0):
            raise MeshError("nodes must be strictly increasing")
        if nodes[0] != self.x_lo or nodes[-1] != self.x_hi:
            raise MeshError("end nodes must coincide with the interval ends")
        if self.gamma <= 0 or widths.min() < self.gamma * widths.max() * (1 - 1e-12):
            raise MeshError(f"quasi-uniformity witness gamma={self.gamma} does not hold")
        nodes.setflags(write=False)
        widths.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "widths", widths)

    @property
    def n_cells(self) -> int:
        return self.widths.size

    @property
    def n_interfaces(self) -> int:
        return self.widths.size + 1

    @property
    def h(self) -> float:
        """Maximum cell width."""
        return float(self.widths.max())

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.nodes[:-1] + self.nodes[1:])

    def check_cell(self, j: int) -> None:
        if not 0 <= j < self.n_cells:
            raise MeshError(f"cell index {j} out of range [0, {self.n_cells})")

    def check_interface(self, i: int) -> None:
        if not 0 <= i <= self.n_cells:
            raise MeshError(f"interface index {i} out of range [0, {self.n_cells}]")

    def neighbours(self, i: int) -> tuple[int | None, int | None]:
        """(left cell, right cell) of interface i; None where the mesh ends."""
        self.check_interface(i)
        n = self.n_cells
        left = i - 1 if i > 0 else (n - 1 if self.periodic else None)
        right = i if i < n else (0 if self.periodic else None)
        return left, right


def build_uniform(x_lo: float, x_hi: float, n_cells: int, periodic: bool) -> Partition1D:
    """Uniform partition of (x_lo, x_hi) into n_cells cells."""
    if int(n_cells) != n_cells or n_cells < 1:
        raise MeshError(f"cell count must be a positive integer, got {n_cells!r}")
    if not x_hi > x_lo:
        raise MeshError(f"inverted interval ({x_lo}, {x_hi})")
    n_cells = int(n_cells)
    x_lo, x_hi = float(x_lo), float(x_hi)
    width = (x_hi - x_lo) / n_cells
    nodes = x_lo + width * np.arange(n_cells + 1, dtype=float)
    nodes[-1] = x_hi
    widths = np.full(n_cells, width)
    return Partition1D(x_lo=x_lo, x_hi=x_hi, nodes=nodes, widths=widths,
                       periodic=bool(periodic), gamma=1.0)


def to_physical(p: Partition1D, j: int, s: float | np.ndarray) -> float | np.ndarray:
    """Map reference coordinate s in [-1, 1] of cell j to x = x_j + s*h_j/2.

    Written as the convex combination of the two cell nodes so that s = ±1
    returns the nodes exactly.
    """
    p.check_cell(j)
    s = np.asarray(s, dtype=float)
    if np.any(np.abs(s) > 1.0):
        raise MeshError("reference coordinate outside [-1, 1]")
    x = 0.5 * (1.0 - s) * p.nodes[j] + 0.5 * (1.0 + s) * p.nodes[j + 1]
    return float(x) if x.ndim == 0 else x


def cell_points(p: Partition1D, s: np.ndarray) -> np.ndarray:
    """Physical coordinates of reference points s in every cell, shape (N, len(s))."""
    s = np.asarray(s, dtype=float)
    return (0.5 * (1.0 - s)[None, :] * p.nodes[:-1, None]
            + 0.5 * (1.0 + s)[None, :] * p.nodes[1:, None])
