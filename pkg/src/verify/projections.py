"""Projections onto the DG space: L2, generalized Gauss–Radau (GGR), and the
modified projection of the auxiliary variable.

A GGR projection keeps the L2 moments of modes 0..k−1 and closes each cell
with a θ-weighted endpoint condition:

  plus side   (πz)^(θ)  = z^(θ)  at x_{j+1/2}
  minus side  (πz)^(θ̄) = z^(θ̄) at x_{j−1/2}

Only the mode-k coefficients remain unknown, and under periodicity they
solve a circulant system diag·a_j + off·a_{j+shift} = c_j:

  plus side   diag = θ,        off = θ̄(−1)^k, shift = +1
  minus side  diag = θ(−1)^k,  off = θ̄,       shift = −1

with det = diag^N − (−off)^N and inverse circ(1, q, …, q^{N−1})/(diag(1−q^N)),
q = −off/diag.
"""
from __future__ import annotations

from collections.abc import Callable
from dataclasses import dataclass
from typing import Literal

import numpy as np
import scipy.sparse
import scipy.sparse.linalg
import structlog

from src.shared.errors import LDGError, MeshError, SingularSystemError
from src.solver.basis import QuadRule, legendre_table, quad_rule
from src.solver.field import DGField
from src.solver.mesh import Partition1D, cell_points
from src.solver.problems import ProblemSpec
from src.solver.smalleig import EigenBatch

log = structlog.get_logger()

Side = Literal["plus", "minus"]

SINGULAR_TOL = 1e-13


# ── L2 projection ────────────────────────────────────────────────────────────

def l2_project(
    func: Callable[[np.ndarray], np.ndarray],
    partition: Partition1D,
    k: int,
    quad: QuadRule | None = None,
) -> DGField:
    """coeff[j, i, ℓ] = (2ℓ+1)/h_j·∫_{I_j} func_i·P_ℓ dx.

    func maps points (N, n_q) to (N, n_q, m), or to (N, n_q) for a scalar.
    """
    quad = quad or quad_rule(k + 3)
    table = legendre_table(k, quad.points)
    values = np.asarray(func(cell_points(partition, quad.points)), dtype=float)
    if values.ndim == 2:
        values = values[..., None]
    weights = (2.0 * np.arange(k + 1) + 1.0)[:, None] / 2.0 * table * quad.weights
    return DGField(np.einsum("lq,jqi->jil", weights, values))


# ── circulant systems ────────────────────────────────────────────────────────

@dataclass(frozen=True, eq=False)
class CirculantSystem:
    """diag·a_j + off·a_{(j+shift) mod n} = rhs_j for j = 0..n−1."""

    n: int
    diag: float
    off: float
    shift: int
    rhs: np.ndarray

    def __post_init__(self) -> None:
        if self.shift not in (1, -1):
            raise LDGError(f"circulant shift must be ±1, got {self.shift}")
        rhs = np.asarray(self.rhs, dtype=float)
        if rhs.shape[0] != self.n:
            raise LDGError(f"rhs has {rhs.shape[0]} rows for a system of size {self.n}")
        object.__setattr__(self, "rhs", rhs)

    @property
    def q(self) -> float:
        return -self.off / self.diag if self.diag != 0 else np.inf

    @property
    def determinant(self) -> float:
        return self.diag**self.n - (-self.off) ** self.n

    @property
    def first_row(self) -> np.ndarray:
        row = np.zeros(self.n)
        row[0] += self.diag
        row[self.shift % self.n] += self.off
        return row

    def dense(self) -> np.ndarray:
        M = self.diag * np.eye(self.n)
        cols = (np.arange(self.n) + self.shift) % self.n
        M[np.arange(self.n), cols] += self.off
        return M

    def transposed_roles(self) -> CirculantSystem:
        """Same system written for b_j = a_{j+shift}: off·b_j + diag·b_{j−shift} = rhs_j."""
        return CirculantSystem(self.n, self.off, self.diag, -self.shift, self.rhs)


def circulant_solve(sys: CirculantSystem) -> np.ndarray:
    """Solve through the explicit circulant inverse in one O(n) sweep.

    a_0 comes from the geometric series Σ q^n c_{shift·n}; the remaining
    unknowns follow by back-substitution along the direction where the
    recurrence contracts (|q| ≤ 1). rhs may carry trailing axes.
    """
    if abs(sys.off) > abs(sys.diag):
        b = circulant_solve(sys.transposed_roles())
        return np.roll(b, sys.shift, axis=0)
    n, d, o, s = sys.n, sys.diag, sys.off, sys.shift
    if d == 0:
        raise SingularSystemError("circulant system with zero coefficients")
    q = -o / d
    denom = 1.0 - q**n
    if abs(denom) < SINGULAR_TOL:
        raise SingularSystemError(
            f"singular circulant system (q={q:.6g}, n={n}, det={sys.determinant:.3e})"
        )
    c = sys.rhs
    order = (s * np.arange(n)) % n
    powers = q ** np.arange(n)
    a = np.empty_like(c)
    a[0] = np.tensordot(powers, c[order], axes=(0, 0)) / (d * denom)
    # a_j = (c_j − off·a_{j+s}) / diag, walking j = −s, −2s, …
    for i in range(1, n):
        j = (-s * i) % n
        a[j] = (c[j] - o * a[(j + s) % n]) / d
    return a


# ── scalar GGR ───────────────────────────────────────────────────────────────

def _require_periodic(partition: Partition1D) -> None:
    if not partition.periodic:
        raise MeshError("GGR projections are defined globally on periodic meshes only")


def _side_system(side: Side, k: int, theta: float) -> tuple[float, float, int]:
    theta_bar = 1.0 - theta
    parity = (-1.0) ** k
    if side == "plus":
        return theta, theta_bar * parity, 1
    if side == "minus":
        return theta * parity, theta_bar, -1
    raise LDGError(f"unknown GGR side {side!r}")


def _endpoint_rhs(coeff: np.ndarray, z_left: np.ndarray, z_right: np.ndarray,
                  theta: float, side: Side) -> np.ndarray:
    """Weighted endpoint data minus the contribution of modes 0..k−1.

    coeff (N, …, k+1) holds the lower modes (mode k ignored); z_left/z_right
    are the one-sided limits of z at the left/right end of every cell.
    """
    k = coeff.shape[-1] - 1
    lower = coeff[..., :k]
    right_lower = lower.sum(axis=-1)
    left_lower = lower @ ((-1.0) ** np.arange(k)) if k else np.zeros(coeff.shape[:-1])
    theta_bar = 1.0 - theta
    if side == "plus":
        # interface j+1/2: minus trace from cell j, plus trace from cell j+1
        z_w = theta * z_right + theta_bar * np.roll(z_left, -1, axis=0)
        return z_w - theta * right_lower - theta_bar * np.roll(left_lower, -1, axis=0)
    # interface j−1/2: minus trace from cell j−1, plus trace from cell j
    z_w = theta_bar * np.roll(z_right, 1, axis=0) + theta * z_left
    return z_w - theta_bar * np.roll(right_lower, 1, axis=0) - theta * left_lower


def ggr_from_moments(coeff: np.ndarray, z_left: np.ndarray, z_right: np.ndarray,
                     theta: float, side: Side, extra: np.ndarray | None = None) -> np.ndarray:
    """Replace mode k of L2 coefficients (N, …, k+1) by the GGR closure.

    ``extra`` is added to the endpoint right-hand side (the modified
    projection's correction c_j).
    """
    k = coeff.shape[-1] - 1
    rhs = _endpoint_rhs(coeff, z_left, z_right, theta, side)
    if extra is not None:
        rhs = rhs + extra
    diag, off, shift = _side_system(side, k, theta)
    out = coeff.copy()
    out[..., k] = circulant_solve(CirculantSystem(coeff.shape[0], diag, off, shift, rhs))
    return out


def ggr_scalar(
    z: Callable[[np.ndarray], np.ndarray],
    partition: Partition1D,
    k: int,
    theta: float,
    side: Side,
    quad: QuadRule | None = None,
) -> DGField:
    """Scalar GGR projection of a continuous z; returns an (N, 1, k+1) field."""
    _require_periodic(partition)
    coeff = l2_project(z, partition, k, quad).coeff[:, 0, :]
    nodes = partition.nodes
    closed = ggr_from_moments(coeff, z(nodes[:-1]), z(nodes[1:]), theta, side)
    return DGField(closed[:, None, :])


# ── vector GGR ───────────────────────────────────────────────────────────────

def cell_frozen(eig: EigenBatch, n_cells: int) -> EigenBatch:
    """Per-cell decompositions taken from each cell's right interface.

    eig holds interfaces 0..N−1 (periodic); cell j uses interface j+1.
    """
    idx = (np.arange(n_cells) + 1) % n_cells
    return EigenBatch(lam=eig.lam[idx], R=eig.R[idx], L=eig.L[idx], exact=eig.exact[idx])


def interface_decompositions(problem: ProblemSpec, u: Callable[[np.ndarray], np.ndarray],
                             partition: Partition1D) -> EigenBatch:
    """Decompositions of f′ at u(x_{j−1/2}) for interfaces 0..N−1."""
    return problem.decompose(np.asarray(u(partition.nodes[:-1]), dtype=float))


def _solve_mixed_sides(plus: np.ndarray, k: int, theta: float, rhs: np.ndarray) -> np.ndarray:
    """Mode-k unknowns when the projection side changes from cell to cell."""
    n = plus.size
    theta_bar = 1.0 - theta
    parity = (-1.0) ** k
    rows = np.arange(n)
    diag = np.where(plus, theta, theta * parity)
    off = np.where(plus, theta_bar * parity, theta_bar)
    cols = np.where(plus, (rows + 1) % n, (rows - 1) % n)
    matrix = scipy.sparse.csr_matrix(
        (np.concatenate([diag, off]), (np.concatenate([rows, rows]), np.concatenate([rows, cols]))),
        shape=(n, n),
    )
    solution = scipy.sparse.linalg.spsolve(matrix.tocsc(), rhs)
    if not np.all(np.isfinite(solution)):
        raise SingularSystemError("singular mixed-side GGR system")
    return solution


def ggr_vector(
    u: Callable[[np.ndarray], np.ndarray],
    partition: Partition1D,
    k: int,
    theta: float,
    eig: EigenBatch,
    quad: QuadRule | None = None,
) -> DGField:
    """Characteristic GGR projection of a continuous vector function u.

    Per cell j: z = L_{j+1/2}·u, scalar GGR per field i on the plus side
    where λ_i ≥ 0 and the minus side where λ_i < 0, then πu = R_{j+1/2}·πz.
    """
    _require_periodic(partition)
    n = partition.n_cells
    frozen = cell_frozen(eig, n)
    u_coeff = l2_project(u, partition, k, quad).coeff
    nodes = partition.nodes
    u_left = np.asarray(u(nodes[:-1]), dtype=float)
    u_right = np.asarray(u(nodes[1:]), dtype=float)

    z_coeff = np.einsum("jik,jkl->jil", frozen.L, u_coeff)
    z_left = np.einsum("jik,jk->ji", frozen.L, u_left)
    z_right = np.einsum("jik,jk->ji", frozen.L, u_right)

    z_proj = z_coeff.copy()
    for i in range(u_coeff.shape[1]):
        plus = frozen.lam[:, i] >= 0.0
        if plus.all() or not plus.any():
            side: Side = "plus" if plus.all() else "minus"
            z_proj[:, i, :] = ggr_from_moments(
                z_coeff[:, i, :], z_left[:, i], z_right[:, i], theta, side
            )
            continue
        log.debug("ggr_mixed_sides", field=i, plus_cells=int(plus.sum()), n_cells=n)
        rhs_plus = _endpoint_rhs(z_coeff[:, i, :], z_left[:, i], z_right[:, i], theta, "plus")
        rhs_minus = _endpoint_rhs(z_coeff[:, i, :], z_left[:, i], z_right[:, i], theta, "minus")
        z_proj[:, i, k] = _solve_mixed_sides(plus, k, theta, np.where(plus, rhs_plus, rhs_minus))
    return DGField(np.einsum("jik,jkl->jil", frozen.R, z_proj))


# ── modified projection of p ─────────────────────────────────────────────────

def modified_correction(
    u: Callable[[np.ndarray], np.ndarray],
    problem: ProblemSpec,
    partition: Partition1D,
    k: int,
    theta: float,
    eig: EigenBatch | None = None,
    quad: QuadRule | None = None,
) -> np.ndarray:
    """c_j = −A^{−1/2}·(f′(u)·η_u^(θ)) at x_{j−1/2}, with η_u = u − π^θ u; shape (N, m)."""
    if not problem.linear_diffusion:
        raise LDGError("the modified projection needs constant diffusion")
    S = problem.sqrt_A
    if np.linalg.cond(S) > 1e12:
        raise SingularSystemError(f"A^(1/2) of {problem.name} is singular")
    eig = eig if eig is not None else interface_decompositions(problem, u, partition)
    proj = ggr_vector(u, partition, k, theta, eig, quad)
    u_nodes = np.asarray(u(partition.nodes[:-1]), dtype=float)
    # traces of π^θ u at x_{j−1/2}: minus from cell j−1, plus from cell j
    trace_minus = np.roll(proj.right_traces(), 1, axis=0)
    trace_plus = proj.left_traces()
    eta = theta * (u_nodes - trace_minus) + (1.0 - theta) * (u_nodes - trace_plus)
    jump_term = np.einsum("jik,jk->ji", problem.fprime(u_nodes), eta)
    return -np.linalg.solve(S, jump_term.T).T


def modified_projection_p(
    p: Callable[[np.ndarray], np.ndarray],
    u: Callable[[np.ndarray], np.ndarray],
    problem: ProblemSpec,
    partition: Partition1D,
    k: int,
    theta: float,
    eig: EigenBatch | None = None,
    quad: QuadRule | None = None,
) -> DGField:
    """L2 moments of p on P^{k−1} with (Pp − p)^(θ̄)_{j−1/2} = c_j per component."""
    _require_periodic(partition)
    correction = modified_correction(u, problem, partition, k, theta, eig, quad)
    p_coeff = l2_project(p, partition, k, quad).coeff
    nodes = partition.nodes
    p_left = np.asarray(p(nodes[:-1]), dtype=float)
    p_right = np.asarray(p(nodes[1:]), dtype=float)
    out = p_coeff.copy()
    for i in range(p_coeff.shape[1]):
        out[:, i, :] = ggr_from_moments(
            p_coeff[:, i, :], p_left[:, i], p_right[:, i], theta, "minus", extra=correction[:, i]
        )
    return DGField(out)
