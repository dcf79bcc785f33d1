"""Semi-discrete LDG operator for u_t + f(u)_x = (A(u) u_x)_x + source.

For a test function q in cell j the DG operator is

  H_j^θ(w, q) = ∫_{I_j} q_x·w dx − q⁻(x_{j+1/2})·ŵ_{j+1/2} + q⁺(x_{j−1/2})·ŵ_{j−1/2}

with ŵ = w^(θ) (H^θ) or the characteristic convective flux (H^∧). In the
modal basis q = P_ℓ the volume term is Σ_q w_q P′_ℓ(s_q) w(s_q), independent
of h_j, and the trace weights are 1 and (−1)^ℓ.

Scheme (linear diffusion, S = A^{1/2} constant):
  (p, w)_j   = −H_j^{θu}(S u, w)
  (u_t, v)_j =  H_j^∧(f(u), v) − H_j^{θp}(S p, v) + (source, v)_j
Nonlinear diffusion, p = B(u) u_x = g(u)_x:
  (p, w)_j   = −H_j^{θu}(g(u), w)            with ĝ = g^(θu)
  (u_t, v)_j =  H_j^∧(f(u), v) − H_j^{θp}(B(u) p, v) + (source, v)_j
                                             with interface flux B̂·p^(θp)

Boundary fluxes on non-periodic meshes (f̂, û, p̂):
  left  Dirichlet   (f(g₁), g₁, p⁺)
  right Dirichlet   (f̂(u⁻, g₂) upwinded per characteristic field, g₂, p⁻)
  right mixed       (f(u⁻), u⁻, B(u⁻)·u_x datum)
"""
from __future__ import annotations

import functools
from dataclasses import dataclass
from typing import Literal, NamedTuple

import numpy as np
import structlog

from src.shared.errors import BoundaryDataError, EigenDecompositionError, MeshError
from src.solver.basis import (
    QuadRule,
    legendre_deriv_table,
    legendre_table,
    mass_diagonal,
    quad_rule,
)
from src.solver.field import DGField, all_interface_traces, average
from src.solver.fluxes import (
    FluxConfig,
    b_hat,
    convective_flux,
    resolve_b_hat_mode,
    weighted_average,
)
from src.solver.mesh import Partition1D, cell_points
from src.solver.problems import ProblemSpec

log = structlog.get_logger()

DiffusionPath = Literal["auto", "linear", "nonlinear"]


# ── DG operator ──────────────────────────────────────────────────────────────

@functools.lru_cache(maxsize=32)
def _weighted_deriv(degree: int, n_points: int) -> np.ndarray:
    """w_q·P′_ℓ(s_q), shape (k+1, n_q)."""
    quad = quad_rule(n_points)
    return legendre_deriv_table(degree, quad.points) * quad.weights


def dg_residual(values: np.ndarray, flux: np.ndarray, quad: QuadRule, degree: int) -> np.ndarray:
    """H_j(w, P_ℓ) for every cell j, component i and mode ℓ, shape (N, m, k+1).

    values: w at the quadrature points, (N, n_q, m)
    flux:   ŵ at interfaces 0..N, (N+1, m)
    """
    volume = np.einsum("lq,jqi->jil", _weighted_deriv(degree, quad.n_points), values)
    signs = (-1.0) ** np.arange(degree + 1)
    return volume - flux[1:, :, None] + flux[:-1, :, None] * signs


def h_theta(arg: DGField, partition: Partition1D, theta: float, quad: QuadRule | None = None) -> np.ndarray:
    """H^θ(arg, P_ℓ) per cell/component/mode on a periodic mesh."""
    if not partition.periodic:
        raise MeshError("h_theta without boundary fluxes needs a periodic mesh")
    quad = quad or quad_rule(arg.degree + 3)
    values = arg.values_at(legendre_table(arg.degree, quad.points))
    minus, plus = all_interface_traces(arg, partition)
    return dg_residual(values, weighted_average(minus, plus, theta), quad, arg.degree)


def h_theta_form(arg: DGField, test: DGField, partition: Partition1D, theta: float,
                 quad: QuadRule | None = None) -> float:
    """Σ_j H_j^θ(arg, test) for a test field of the same shape."""
    return float(np.sum(test.coeff * h_theta(arg, partition, theta, quad)))


# ── boundary policy ──────────────────────────────────────────────────────────

@dataclass(frozen=True, eq=False)
class BoundaryFluxes:
    """Flux values at the two ends of a non-periodic mesh."""

    f_left: np.ndarray
    f_right: np.ndarray
    u_left: np.ndarray
    u_right: np.ndarray
    dx_right: np.ndarray | None = None

    def p_hats(self, p_left_plus: np.ndarray, p_right_minus: np.ndarray,
               b_right: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray]:
        """p̂ at the left and right ends; b_right converts the u_x datum to p."""
        if self.dx_right is None:
            return p_left_plus, p_right_minus
        if b_right is None:
            raise BoundaryDataError("mixed boundary needs B at the right trace")
        return p_left_plus, b_right @ self.dx_right


def _right_inflow_flux(problem: ProblemSpec, interior: np.ndarray, data: np.ndarray) -> np.ndarray:
    """Fields with λ ≥ 0 leave through x_hi and use u⁻; fields with λ < 0 enter and use g₂."""
    eig = problem.decompose(average(interior, data)[None])
    return convective_flux(interior[None], data[None], problem.f, eig, 1.0)[0]


def apply_boundary_policy(problem: ProblemSpec, u_left_plus: np.ndarray,
                          u_right_minus: np.ndarray, t: float) -> BoundaryFluxes:
    bc = problem.bc
    if bc.periodic:
        raise MeshError("boundary fluxes are only defined on non-periodic meshes")
    if bc.left is None:
        raise BoundaryDataError(f"{problem.name}: no left boundary data")
    g1 = np.asarray(bc.left(t), dtype=float)
    interior = np.asarray(u_right_minus, dtype=float)
    if bc.kind == "dirichlet":
        if bc.right is None:
            raise BoundaryDataError(f"{problem.name}: no right boundary data")
        u_right = np.asarray(bc.right(t), dtype=float)
        dx_right = None
        f_right = _right_inflow_flux(problem, interior, u_right)
    else:
        if bc.right_dx is None:
            raise BoundaryDataError(f"{problem.name}: no right derivative data")
        u_right = interior
        dx_right = np.asarray(bc.right_dx(t), dtype=float)
        f_right = problem.f(interior)
    return BoundaryFluxes(
        f_left=problem.f(g1),
        f_right=f_right,
        u_left=g1,
        u_right=u_right,
        dx_right=dx_right,
    )


# ── operator ─────────────────────────────────────────────────────────────────

class InterfaceFluxes(NamedTuple):
    """Interface values 0..N used by one RHS evaluation, each (N+1, m) or (N+1, m, m)."""

    f_hat: np.ndarray
    diff_hat: np.ndarray
    p_hat: np.ndarray
    diff_matrix: np.ndarray


class SemiDiscreteOp:
    def __init__(
        self,
        problem: ProblemSpec,
        partition: Partition1D,
        degree: int,
        config: FluxConfig,
        quad_points: int | None = None,
        path: DiffusionPath = "auto",
    ):
        if partition.periodic != problem.periodic:
            raise MeshError(
                f"{problem.name} needs a {'periodic' if problem.periodic else 'non-periodic'} mesh"
            )
        if degree < 0:
            raise MeshError(f"degree must be non-negative, got {degree}")
        self.problem = problem
        self.partition = partition
        self.degree = degree
        self.config = config
        self.quad = quad_rule(quad_points or degree + 3)
        self.nonlinear = (not problem.linear_diffusion) if path == "auto" else path == "nonlinear"
        self.b_mode = resolve_b_hat_mode(config, problem.diagonal_diffusion)

        self._table = legendre_table(degree, self.quad.points)
        self._mass = mass_diagonal(degree, partition.widths)
        self._points = cell_points(partition, self.quad.points)
        # (2ℓ+1)/2 · w_q P_ℓ(s_q): L2 projection weights per mode
        self._proj = (2.0 * np.arange(degree + 1) + 1.0)[:, None] / 2.0 * self._table * self.quad.weights
        n = partition.n_cells
        self._interior = slice(0, n) if partition.periodic else slice(1, n)

    @property
    def n_cells(self) -> int:
        return self.partition.n_cells

    def initial_field(self) -> DGField:
        return self.project(self.problem.initial)

    def project(self, func) -> DGField:
        """L2 projection of a function of x onto the space of this operator."""
        return DGField(np.einsum("lq,jqi->jil", self._proj, func(self._points)))

    def _values(self, u: DGField) -> np.ndarray:
        return u.values_at(self._table)

    def _check(self, u: DGField) -> None:
        if u.n_cells != self.n_cells or u.degree != self.degree or u.n_comp != self.problem.m:
            raise ValueError(
                f"field shape {u.shape} does not match operator "
                f"({self.n_cells}, {self.problem.m}, {self.degree + 1})"
            )

    def _close(self, flux: np.ndarray, left: np.ndarray | None, right: np.ndarray | None) -> np.ndarray:
        if self.partition.periodic:
            flux[-1] = flux[0]
        else:
            flux[0] = left
            flux[-1] = right
        return flux

    def _traces(self, u: DGField, t: float) -> tuple[np.ndarray, np.ndarray, BoundaryFluxes | None]:
        minus, plus = all_interface_traces(u, self.partition)
        if self.partition.periodic:
            return minus, plus, None
        try:
            bnd = apply_boundary_policy(self.problem, plus[0], minus[-1], t)
        except EigenDecompositionError as exc:
            log.error("eigendecomposition_failed", problem=self.problem.name, interface=self.n_cells)
            raise type(exc)(exc.detail, interface=self.n_cells) from exc
        return minus, plus, bnd

    # ── auxiliary variable ──────────────────────────────────────────────────

    def _diffusion_traces(self, u: DGField, t: float):
        """(values, interface flux) of the auxiliary argument: S·u or g(u)."""
        minus, plus, bnd = self._traces(u, t)
        theta_u = self.config.theta_u
        values = self._values(u)
        inner = self._interior
        flux = np.empty_like(minus)
        if self.nonlinear:
            g = self.problem.g
            flux[inner] = weighted_average(g(minus[inner]), g(plus[inner]), theta_u)
            values = g(values)
            if bnd is not None:
                self._close(flux, g(bnd.u_left), g(bnd.u_right))
            else:
                self._close(flux, None, None)
        else:
            S = self.problem.sqrt_A
            flux[inner] = weighted_average(minus[inner], plus[inner], theta_u) @ S.T
            values = values @ S.T
            if bnd is not None:
                self._close(flux, S @ bnd.u_left, S @ bnd.u_right)
            else:
                self._close(flux, None, None)
        return values, flux

    def compute_aux(self, u: DGField, t: float) -> DGField:
        """p_h from (p, w)_j = −H_j^{θu}(S u or g(u), w)."""
        self._check(u)
        values, flux = self._diffusion_traces(u, t)
        return DGField(-dg_residual(values, flux, self.quad, self.degree) / self._mass)

    # ── right-hand side ─────────────────────────────────────────────────────

    def _convective(self, u: DGField, minus: np.ndarray, plus: np.ndarray,
                    bnd: BoundaryFluxes | None) -> np.ndarray:
        inner = self._interior
        f_hat = np.empty_like(minus)
        try:
            eig = self.problem.decompose(average(minus[inner], plus[inner]))
        except EigenDecompositionError as exc:
            offset = inner.start or 0
            where = None if exc.interface is None else exc.interface + offset
            log.error("eigendecomposition_failed", problem=self.problem.name, interface=where)
            raise type(exc)(exc.detail, interface=where) from exc
        f_hat[inner] = convective_flux(minus[inner], plus[inner], self.problem.f, eig, self.config.theta)
        if bnd is not None:
            return self._close(f_hat, bnd.f_left, bnd.f_right)
        return self._close(f_hat, None, None)

    def interface_fluxes(self, u: DGField, p: DGField, t: float) -> InterfaceFluxes:
        minus, plus, bnd = self._traces(u, t)
        p_minus, p_plus = all_interface_traces(p, self.partition)
        inner = self._interior
        m = self.problem.m

        f_hat = self._convective(u, minus, plus, bnd)
        p_hat = np.empty_like(p_minus)
        p_hat[inner] = weighted_average(p_minus[inner], p_plus[inner], self.config.theta_p)
        matrix = np.empty((minus.shape[0], m, m))
        b_right = None

        if self.nonlinear:
            problem = self.problem
            mode = self.b_mode
            matrix[inner] = b_hat(minus[inner], plus[inner], problem.g, problem.B,
                                  self.config.jump_floor, mode=mode, secant=problem.g_secant)
            if bnd is not None:
                left = b_hat(bnd.u_left[None], plus[:1], problem.g, problem.B,
                             self.config.jump_floor, mode=mode, secant=problem.g_secant)[0]
                right = b_hat(minus[-1:], bnd.u_right[None], problem.g, problem.B,
                              self.config.jump_floor, mode=mode, secant=problem.g_secant)[0]
                b_right = problem.B(minus[-1])
                self._close(matrix, left, right)
            else:
                self._close(matrix, None, None)
        else:
            S = self.problem.sqrt_A
            matrix[:] = S
            b_right = S
        if bnd is not None:
            p_left, p_right = bnd.p_hats(p_plus[0], p_minus[-1], b_right)
            self._close(p_hat, p_left, p_right)
        else:
            self._close(p_hat, None, None)

        diff_hat = np.einsum("nij,nj->ni", matrix, p_hat)
        return InterfaceFluxes(f_hat=f_hat, diff_hat=diff_hat, p_hat=p_hat, diff_matrix=matrix)

    def source_projection(self, t: float) -> np.ndarray:
        """Modal coefficients of the L2 projection of source(·, t)."""
        return np.einsum("lq,jqi->jil", self._proj, self.problem.source(self._points, t))

    def rhs(self, u: DGField, t: float) -> DGField:
        self._check(u)
        p = self.compute_aux(u, t)
        fluxes = self.interface_fluxes(u, p, t)

        u_values = self._values(u)
        p_values = self._values(p)
        if self.nonlinear:
            diff_values = np.einsum("jqik,jqk->jqi", self.problem.B(u_values), p_values)
        else:
            diff_values = p_values @ self.problem.sqrt_A.T
        values = self.problem.f(u_values) - diff_values
        flux = fluxes.f_hat - fluxes.diff_hat
        residual = dg_residual(values, flux, self.quad, self.degree)
        return DGField(residual / self._mass + self.source_projection(t))

    def __call__(self, u: DGField, t: float) -> DGField:
        return self.rhs(u, t)
