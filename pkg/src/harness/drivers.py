"""Experiment drivers behind the CLI modes.

  convergence  L2 error ladders over the configured cell counts
  history      error against the exact solution along one run, per θ
  run          solution snapshot at t_end (plus an optional coefficient dump)
  projtest     approximation errors of the GGR and modified projections
  fluxtest     flux consistency and problem-data residuals at random states

Runs inside a ladder are independent; they execute in order so rows come
out deterministically.
"""
from __future__ import annotations

import math
from collections.abc import Callable
from typing import NamedTuple

import numpy as np
import structlog

from src.harness.csvout import render
from src.shared.config import RunConfig
from src.shared.errors import LDGError, MissingExactSolutionError
from src.solver.basis import legendre_table, quad_rule
from src.solver.field import DGField, average, l2_error
from src.solver.fluxes import (
    FluxConfig,
    b_hat,
    convective_flux,
    resolve_b_hat_mode,
    weighted_average,
)
from src.solver.ldg import SemiDiscreteOp
from src.solver.mesh import Partition1D, build_uniform, cell_points
from src.solver.problems import ProblemSpec, builtin, check_invariants, sample_states
from src.solver.timestep import TimeControl, integrate
from src.verify.projections import (
    ggr_scalar,
    ggr_vector,
    interface_decompositions,
    modified_projection_p,
)

log = structlog.get_logger()


class ConvergenceRow(NamedTuple):
    n_cells: int
    l2_error: float
    order: float | None


class Snapshot(NamedTuple):
    x: np.ndarray
    values: np.ndarray
    field: DGField


def convergence_orders(cells: list[int], errors: list[float]) -> list[float | None]:
    """log(e_prev/e)/log(N/N_prev); None for the first row or a zero error."""
    orders: list[float | None] = [None]
    for (n0, e0), (n1, e1) in zip(zip(cells, errors), zip(cells[1:], errors[1:]), strict=False):
        if e0 > 0 and e1 > 0:
            orders.append(math.log(e0 / e1) / math.log(n1 / n0))
        else:
            orders.append(None)
    return orders


# ── one run ──────────────────────────────────────────────────────────────────

def _t_end(config: RunConfig, problem: ProblemSpec) -> float:
    return config.t_end if config.t_end is not None else problem.t_end


def _setup(config: RunConfig, problem: ProblemSpec, k: int, n_cells: int,
           theta: float) -> tuple[SemiDiscreteOp, TimeControl]:
    partition = build_uniform(problem.x_lo, problem.x_hi, n_cells, problem.periodic)
    op = SemiDiscreteOp(problem, partition, k, config.flux_config(theta), config.quad_points)
    control = TimeControl(
        cfl=config.cfl_for(k) if config.dt_override is None else config.cfl,
        t_end=_t_end(config, problem),
        dt_override=config.dt_override,
    )
    return op, control


def _error_at(op: SemiDiscreteOp, u: DGField, t: float) -> float:
    """‖u(t) − u_h‖ with k+3 Gauss points per cell."""
    problem = op.problem
    return l2_error(u, op.partition, quad_rule(op.degree + 3), lambda x: problem.exact_solution(x, t))


def _require_exact(problem: ProblemSpec) -> None:
    if problem.exact is None:
        raise MissingExactSolutionError(f"problem {problem.name} has no exact solution")


def solve(config: RunConfig, k: int, n_cells: int, theta: float,
          callback: Callable[[int, float, DGField], None] | None = None) -> tuple[SemiDiscreteOp, DGField]:
    problem = builtin(config.problem)
    op, control = _setup(config, problem, k, n_cells, theta)
    return op, integrate(op, op.initial_field(), control, callback)


# ── convergence ──────────────────────────────────────────────────────────────

def run_convergence(config: RunConfig) -> dict[tuple[int, float], list[ConvergenceRow]]:
    problem = builtin(config.problem)
    _require_exact(problem)
    t_end = _t_end(config, problem)
    table: dict[tuple[int, float], list[ConvergenceRow]] = {}
    for k in config.degree:
        for theta in config.theta:
            errors = []
            for n in config.cells:
                op, u = solve(config, k, n, theta)
                errors.append(_error_at(op, u, t_end))
                log.info("convergence_row", problem=problem.name, k=k, theta=theta,
                         n_cells=n, error=errors[-1])
            orders = convergence_orders(config.cells, errors)
            table[(k, theta)] = [
                ConvergenceRow(n, e, o) for n, e, o in zip(config.cells, errors, orders, strict=True)
            ]
    return table


def convergence_csv(table: dict[tuple[int, float], list[ConvergenceRow]]) -> str:
    rows = [
        (k, theta, row.n_cells, row.l2_error, row.order)
        for (k, theta), ladder in table.items()
        for row in ladder
    ]
    return render(("k", "theta", "N", "error", "order"), rows)


# ── history ──────────────────────────────────────────────────────────────────

def run_history(config: RunConfig) -> dict[float, list[tuple[float, float]]]:
    """Errors every history_stride steps (and at t_end) for each θ; k and N are the first listed."""
    problem = builtin(config.problem)
    _require_exact(problem)
    k, n = config.degree[0], config.cells[0]
    stride = config.history_stride
    histories: dict[float, list[tuple[float, float]]] = {}
    for theta in config.theta:
        op, control = _setup(config, problem, k, n, theta)
        _, n_steps, _ = control.schedule(op.partition.h)
        samples: list[tuple[float, float]] = []

        def record(step: int, t: float, u: DGField, op=op, samples=samples, n_steps=n_steps) -> None:
            if step % stride == 0 or step == n_steps:
                samples.append((t, _error_at(op, u, t)))

        integrate(op, op.initial_field(), control, record)
        log.info("history_done", problem=problem.name, theta=theta, samples=len(samples),
                 final_error=samples[-1][1])
        histories[theta] = samples
    return histories


def history_csv(histories: dict[float, list[tuple[float, float]]]) -> str:
    rows = [(theta, t, err) for theta, samples in histories.items() for t, err in samples]
    return render(("theta", "t", "error"), rows)


# ── snapshot ─────────────────────────────────────────────────────────────────

def snapshot(u: DGField, partition: Partition1D, points_per_cell: int) -> Snapshot:
    """u_h at uniformly spaced reference points of every cell, ends included."""
    s = np.linspace(-1.0, 1.0, points_per_cell)
    x = cell_points(partition, s).reshape(-1)
    values = u.values_at(legendre_table(u.degree, s)).reshape(-1, u.n_comp)
    return Snapshot(x=x, values=values, field=u)


def run_snapshot(config: RunConfig) -> Snapshot:
    k, n, theta = config.degree[0], config.cells[0], config.theta[0]
    op, u = solve(config, k, n, theta)
    log.info("snapshot_done", problem=op.problem.name, k=k, n_cells=n, theta=theta,
             mean_min=float(u.coeff[..., 0].min()), mean_max=float(u.coeff[..., 0].max()))
    return snapshot(u, op.partition, config.snapshot_points)


def snapshot_csv(snap: Snapshot) -> str:
    m = snap.values.shape[1]
    header = ("x", *(f"u{i + 1}" for i in range(m)))
    rows = [(float(x), *map(float, vals)) for x, vals in zip(snap.x, snap.values, strict=True)]
    return render(header, rows)


# ── projection errors ────────────────────────────────────────────────────────

def _projection_error(kind: str, problem: ProblemSpec, partition: Partition1D, k: int,
                      theta: float) -> float:
    """‖π z − z‖ for the exact solution at t = 0 (or S·u_x for the modified projection)."""
    quad = quad_rule(k + 3)

    def u(x: np.ndarray) -> np.ndarray:
        return problem.exact_solution(x, 0.0)

    if kind in ("ggr_plus", "ggr_minus"):
        def first(x: np.ndarray) -> np.ndarray:
            return u(x)[..., 0]

        side = "plus" if kind == "ggr_plus" else "minus"
        proj = ggr_scalar(first, partition, k, theta, side, quad)
        return l2_error(proj, partition, quad, lambda x: u(x)[..., :1])
    if kind == "ggr_vector":
        eig = interface_decompositions(problem, u, partition)
        return l2_error(ggr_vector(u, partition, k, theta, eig, quad), partition, quad, u)

    S = problem.sqrt_A

    def p(x: np.ndarray) -> np.ndarray:
        return problem.exact_dx(x, 0.0) @ S.T

    proj = modified_projection_p(p, u, problem, partition, k, theta, quad=quad)
    return l2_error(proj, partition, quad, p)


def run_projtest(config: RunConfig) -> list[tuple[str, int, float, int, float, float | None]]:
    problem = builtin(config.problem)
    if not problem.periodic:
        raise LDGError(f"projection tests need a periodic problem, {problem.name} is {problem.bc.kind}")
    if problem.exact is None or problem.exact_dx is None:
        raise MissingExactSolutionError(f"problem {problem.name} has no exact solution")
    rows = []
    for kind in config.projections:
        for k in config.degree:
            for theta in config.theta:
                errors = []
                for n in config.cells:
                    partition = build_uniform(problem.x_lo, problem.x_hi, n, periodic=True)
                    errors.append(_projection_error(kind, problem, partition, k, theta))
                orders = convergence_orders(config.cells, errors)
                log.info("projtest_ladder", kind=kind, k=k, theta=theta, final_order=orders[-1])
                rows.extend(
                    (kind, k, theta, n, e, o)
                    for n, e, o in zip(config.cells, errors, orders, strict=True)
                )
    return rows


def projtest_csv(rows) -> str:
    return render(("kind", "k", "theta", "N", "error", "order"), rows)


# ── flux checks ──────────────────────────────────────────────────────────────

def flux_residuals(problem: ProblemSpec, flux: FluxConfig, minus: np.ndarray,
                   plus: np.ndarray) -> dict[str, float | None]:
    """Residuals of the interface fluxes at trace pairs (n, m).

    consistency        |f̂(u, u) − f(u)|
    telescoping        |f̂ − f^(θ)| where every eigenvalue is ≥ 0 (None if no such pair)
    b_hat_consistency  |B̂(u, u) − B(u)|
    b_hat_secant       |B̂·[u] − [g]|
    """
    eig_same = problem.decompose(minus)
    consistency = convective_flux(minus, minus, problem.f, eig_same, flux.theta) - problem.f(minus)

    eig = problem.decompose(average(minus, plus))
    f_hat = convective_flux(minus, plus, problem.f, eig, flux.theta)
    upwind = np.all(eig.lam >= 0.0, axis=-1) & eig.exact
    telescoping = None
    if upwind.any():
        target = weighted_average(problem.f(minus), problem.f(plus), flux.theta)
        telescoping = float(np.max(np.abs((f_hat - target)[upwind])))

    mode = resolve_b_hat_mode(flux, problem.diagonal_diffusion)
    same = b_hat(minus, minus, problem.g, problem.B, flux.jump_floor, mode=mode,
                 secant=problem.g_secant)
    pair = b_hat(minus, plus, problem.g, problem.B, flux.jump_floor, mode=mode,
                 secant=problem.g_secant)
    secant = np.einsum("nij,nj->ni", pair, plus - minus) - (problem.g(plus) - problem.g(minus))
    return {
        "consistency": float(np.max(np.abs(consistency))),
        "telescoping": telescoping,
        "b_hat_consistency": float(np.max(np.abs(same - problem.B(minus)))),
        "b_hat_secant": float(np.max(np.abs(secant))),
    }


def run_fluxtest(config: RunConfig) -> list[tuple[str, float | None, float | None]]:
    problem = builtin(config.problem)
    rng = np.random.default_rng(config.seed)
    minus = sample_states(problem, config.samples, rng)
    plus = sample_states(problem, config.samples, rng)
    rows: list[tuple[str, float | None, float | None]] = [
        (name, None, value) for name, value in check_invariants(problem, minus).items()
    ]
    for theta in config.theta:
        residuals = flux_residuals(problem, config.flux_config(theta), minus, plus)
        log.info("fluxtest", problem=problem.name, theta=theta, **residuals)
        rows.extend((name, theta, value) for name, value in residuals.items())
    return rows


def fluxtest_csv(rows) -> str:
    return render(("check", "theta", "max_residual"), rows)
