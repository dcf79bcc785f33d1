"""Tests for circulant solves and the GGR / modified projections."""
from __future__ import annotations

import dataclasses
import math

import numpy as np
import pytest
import scipy.linalg

from src.harness.drivers import convergence_orders
from src.shared.errors import LDGError, MeshError, SingularSystemError
from src.solver.basis import quad_rule
from src.solver.field import DGField, boundary_norm, l2_error
from src.solver.mesh import build_uniform
from src.solver.problems import builtin
from src.solver.smalleig import EigenBatch
from src.verify.projections import (
    CirculantSystem,
    cell_frozen,
    circulant_solve,
    ggr_scalar,
    ggr_vector,
    interface_decompositions,
    l2_project,
    modified_correction,
    modified_projection_p,
)

TWO_PI = 2 * math.pi
CELLS = (16, 32, 64)
FINE_CELLS = (128, 256, 512)


def _ladder(theta):
    """Odd-degree orders at θ = 0.6 are still climbing on CELLS."""
    return FINE_CELLS if theta < 0.7 else CELLS


def _smooth(x):
    return np.sin(x) + 0.5 * np.cos(2.0 * x)


def _periodic(n):
    return build_uniform(0.0, TWO_PI, n, periodic=True)


def _side_coefficients(side, k, theta):
    parity = (-1.0) ** k
    if side == "plus":
        return theta, (1.0 - theta) * parity, 1
    return theta * parity, 1.0 - theta, -1


# ── circulant systems ─────────────────────────────────────────────────────────

@pytest.mark.parametrize("shift", [1, -1])
def test_dense_matrix_is_circulant(shift):
    """The dense form agrees with scipy's circulant builder."""
    sys = CirculantSystem(5, 0.8, -0.2, shift, np.zeros(5))
    column = np.zeros(5)
    column[0] = 0.8
    column[-shift % 5] = -0.2
    assert np.array_equal(sys.dense(), scipy.linalg.circulant(column))
    assert np.array_equal(sys.dense()[0], sys.first_row)


@pytest.mark.parametrize("n", range(1, 13))
def test_determinant_matches_dense(n):
    """The closed-form determinant agrees with a dense LU for small N."""
    for k in (1, 2, 3):
        for theta in (0.6, 0.8, 1.2):
            for side in ("plus", "minus"):
                diag, off, shift = _side_coefficients(side, k, theta)
                sys = CirculantSystem(n, diag, off, shift, np.zeros(n))
                assert sys.determinant == pytest.approx(scipy.linalg.det(sys.dense()), abs=1e-10)


@pytest.mark.parametrize("theta", [0.3, 0.6, 0.8, 1.2, 1.5])
def test_solve_matches_dense(theta):
    """The O(N) circulant solve agrees with a dense solve."""
    rng = np.random.default_rng(50)
    for n in (1, 2, 3, 7, 16, 33):
        for k in (1, 2):
            for side in ("plus", "minus"):
                diag, off, shift = _side_coefficients(side, k, theta)
                rhs = rng.standard_normal(n)
                sys = CirculantSystem(n, diag, off, shift, rhs)
                expected = scipy.linalg.solve(sys.dense(), rhs)
                assert np.allclose(circulant_solve(sys), expected, rtol=1e-11,
                                   atol=1e-11 * np.max(np.abs(expected)))


def test_solve_with_trailing_axes():
    """Right-hand sides with trailing axes are solved column by column."""
    rng = np.random.default_rng(51)
    rhs = rng.standard_normal((9, 3))
    sys = CirculantSystem(9, 0.8, 0.2, 1, rhs)
    assert np.allclose(circulant_solve(sys), scipy.linalg.solve(sys.dense(), rhs), atol=1e-12)


def test_upwind_even_degree_is_identity():
    """At θ = 1 the plus-side system is the identity."""
    rhs = np.arange(6.0)
    diag, off, shift = _side_coefficients("plus", 2, 1.0)
    assert np.array_equal(circulant_solve(CirculantSystem(6, diag, off, shift, rhs)), rhs)


def test_single_cell_system():
    """N = 1 collapses to a scalar equation."""
    sys = CirculantSystem(1, 0.8, 0.2, 1, np.array([3.0]))
    assert circulant_solve(sys)[0] == pytest.approx(3.0)


def test_singular_at_half_weight():
    """θ = 1/2 with odd k is singular and says so."""
    diag, off, shift = _side_coefficients("plus", 1, 0.5)
    with pytest.raises(SingularSystemError):
        circulant_solve(CirculantSystem(8, diag, off, shift, np.ones(8)))


def test_bad_circulant_arguments():
    """Shift and right-hand side length are validated."""
    with pytest.raises(LDGError):
        CirculantSystem(4, 1.0, 0.0, 2, np.zeros(4))
    with pytest.raises(LDGError):
        CirculantSystem(4, 1.0, 0.0, 1, np.zeros(3))


# ── L2 and scalar GGR projections ─────────────────────────────────────────────

def test_l2_projection_reproduces_polynomials():
    """Polynomials of degree k are projected exactly."""
    p = build_uniform(-1.0, 2.0, 7, periodic=False)

    def cubic(x):
        return x**3 - 2.0 * x

    f = l2_project(cubic, p, 3)
    assert l2_error(f, p, quad_rule(6), lambda x: cubic(x)[..., None]) < 1e-13


@pytest.mark.parametrize("side", ["plus", "minus"])
@pytest.mark.parametrize("theta", [0.6, 1.0, 1.2])
def test_ggr_keeps_lower_moments(side, theta):
    """GGR shares the first k moments with the L2 projection."""
    p = _periodic(20)
    k = 2
    ggr = ggr_scalar(_smooth, p, k, theta, side)
    l2 = l2_project(_smooth, p, k)
    assert np.allclose(ggr.coeff[:, :, :k], l2.coeff[:, :, :k], atol=1e-15)


@pytest.mark.parametrize("k", [1, 2, 3])
@pytest.mark.parametrize("theta", [0.6, 1.2])
def test_ggr_plus_side_endpoint_condition(k, theta):
    """The plus-side weighted trace matches the function at x_{j+1/2}."""
    p = _periodic(12)
    f = ggr_scalar(_smooth, p, k, theta, "plus")
    right, left = f.right_traces()[:, 0], f.left_traces()[:, 0]
    weighted = theta * right + (1.0 - theta) * np.roll(left, -1)
    assert np.allclose(weighted, _smooth(p.nodes[1:]), atol=1e-12)


@pytest.mark.parametrize("k", [1, 2, 3])
@pytest.mark.parametrize("theta", [0.6, 1.2])
def test_ggr_minus_side_endpoint_condition(k, theta):
    """The minus-side weighted trace matches the function at x_{j−1/2}."""
    p = _periodic(12)
    f = ggr_scalar(_smooth, p, k, theta, "minus")
    right, left = f.right_traces()[:, 0], f.left_traces()[:, 0]
    weighted = (1.0 - theta) * np.roll(right, 1) + theta * left
    assert np.allclose(weighted, _smooth(p.nodes[:-1]), atol=1e-12)


@pytest.mark.parametrize("side", ["plus", "minus"])
def test_ggr_reproduces_piecewise_polynomials(side):
    """Degree-k polynomials are fixed points of both GGR sides."""
    p = _periodic(9)

    def quad(x):
        return 0.5 * x**2 - x + 2.0

    f = ggr_scalar(quad, p, 2, 0.8, side)
    assert l2_error(f, p, quad_rule(5), lambda x: quad(x)[..., None]) < 1e-10


@pytest.mark.parametrize("side", ["plus", "minus"])
@pytest.mark.parametrize("theta", [0.6, 0.8, 1.2])
@pytest.mark.parametrize("k", [1, 2, 3])
def test_scalar_ggr_order(k, theta, side):
    """Scalar GGR converges at k + 1 in L2 for both sides."""
    errors = []
    for n in _ladder(theta):
        p = _periodic(n)
        f = ggr_scalar(_smooth, p, k, theta, side)
        errors.append(l2_error(f, p, quad_rule(k + 3), lambda x: _smooth(x)[..., None]))
    orders = convergence_orders(list(_ladder(theta)), errors)
    assert orders[-1] == pytest.approx(k + 1, abs=0.1)


@pytest.mark.parametrize("side", ["plus", "minus"])
@pytest.mark.parametrize("k", [1, 2])
def test_scalar_ggr_trace_error_order(k, side):
    """Interface trace errors of GGR also converge at k + 1."""
    # a degree k+5 L2 projection stands in for the exact traces
    errors = []
    for n in CELLS:
        p = _periodic(n)
        f = ggr_scalar(_smooth, p, k, 0.8, side)
        padded = np.pad(f.coeff, ((0, 0), (0, 0), (0, 5)))
        diff = DGField(padded - l2_project(_smooth, p, k + 5).coeff)
        errors.append(math.sqrt(p.h) * boundary_norm(diff))
    orders = convergence_orders(list(CELLS), errors)
    assert orders[-1] == pytest.approx(k + 1, abs=0.15)


def test_ggr_needs_periodic_mesh():
    """GGR is only defined on a periodic partition."""
    with pytest.raises(MeshError):
        ggr_scalar(_smooth, build_uniform(0.0, 1.0, 4, periodic=False), 1, 1.0, "plus")


def test_ggr_singular_weight():
    """θ = 1/2 surfaces the singular circulant system."""
    with pytest.raises(SingularSystemError):
        ggr_scalar(_smooth, _periodic(8), 1, 0.5, "plus")


def test_ggr_unknown_side():
    """Only "plus" and "minus" are accepted sides."""
    with pytest.raises(LDGError):
        ggr_scalar(_smooth, _periodic(8), 1, 1.0, "both")


# ── vector GGR ────────────────────────────────────────────────────────────────

def _exact_at_zero(problem):
    def u(x):
        return problem.exact(x, 0.0)

    return u


@pytest.mark.parametrize("name", ["ex1_cubic", "ex5_nonlindiff"])
@pytest.mark.parametrize("theta", [0.6, 0.8, 1.2])
@pytest.mark.parametrize("k", [1, 2, 3])
def test_vector_ggr_order(name, k, theta):
    """Characteristic-wise GGR converges at k + 1 on the smooth test states."""
    problem = builtin(name)
    u = _exact_at_zero(problem)
    errors = []
    for n in _ladder(theta):
        p = _periodic(n)
        proj = ggr_vector(u, p, k, theta, interface_decompositions(problem, u, p))
        errors.append(l2_error(proj, p, quad_rule(k + 3), u))
    orders = convergence_orders(list(_ladder(theta)), errors)
    assert orders[-1] == pytest.approx(k + 1, abs=0.1)


def test_cell_frozen_uses_right_interface():
    """Each cell takes the eigen data of its right interface."""
    lam = np.arange(4.0)[:, None] * np.ones((4, 2))
    eye = np.broadcast_to(np.eye(2), (4, 2, 2)).copy()
    frozen = cell_frozen(EigenBatch(lam, eye, eye.copy(), np.ones(4, dtype=bool)), 4)
    assert frozen.lam[:, 0].tolist() == [1.0, 2.0, 3.0, 0.0]


def _sign_changing_batch(p):
    """R = L = I; field 0 has positive speed on the left half only, field 1 always negative."""
    n = p.n_cells
    lam = np.stack([np.where(p.nodes[:-1] < math.pi, 1.0, -1.0), -np.ones(n)], axis=1)
    eye = np.broadcast_to(np.eye(2), (n, 2, 2)).copy()
    return EigenBatch(lam, eye, eye.copy(), np.ones(n, dtype=bool))


def test_vector_ggr_mixed_sides_endpoint_conditions():
    """Each field satisfies the endpoint condition of the side its speed selects."""
    p = _periodic(12)
    theta, k = 0.8, 2

    def u(x):
        return np.stack([_smooth(x), np.cos(x)], axis=-1)

    eig = _sign_changing_batch(p)
    proj = ggr_vector(u, p, k, theta, eig)
    frozen = cell_frozen(eig, 12)
    right, left = proj.right_traces()[:, 0], proj.left_traces()[:, 0]
    plus = frozen.lam[:, 0] >= 0
    plus_residual = theta * right + (1 - theta) * np.roll(left, -1) - _smooth(p.nodes[1:])
    minus_residual = (1 - theta) * np.roll(right, 1) + theta * left - _smooth(p.nodes[:-1])
    assert 0 < plus.sum() < 12
    assert np.allclose(plus_residual[plus], 0.0, atol=1e-12)
    assert np.allclose(minus_residual[~plus], 0.0, atol=1e-12)
    # field 1 is minus side everywhere and matches the scalar projection
    scalar = ggr_scalar(np.cos, p, k, theta, "minus")
    assert np.allclose(proj.coeff[:, 1, :], scalar.coeff[:, 0, :], atol=1e-12)


def test_vector_ggr_mixed_sides_reproduces_polynomials():
    """Mixed sides still reproduce piecewise polynomials."""
    p = _periodic(10)

    def u(x):
        return np.stack([x**2 - 3.0 * x, 0.5 * x], axis=-1)

    proj = ggr_vector(u, p, 2, 0.8, _sign_changing_batch(p))
    assert l2_error(proj, p, quad_rule(5), u) < 1e-10


# ── modified projection of p ─────────────────────────────────────────────────

def _auxiliary(problem):
    S = problem.sqrt_A

    def p(x):
        return problem.exact_dx(x, 0.0) @ S.T

    return p


@pytest.mark.parametrize("theta", [0.6, 0.8, 1.2])
@pytest.mark.parametrize("k", [1, 2, 3])
def test_modified_projection_order(k, theta):
    """The modified auxiliary projection converges at k + 1."""
    problem = builtin("ex1_aniso")
    u, p_exact = _exact_at_zero(problem), _auxiliary(problem)
    errors = []
    for n in _ladder(theta):
        part = _periodic(n)
        proj = modified_projection_p(p_exact, u, problem, part, k, theta)
        errors.append(l2_error(proj, part, quad_rule(k + 3), p_exact))
    orders = convergence_orders(list(_ladder(theta)), errors)
    assert orders[-1] == pytest.approx(k + 1, abs=0.1)


def test_modified_projection_without_convection_is_minus_ggr():
    """With f′ = 0 the correction vanishes and the projection is minus-side GGR."""
    def fprime(u):
        return np.zeros(u.shape + u.shape[-1:])

    problem = dataclasses.replace(builtin("ex1_cubic"), fprime=fprime, eig_hint=None)
    u, p_exact = _exact_at_zero(problem), _auxiliary(problem)
    part = _periodic(16)
    assert np.allclose(modified_correction(u, problem, part, 2, 0.8), 0.0)
    proj = modified_projection_p(p_exact, u, problem, part, 2, 0.8)
    for i in range(3):
        def component(x, i=i):
            return p_exact(x)[..., i]

        scalar = ggr_scalar(component, part, 2, 0.8, "minus")
        assert np.allclose(proj.coeff[:, i, :], scalar.coeff[:, 0, :], atol=1e-13)


def test_modified_correction_needs_constant_diffusion():
    """The correction is defined for constant diffusion only."""
    problem = builtin("ex5_nonlindiff")
    with pytest.raises(LDGError):
        modified_correction(_exact_at_zero(problem), problem, _periodic(8), 1, 1.0)
