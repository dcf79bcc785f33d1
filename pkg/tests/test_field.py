"""Tests for DG field storage, traces, norms and RK linear algebra."""
from __future__ import annotations

import math

import numpy as np
import pytest

from src.shared.errors import MeshError, MissingTraceError
from src.solver.basis import quad_rule
from src.solver.field import (
    DGField,
    all_interface_traces,
    apply_matrix,
    average,
    axpy,
    boundary_norm,
    copy,
    derivative_norm,
    from_csv_rows,
    inner,
    interface_traces,
    jump,
    l2_error,
    l2_norm,
    modal_l2_norm,
    scale,
    to_csv_rows,
)
from src.solver.mesh import build_uniform
from src.verify.projections import l2_project

TWO_PI = 2 * math.pi


def _sin(x):
    return np.sin(x)[..., None]


def _random_field(rng, n=12, m=2, k=3):
    return DGField(rng.standard_normal((n, m, k + 1)))


# ── evaluation ────────────────────────────────────────────────────────────────

def test_constant_mode_evaluates_everywhere():
    """Only P₀ set: every point of every cell returns the mean."""
    f = DGField.zeros(4, 2, 3)
    f.coeff[:, :, 0] = [1.5, -2.0]
    for s in (-1.0, -0.3, 0.0, 0.9, 1.0):
        assert np.allclose(f.eval(2, s), [1.5, -2.0])


def test_zero_field_evaluates_to_zero():
    """Zero coefficients evaluate to zero."""
    assert np.all(DGField.zeros(3, 1, 2).eval(1, 0.4) == 0.0)


def test_eval_index_out_of_range():
    """Cell indices past N − 1 are rejected."""
    with pytest.raises(MeshError):
        DGField.zeros(3, 1, 2).eval(3, 0.0)


def test_rejects_wrong_rank():
    """Coefficients must be (N, m, k+1)."""
    with pytest.raises(ValueError):
        DGField(np.zeros((3, 2)))


def test_projection_of_sine_pointwise_error_scales_like_h_cubed():
    """P2 projection of sin x has a pointwise error of order h³."""
    errors = []
    for n in (20, 40, 80):
        p = build_uniform(0.0, TWO_PI, n, periodic=True)
        f = l2_project(_sin, p, 2)
        s = np.linspace(-1, 1, 7)
        worst = max(
            abs(f.eval(j, si)[0] - math.sin(p.centers[j] + si * p.widths[j] / 2))
            for j in range(n) for si in s
        )
        errors.append(worst)
    rates = [math.log2(a / b) for a, b in zip(errors, errors[1:], strict=False)]
    assert min(rates) > 2.7


# ── traces ────────────────────────────────────────────────────────────────────

def test_piecewise_constant_trace_pair():
    """u⁻ comes from the left cell and u⁺ from the right one."""
    p = build_uniform(0.0, 1.0, 2, periodic=False)
    f = DGField(np.array([[[1.0]], [[2.0]]]))
    pair = interface_traces(f, 1, p)
    assert pair.minus[0] == 1.0 and pair.plus[0] == 2.0


def test_boundary_interface_missing_side():
    """Bounded meshes have no outer trace at interfaces 0 and N."""
    p = build_uniform(0.0, 1.0, 2, periodic=False)
    f = DGField(np.array([[[1.0]], [[2.0]]]))
    left = interface_traces(f, 0, p)
    assert not left.has_minus and left.has_plus
    with pytest.raises(MissingTraceError):
        _ = left.minus
    with pytest.raises(MissingTraceError):
        _ = interface_traces(f, 2, p).plus


def test_periodic_interfaces_alias():
    """On a periodic mesh interface N is interface 0."""
    rng = np.random.default_rng(1)
    p = build_uniform(0.0, 1.0, 6, periodic=True)
    f = _random_field(rng, n=6)
    a, b = interface_traces(f, 0, p), interface_traces(f, 6, p)
    assert np.array_equal(a.minus, b.minus) and np.array_equal(a.plus, b.plus)
    minus, plus = all_interface_traces(f, p)
    assert np.array_equal(minus[0], minus[-1]) and np.array_equal(plus[0], plus[-1])


def test_nonperiodic_batch_traces_mark_missing_sides():
    """Missing outer traces come back as NaN in the batch form."""
    rng = np.random.default_rng(2)
    p = build_uniform(0.0, 1.0, 5, periodic=False)
    minus, plus = all_interface_traces(_random_field(rng, n=5), p)
    assert np.all(np.isnan(minus[0])) and np.all(np.isnan(plus[-1]))
    assert np.all(np.isfinite(minus[1:])) and np.all(np.isfinite(plus[:-1]))


def test_traces_match_pointwise_evaluation():
    """Right and left traces are the values at s = ±1."""
    rng = np.random.default_rng(3)
    f = _random_field(rng, n=4, k=4)
    for j in range(4):
        assert np.allclose(f.right_traces()[j], f.eval(j, 1.0))
        assert np.allclose(f.left_traces()[j], f.eval(j, -1.0))


def test_jumps_of_smooth_projection_decay():
    """Interface jumps of a P1 projection shrink like h²."""
    sizes, jumps = (16, 32, 64), []
    for n in sizes:
        p = build_uniform(0.0, TWO_PI, n, periodic=True)
        minus, plus = all_interface_traces(l2_project(_sin, p, 1), p)
        jumps.append(np.max(np.abs(jump(minus, plus))))
    assert math.log2(jumps[1] / jumps[2]) > 1.8


def test_jump_and_average_conventions():
    """jump = plus − minus and average is the mean."""
    assert jump(np.array([1.0]), np.array([3.0]))[0] == 2.0
    assert average(np.array([1.0]), np.array([3.0]))[0] == 2.0


# ── norms ─────────────────────────────────────────────────────────────────────

def test_constant_field_norm():
    """‖c‖ = |c|·√(x_hi − x_lo)."""
    p = build_uniform(0.0, TWO_PI, 8, periodic=True)
    f = DGField.zeros(8, 1, 2)
    f.coeff[:, 0, 0] = -3.0
    assert l2_norm(f, p, quad_rule(4)) == pytest.approx(3.0 * math.sqrt(TWO_PI), rel=1e-13)


def test_zero_field_norm():
    """The zero field has zero norm."""
    p = build_uniform(0.0, 1.0, 4, periodic=False)
    assert l2_norm(DGField.zeros(4, 2, 1), p, quad_rule(3)) == 0.0


def test_sine_projection_norm_tends_to_sqrt_pi():
    """‖sin‖ on (0, 2π) is √π."""
    p = build_uniform(0.0, TWO_PI, 64, periodic=True)
    assert l2_norm(l2_project(_sin, p, 2), p, quad_rule(5)) == pytest.approx(math.sqrt(math.pi), rel=1e-6)


def test_modal_and_quadrature_norms_agree():
    """The diagonal-mass norm equals the exact-quadrature norm."""
    rng = np.random.default_rng(4)
    p = build_uniform(-1.0, 2.0, 12, periodic=False)
    for _ in range(20):
        f = _random_field(rng)
        quad = l2_norm(f, p, quad_rule(f.degree + 1))
        assert modal_l2_norm(f, p) == pytest.approx(quad, rel=1e-13)


def test_l2_error_of_exact_representation_is_zero():
    """A representable function has zero error."""
    p = build_uniform(0.0, 1.0, 5, periodic=False)
    f = l2_project(lambda x: (x**2)[..., None], p, 2)
    assert l2_error(f, p, quad_rule(5), lambda x: (x**2)[..., None]) < 1e-14


def test_boundary_norm_of_unit_field():
    """|||1|||² counts two traces per cell."""
    f = DGField.zeros(5, 1, 2)
    f.coeff[:, 0, 0] = 1.0
    assert boundary_norm(f) == pytest.approx(math.sqrt(10.0))


def test_inverse_inequality_constant_is_mesh_independent():
    """h‖v_x‖/‖v‖ and √h|||v|||/‖v‖ stay bounded under refinement."""
    rng = np.random.default_rng(5)
    ratios = []
    for n in (10, 20, 40, 80):
        p = build_uniform(0.0, 1.0, n, periodic=True)
        worst = 0.0
        for _ in range(10):
            f = _random_field(rng, n=n, m=1, k=2)
            q = quad_rule(4)
            worst = max(worst, derivative_norm(f, p, q) * p.h / l2_norm(f, p, q))
            # trace inverse inequality: h·|||v|||² ≤ C‖v‖²
            worst = max(worst, math.sqrt(p.h) * boundary_norm(f) / l2_norm(f, p, q))
        ratios.append(worst)
    assert max(ratios) < 2.0 * min(ratios)
    assert max(ratios) < 30.0


# ── linear algebra ────────────────────────────────────────────────────────────

def test_axpy_identity_and_scale_zero():
    """axpy with a zeroed y returns x."""
    rng = np.random.default_rng(6)
    x, y = _random_field(rng), _random_field(rng)
    assert np.array_equal(axpy(1.0, x, scale(0.0, y)).coeff, x.coeff)
    assert np.all(scale(0.0, x).coeff == 0.0)


def test_axpy_cancellation():
    """Adding and removing the same multiple of x recovers y to round-off."""
    rng = np.random.default_rng(7)
    x, y = _random_field(rng), _random_field(rng)
    back = axpy(0.37, x, axpy(-0.37, x, y))
    assert np.allclose(back.coeff, y.coeff, rtol=0, atol=4 * np.finfo(float).eps * np.abs(y.coeff).max() + 1e-15)


def test_axpy_shape_mismatch():
    """Fields of different shape do not combine."""
    with pytest.raises(ValueError):
        axpy(1.0, DGField.zeros(2, 1, 1), DGField.zeros(3, 1, 1))


def test_copy_is_independent():
    """A copy shares no storage with its source."""
    f = DGField.zeros(2, 1, 1)
    g = copy(f)
    g.coeff[0, 0, 0] = 5.0
    assert f.coeff[0, 0, 0] == 0.0


def test_inner_matches_norm():
    """(f, f) = ‖f‖²."""
    rng = np.random.default_rng(8)
    p = build_uniform(0.0, 3.0, 12, periodic=True)
    f = _random_field(rng)
    assert inner(f, f, p) == pytest.approx(modal_l2_norm(f, p) ** 2, rel=1e-14)


def test_apply_matrix_is_pointwise():
    """A constant matrix acts on the values at every point."""
    rng = np.random.default_rng(9)
    f = _random_field(rng)
    M = np.array([[2.0, 1.0], [0.0, -1.0]])
    out = apply_matrix(M, f)
    assert np.allclose(out.eval(3, 0.25), M @ f.eval(3, 0.25))


# ── CSV rows ──────────────────────────────────────────────────────────────────

def test_csv_rows_cell_major_and_restorable():
    """Rows are cell-major and rebuild the same coefficients."""
    rng = np.random.default_rng(10)
    f = _random_field(rng, n=3, m=2, k=1)
    rows = to_csv_rows(f)
    assert rows[0][:3] == (0, 0, 0) and rows[1][:3] == (0, 0, 1) and rows[2][:3] == (0, 1, 0)
    assert np.array_equal(from_csv_rows(rows).coeff, f.coeff)
