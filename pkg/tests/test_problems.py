"""Tests for the built-in problem registry and its consistency data."""
from __future__ import annotations

import math

import numpy as np
import pytest
from scipy import integrate

from src.shared.errors import BoundaryDataError, MissingExactSolutionError, UnknownProblemError
from src.solver.problems import (
    BUCKLEY_G_MAX,
    BUILTIN_IDS,
    BoundaryCondition,
    buckley_a,
    buckley_g,
    builtin,
    check_invariants,
    sample_states,
)

WITH_EXACT = [name for name in BUILTIN_IDS if name != "ex6_buckley"]


# ── registry ──────────────────────────────────────────────────────────────────

def test_registry_lists_every_problem():
    """All eight built-in ids are registered."""
    assert set(BUILTIN_IDS) == {
        "ex1_cubic", "ex1_convdom", "ex1_aniso", "ex3_longtime",
        "ex4_mixed", "ex4_dirichlet", "ex5_nonlindiff", "ex6_buckley",
    }


def test_builtin_is_cached():
    """Repeated lookups return the same problem object."""
    assert builtin("ex1_cubic") is builtin("ex1_cubic")


def test_unknown_problem():
    """Unknown ids fail with the list of valid ones."""
    with pytest.raises(UnknownProblemError, match="ex1_cubic"):
        builtin("ex9")


@pytest.mark.parametrize("name,m,kind", [
    ("ex1_cubic", 3, "periodic"),
    ("ex3_longtime", 3, "periodic"),
    ("ex4_mixed", 2, "mixed"),
    ("ex4_dirichlet", 2, "dirichlet"),
    ("ex5_nonlindiff", 2, "periodic"),
    ("ex6_buckley", 2, "dirichlet"),
])
def test_problem_shapes_and_boundaries(name, m, kind):
    """Component counts, boundary kinds and initial data shapes."""
    problem = builtin(name)
    assert problem.m == m
    assert problem.bc.kind == kind
    assert problem.initial(np.linspace(problem.x_lo, problem.x_hi, 7)).shape == (7, m)


def test_diffusion_kinds():
    """Constant diffusion exposes √A; state-dependent diffusion does not."""
    assert builtin("ex1_aniso").linear_diffusion
    assert np.allclose(builtin("ex1_aniso").sqrt_A, 10.0 * np.eye(3))
    assert not builtin("ex5_nonlindiff").linear_diffusion
    with pytest.raises(ValueError):
        _ = builtin("ex6_buckley").sqrt_A


def test_missing_exact_solution():
    """Asking for the exact Buckley–Leverett solution fails."""
    with pytest.raises(MissingExactSolutionError):
        builtin("ex6_buckley").exact_solution(np.zeros(3), 0.0)


def test_incomplete_boundary_data():
    """Dirichlet and mixed conditions need their right-end datum."""
    with pytest.raises(BoundaryDataError):
        BoundaryCondition("dirichlet", left=lambda t: np.zeros(1))
    with pytest.raises(BoundaryDataError):
        BoundaryCondition("mixed", left=lambda t: np.zeros(1))


def test_initial_data_matches_exact_solution():
    """u₀ is the exact solution at t = 0."""
    x = np.linspace(0.0, 2.0, 9)
    for name in WITH_EXACT:
        problem = builtin(name)
        assert np.allclose(problem.initial(x), problem.exact(x, 0.0))


def test_buckley_initial_and_boundary_data():
    """The Buckley front starts as a ramp with u = 1 on the left and 0 on the right."""
    problem = builtin("ex6_buckley")
    u0 = problem.initial(np.array([0.0, 1 / 6, 1 / 3, 0.5, 1.0]))
    assert np.allclose(u0[:, 0], [1.0, 0.5, 0.0, 0.0, 0.0])
    assert np.array_equal(u0[:, 0], u0[:, 1])
    assert np.array_equal(problem.bc.left(0.1), [1.0, 1.0])
    assert np.array_equal(problem.bc.right(0.1), [0.0, 0.0])
    assert np.all(problem.source(np.linspace(0, 1, 5), 0.1) == 0.0)


def test_mixed_boundary_derivative_datum():
    """The mixed right datum is u_x of the exact solution at x = π."""
    problem = builtin("ex4_mixed")
    t = 0.3
    expected = 3.0 * math.exp(-t) * math.cos(3.0 * math.pi + t)
    assert np.allclose(problem.bc.right_dx(t), [expected, expected])


# ── consistency ───────────────────────────────────────────────────────────────

@pytest.mark.parametrize("name", BUILTIN_IDS)
def test_invariants_hold_on_sampled_states(name):
    """B² = A, g′ = B and f′ agree with finite differences on sampled states."""
    problem = builtin(name)
    rng = np.random.default_rng(20)
    states = sample_states(problem, 200, rng)
    if name == "ex6_buckley":
        # g′ = B has an infinite slope at the ends of [0, 1]
        states = np.clip(states, 0.01, 0.99)
    residuals = check_invariants(problem, states)
    assert residuals["b_squared"] < 1e-12
    assert residuals["g_prime"] < 1e-6
    assert residuals["f_prime"] < 1e-6


@pytest.mark.parametrize("name", WITH_EXACT)
def test_manufactured_source_matches_exact_solution(name):
    """The source closes the PDE for the exact solution."""
    problem = builtin(name)
    rng = np.random.default_rng(21)
    x = rng.uniform(problem.x_lo, problem.x_hi, 50)
    t = float(rng.uniform(0.1, 0.9))
    eps = 1e-5

    def flux(xs):
        u = problem.exact(xs, t)
        diffusive = np.einsum("...ij,...j->...i", problem.A(u), problem.exact_dx(xs, t))
        return problem.f(u) - diffusive

    u_t = (problem.exact(x, t + eps) - problem.exact(x, t - eps)) / (2 * eps)
    flux_x = (flux(x + eps) - flux(x - eps)) / (2 * eps)
    source = problem.source(x, t)
    assert np.max(np.abs(u_t + flux_x - source)) < 1e-6 * (1.0 + np.max(np.abs(source)))


@pytest.mark.parametrize("name", WITH_EXACT)
def test_exact_derivative_matches_finite_differences(name):
    """exact_dx agrees with a central difference."""
    problem = builtin(name)
    x = np.linspace(problem.x_lo + 0.1, problem.x_hi - 0.1, 25)
    eps = 1e-6
    fd = (problem.exact(x + eps, 0.4) - problem.exact(x - eps, 0.4)) / (2 * eps)
    assert np.allclose(problem.exact_dx(x, 0.4), fd, atol=1e-8)


# ── Buckley–Leverett diffusion ────────────────────────────────────────────────

def test_buckley_g_matches_quadrature():
    """The closed-form g equals ∫₀ʷ √a ds."""
    def integrand(s):
        return 0.1 * math.sqrt(buckley_a(np.array(s)))

    for w in (0.0, 0.1, 0.25, 0.5, 0.9, 1.0):
        ref, _ = integrate.quad(integrand, 0.0, w, epsabs=1e-13, epsrel=1e-12, limit=200)
        assert float(buckley_g(np.array(w))) == pytest.approx(ref, abs=1e-9)


def test_buckley_g_endpoint_values():
    """g is clamped outside [0, 1]."""
    assert float(buckley_g(np.array(0.0))) == pytest.approx(0.0, abs=1e-15)
    assert float(buckley_g(np.array(1.0))) == pytest.approx(BUCKLEY_G_MAX)
    assert float(buckley_g(np.array(1.2))) == pytest.approx(BUCKLEY_G_MAX)
    assert float(buckley_g(np.array(-0.3))) == pytest.approx(0.0, abs=1e-15)


def test_buckley_g_monotone():
    """g is non-decreasing."""
    w = np.linspace(-0.2, 1.2, 401)
    assert np.all(np.diff(buckley_g(w)) >= 0.0)


def test_buckley_diffusion_degenerates_at_ends():
    """A vanishes at the pure phases."""
    A = builtin("ex6_buckley").A(np.array([[0.0, 1.0], [0.5, 0.5]]))
    assert np.all(A[0] == 0.0)
    assert np.allclose(A[1], 0.01 * np.eye(2))
