"""Built-in convection–diffusion systems u_t + f(u)_x = (A(u) u_x)_x + source.

Every callable is vectorised over leading axes: a state array has the
component on its last axis, matrices (f′, A, B) on the last two. Space-time
callables take x of any shape and return x.shape + (m,).

Problem ids:
  ex1_cubic       f = u³, A = I, three travelling modes on (0, 2π)
  ex1_convdom     same data, A = 1e-4·I
  ex1_aniso       same data, A = 100·I
  ex3_longtime    f = u³, A = I, slowly decaying modes (long-time runs)
  ex4_mixed       f = u²/2, A = I on (0, π), Dirichlet left, u_x datum right
  ex4_dirichlet   same, Dirichlet on both ends
  ex5_nonlindiff  f = (u₁+u₂, u₁+u₂), A = diag(u⁴)
  ex6_buckley     coupled Buckley–Leverett flux, degenerate A, no exact solution
"""
from __future__ import annotations

import functools
from collections.abc import Callable
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from src.shared.errors import (
    BoundaryDataError,
    MissingExactSolutionError,
    UnknownProblemError,
)
from src.solver.smalleig import EigenBatch, decompose_batch

StateFn = Callable[[np.ndarray], np.ndarray]
SpaceTimeFn = Callable[[np.ndarray, float], np.ndarray]
BoundaryFn = Callable[[float], np.ndarray]
HintFn = Callable[[np.ndarray], EigenBatch]

BoundaryKind = Literal["periodic", "dirichlet", "mixed"]


@dataclass(frozen=True, eq=False)
class BoundaryCondition:
    """left/right give u at x_lo/x_hi; right_dx gives u_x at x_hi (mixed only)."""

    kind: BoundaryKind
    left: BoundaryFn | None = None
    right: BoundaryFn | None = None
    right_dx: BoundaryFn | None = None

    def __post_init__(self) -> None:
        if self.kind == "dirichlet" and (self.left is None or self.right is None):
            raise BoundaryDataError("Dirichlet conditions need data on both ends")
        if self.kind == "mixed" and (self.left is None or self.right_dx is None):
            raise BoundaryDataError("mixed conditions need u on the left and u_x on the right")

    @property
    def periodic(self) -> bool:
        return self.kind == "periodic"


@dataclass(frozen=True, eq=False)
class ProblemSpec:
    name: str
    m: int
    x_lo: float
    x_hi: float
    f: StateFn
    fprime: StateFn
    A: StateFn
    B: StateFn
    g: StateFn
    source: SpaceTimeFn
    initial: Callable[[np.ndarray], np.ndarray]
    bc: BoundaryCondition
    t_end: float
    exact: SpaceTimeFn | None = None
    exact_dx: SpaceTimeFn | None = None
    eig_hint: HintFn | None = None
    linear_diffusion: bool = True
    diagonal_diffusion: bool = True
    g_secant: Callable[[np.ndarray, np.ndarray], np.ndarray] | None = None
    state_range: tuple[float, float] = (-1.0, 1.0)
    notes: dict[str, str] = field(default_factory=dict)

    @property
    def periodic(self) -> bool:
        return self.bc.periodic

    @functools.cached_property
    def sqrt_A(self) -> np.ndarray:
        """Constant A^{1/2} of a linear-diffusion problem."""
        if not self.linear_diffusion:
            raise ValueError(f"{self.name} has state-dependent diffusion")
        return np.asarray(self.B(np.zeros(self.m)), dtype=float)

    def decompose(self, u_bar: np.ndarray) -> EigenBatch:
        """Eigendecompositions of f′ at the interface states u_bar (n, m)."""
        J = self.fprime(u_bar)
        hint = self.eig_hint(u_bar) if self.eig_hint is not None else None
        return decompose_batch(J, hint)

    def exact_solution(self, x: np.ndarray, t: float) -> np.ndarray:
        if self.exact is None:
            raise MissingExactSolutionError(f"problem {self.name} has no exact solution")
        return self.exact(x, t)


# ── helpers ──────────────────────────────────────────────────────────────────

def _diag(d: np.ndarray) -> np.ndarray:
    return d[..., :, None] * np.eye(d.shape[-1])


def _constant_matrix(M: np.ndarray) -> StateFn:
    M = np.asarray(M, dtype=float)

    def matrix(u: np.ndarray) -> np.ndarray:
        return np.broadcast_to(M, np.shape(u)[:-1] + M.shape).copy()

    return matrix


def _diagonal_hint(eigenvalues: StateFn) -> HintFn:
    """Analytic decomposition of a diagonal Jacobian: R = L = I."""

    def hint(u_bar: np.ndarray) -> EigenBatch:
        lam = eigenvalues(u_bar)
        n, m = lam.shape
        eye = np.broadcast_to(np.eye(m), (n, m, m)).copy()
        return EigenBatch(lam=lam, R=eye, L=eye.copy(), exact=np.ones(n, dtype=bool))

    return hint


def _constant_hint(J: np.ndarray) -> HintFn:
    """Analytic decomposition of a constant symmetric Jacobian."""
    lam, R = np.linalg.eigh(np.asarray(J, dtype=float))
    order = np.argsort(lam)[::-1]
    lam, R = lam[order], R[:, order]
    lam = np.where(np.abs(lam) < 1e-14 * max(1.0, np.abs(lam).max()), 0.0, lam)
    R = R * np.where(R[0] < 0, -1.0, 1.0)
    L = R.T.copy()

    def hint(u_bar: np.ndarray) -> EigenBatch:
        n = u_bar.shape[0]
        return EigenBatch(
            lam=np.broadcast_to(lam, (n, lam.size)).copy(),
            R=np.broadcast_to(R, (n,) + R.shape).copy(),
            L=np.broadcast_to(L, (n,) + L.shape).copy(),
            exact=np.ones(n, dtype=bool),
        )

    return hint


@dataclass(frozen=True, eq=False)
class SineModes:
    """u_i(x, t) = exp(−α_i t)·sin(κ_i x + ω_i t), one mode per component."""

    alpha: np.ndarray
    kappa: np.ndarray
    omega: np.ndarray

    def _parts(self, x: np.ndarray, t: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        x = np.asarray(x, dtype=float)[..., None]
        decay = np.exp(-self.alpha * t)
        phase = self.kappa * x + self.omega * t
        return decay, np.sin(phase), np.cos(phase)

    def u(self, x: np.ndarray, t: float) -> np.ndarray:
        decay, s, _ = self._parts(x, t)
        return decay * s

    def u_x(self, x: np.ndarray, t: float) -> np.ndarray:
        decay, _, c = self._parts(x, t)
        return self.kappa * decay * c

    def u_xx(self, x: np.ndarray, t: float) -> np.ndarray:
        return -self.kappa**2 * self.u(x, t)

    def u_t(self, x: np.ndarray, t: float) -> np.ndarray:
        decay, s, c = self._parts(x, t)
        return decay * (-self.alpha * s + self.omega * c)


def _modes(alpha, kappa, omega) -> SineModes:
    return SineModes(
        np.asarray(alpha, dtype=float), np.asarray(kappa, dtype=float), np.asarray(omega, dtype=float)
    )


def _manufactured_source(modes: SineModes, fprime: StateFn, a: np.ndarray) -> SpaceTimeFn:
    """u_t + f′(u)u_x − a·u_xx for constant diagonal diffusion a."""

    def source(x: np.ndarray, t: float) -> np.ndarray:
        u = modes.u(x, t)
        convective = np.einsum("...ij,...j->...i", fprime(u), modes.u_x(x, t))
        return modes.u_t(x, t) + convective - a * modes.u_xx(x, t)

    return source


def _constant_diagonal_diffusion(a: np.ndarray) -> dict[str, object]:
    a = np.asarray(a, dtype=float)
    root = np.sqrt(a)
    return {
        "A": _constant_matrix(np.diag(a)),
        "B": _constant_matrix(np.diag(root)),
        "g": lambda u: root * u,
        "g_secant": lambda lo, hi: np.broadcast_to(root, np.shape(lo)).copy(),
        "linear_diffusion": True,
    }


# ── Examples with cubic flux on (0, 2π) ──────────────────────────────────────

_EX1_MODES = _modes(alpha=(1.0, 1.0, 2.0), kappa=(2.0, 2.0, 1.0), omega=(1.0, -1.0, 1.0))
_EX3_MODES = _modes(alpha=(0.01, 0.01, 0.01), kappa=(2.0, 2.0, 1.0), omega=(0.1, -0.1, 0.1))


def _cubic(name: str, modes: SineModes, a: float, t_end: float) -> ProblemSpec:
    def fprime(u: np.ndarray) -> np.ndarray:
        return _diag(3.0 * u**2)

    diffusion = np.full(3, a)
    return ProblemSpec(
        name=name,
        m=3,
        x_lo=0.0,
        x_hi=2.0 * np.pi,
        f=lambda u: u**3,
        fprime=fprime,
        source=_manufactured_source(modes, fprime, diffusion),
        initial=lambda x: modes.u(x, 0.0),
        exact=modes.u,
        exact_dx=modes.u_x,
        bc=BoundaryCondition("periodic"),
        eig_hint=_diagonal_hint(lambda u: 3.0 * u**2),
        t_end=t_end,
        **_constant_diagonal_diffusion(diffusion),
    )


# ── Burgers-type system on (0, π) ────────────────────────────────────────────

_EX4_MODES = _modes(alpha=(1.0, 1.0), kappa=(3.0, 3.0), omega=(1.0, 1.0))


def _burgers(name: str, kind: BoundaryKind) -> ProblemSpec:
    modes = _EX4_MODES
    x_hi = np.pi

    def left(t: float) -> np.ndarray:
        return modes.u(np.array(0.0), t)

    if kind == "mixed":
        bc = BoundaryCondition(kind, left=left, right_dx=lambda t: modes.u_x(np.array(x_hi), t))
    else:
        bc = BoundaryCondition(kind, left=left, right=lambda t: modes.u(np.array(x_hi), t))

    def fprime(u: np.ndarray) -> np.ndarray:
        return _diag(u)

    diffusion = np.ones(2)
    return ProblemSpec(
        name=name,
        m=2,
        x_lo=0.0,
        x_hi=x_hi,
        f=lambda u: 0.5 * u**2,
        fprime=fprime,
        source=_manufactured_source(modes, fprime, diffusion),
        initial=lambda x: modes.u(x, 0.0),
        exact=modes.u,
        exact_dx=modes.u_x,
        bc=bc,
        eig_hint=_diagonal_hint(lambda u: np.array(u, dtype=float)),
        t_end=1.0,
        **_constant_diagonal_diffusion(diffusion),
    )


# ── Nonlinear diffusion A = diag(u⁴) ─────────────────────────────────────────

def _ex5_source(x: np.ndarray, t: float) -> np.ndarray:
    s = np.sin(np.asarray(x, dtype=float) - t)
    c = np.cos(np.asarray(x, dtype=float) - t)
    value = c - 4.0 * s**3 * c**2 + s**5
    return np.stack([value, value], axis=-1)


def _ex5_exact(x: np.ndarray, t: float) -> np.ndarray:
    s = np.sin(np.asarray(x, dtype=float) - t)
    return np.stack([s, s], axis=-1)


def _ex5_exact_dx(x: np.ndarray, t: float) -> np.ndarray:
    c = np.cos(np.asarray(x, dtype=float) - t)
    return np.stack([c, c], axis=-1)


def _nonlinear_diffusion() -> ProblemSpec:
    jacobian = np.array([[1.0, 1.0], [1.0, 1.0]])

    def f(u: np.ndarray) -> np.ndarray:
        total = u[..., 0] + u[..., 1]
        return np.stack([total, total], axis=-1)

    return ProblemSpec(
        name="ex5_nonlindiff",
        m=2,
        x_lo=0.0,
        x_hi=2.0 * np.pi,
        f=f,
        fprime=_constant_matrix(jacobian),
        A=lambda u: _diag(u**4),
        B=lambda u: _diag(u**2),
        g=lambda u: u**3 / 3.0,
        g_secant=lambda lo, hi: (lo * lo + lo * hi + hi * hi) / 3.0,
        source=_ex5_source,
        initial=lambda x: _ex5_exact(x, 0.0),
        exact=_ex5_exact,
        exact_dx=_ex5_exact_dx,
        bc=BoundaryCondition("periodic"),
        eig_hint=_constant_hint(jacobian),
        linear_diffusion=False,
        t_end=0.5,
    )


# ── Degenerate Buckley–Leverett system ───────────────────────────────────────

BUCKLEY_DIFFUSION = 0.01
# g(1) = 0.2·∫₀¹ √(s(1−s)) ds
BUCKLEY_G_MAX = np.pi / 40.0


def buckley_fractional(w: np.ndarray) -> np.ndarray:
    """φ(w) = w²/(w² + (1−w)²)."""
    return w**2 / (w**2 + (1.0 - w) ** 2)


def buckley_fractional_deriv(w: np.ndarray) -> np.ndarray:
    return 2.0 * w * (1.0 - w) / (w**2 + (1.0 - w) ** 2) ** 2


def buckley_a(w: np.ndarray) -> np.ndarray:
    """a(w) = 4w(1−w) on [0, 1], zero outside."""
    return np.maximum(0.0, 4.0 * w * (1.0 - w))


def buckley_g(w: np.ndarray) -> np.ndarray:
    """∫₀^w 0.1·√(a(s)) ds, extended constantly outside [0, 1]."""
    w = np.clip(w, 0.0, 1.0)
    root = np.sqrt(w * (1.0 - w))
    return 0.2 * ((2.0 * w - 1.0) * root / 4.0 + np.arcsin(np.sqrt(w)) / 4.0)


def _buckley_f(u: np.ndarray) -> np.ndarray:
    return np.stack([buckley_fractional(u[..., 1]), buckley_fractional(u[..., 0])], axis=-1)


def _buckley_fprime(u: np.ndarray) -> np.ndarray:
    J = np.zeros(np.shape(u)[:-1] + (2, 2))
    J[..., 0, 1] = buckley_fractional_deriv(u[..., 1])
    J[..., 1, 0] = buckley_fractional_deriv(u[..., 0])
    return J


def buckley_hint(u_bar: np.ndarray, tol: float = 1e-12) -> EigenBatch:
    """Closed-form decomposition of J = [[0, a], [b, 0]].

    With ab > tol: λ = ±√(ab) and r± = (√|a|, ±sign(a)√|b|) normalised.
    Otherwise J has no real eigenbasis (ab < 0) or is nilpotent (ab = 0);
    the surrogate λ = (0, 0), R = L = I selects the θ-weighted average of f,
    which is what the characteristic rule returns for a zero spectrum.
    """
    n = u_bar.shape[0]
    a = buckley_fractional_deriv(u_bar[:, 1])
    b = buckley_fractional_deriv(u_bar[:, 0])
    product = a * b
    hyperbolic = product > tol

    lam = np.zeros((n, 2))
    R = np.broadcast_to(np.eye(2), (n, 2, 2)).copy()
    root = np.sqrt(np.where(hyperbolic, product, 1.0))
    x = np.sqrt(np.abs(a))
    y = np.sign(a) * np.sqrt(np.abs(b))
    norm = np.sqrt(x * x + y * y)
    safe = np.where(hyperbolic, norm, 1.0)
    lam[hyperbolic, 0] = root[hyperbolic]
    lam[hyperbolic, 1] = -root[hyperbolic]
    R[hyperbolic, 0, 0] = (x / safe)[hyperbolic]
    R[hyperbolic, 1, 0] = (y / safe)[hyperbolic]
    R[hyperbolic, 0, 1] = (x / safe)[hyperbolic]
    R[hyperbolic, 1, 1] = (-y / safe)[hyperbolic]
    # R⁻¹ = (‖r‖/2)·[[1/x, 1/y], [1/x, −1/y]]
    L = np.broadcast_to(np.eye(2), (n, 2, 2)).copy()
    inv_x = safe / (2.0 * np.where(hyperbolic, x, 1.0))
    inv_y = safe / (2.0 * np.where(hyperbolic, y, 1.0))
    L[hyperbolic, 0, 0] = inv_x[hyperbolic]
    L[hyperbolic, 0, 1] = inv_y[hyperbolic]
    L[hyperbolic, 1, 0] = inv_x[hyperbolic]
    L[hyperbolic, 1, 1] = -inv_y[hyperbolic]
    return EigenBatch(lam=lam, R=R, L=L, exact=hyperbolic)


def _buckley_initial(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    value = np.where(x <= 1.0 / 3.0, 1.0 - 3.0 * x, 0.0)
    return np.stack([value, value], axis=-1)


def _buckley() -> ProblemSpec:
    return ProblemSpec(
        name="ex6_buckley",
        m=2,
        x_lo=0.0,
        x_hi=1.0,
        f=_buckley_f,
        fprime=_buckley_fprime,
        A=lambda u: _diag(BUCKLEY_DIFFUSION * buckley_a(u)),
        B=lambda u: _diag(np.sqrt(BUCKLEY_DIFFUSION * buckley_a(u))),
        g=buckley_g,
        source=lambda x, t: np.zeros(np.shape(x) + (2,)),
        initial=_buckley_initial,
        bc=BoundaryCondition(
            "dirichlet",
            left=lambda t: np.ones(2),
            right=lambda t: np.zeros(2),
        ),
        eig_hint=buckley_hint,
        linear_diffusion=False,
        t_end=0.2,
        state_range=(0.0, 1.0),
        notes={"source": "assumed zero"},
    )


# ── Registry ─────────────────────────────────────────────────────────────────

_BUILDERS: dict[str, Callable[[], ProblemSpec]] = {
    "ex1_cubic": lambda: _cubic("ex1_cubic", _EX1_MODES, 1.0, 1.0),
    "ex1_convdom": lambda: _cubic("ex1_convdom", _EX1_MODES, 1e-4, 1.0),
    "ex1_aniso": lambda: _cubic("ex1_aniso", _EX1_MODES, 100.0, 1.0),
    "ex3_longtime": lambda: _cubic("ex3_longtime", _EX3_MODES, 1.0, 20.0),
    "ex4_mixed": lambda: _burgers("ex4_mixed", "mixed"),
    "ex4_dirichlet": lambda: _burgers("ex4_dirichlet", "dirichlet"),
    "ex5_nonlindiff": _nonlinear_diffusion,
    "ex6_buckley": _buckley,
}

BUILTIN_IDS: tuple[str, ...] = tuple(_BUILDERS)


@functools.lru_cache(maxsize=len(_BUILDERS))
def builtin(name: str) -> ProblemSpec:
    try:
        return _BUILDERS[name]()
    except KeyError:
        raise UnknownProblemError(
            f"unknown problem {name!r}; choose one of {', '.join(BUILTIN_IDS)}"
        ) from None


# ── Consistency checks ───────────────────────────────────────────────────────

def sample_states(problem: ProblemSpec, n: int, rng: np.random.Generator) -> np.ndarray:
    lo, hi = problem.state_range
    return rng.uniform(lo, hi, size=(n, problem.m))


def _fd_columns(fn: StateFn, u: np.ndarray, eps: float) -> np.ndarray:
    """Central-difference Jacobian of fn at states u (n, m), shape (n, m, m)."""
    m = u.shape[-1]
    cols = []
    for i in range(m):
        step = np.zeros(m)
        step[i] = eps
        cols.append((fn(u + step) - fn(u - step)) / (2.0 * eps))
    return np.stack(cols, axis=-1)


def check_invariants(problem: ProblemSpec, states: np.ndarray, eps: float = 1e-6) -> dict[str, float]:
    """Max residuals of B² = A, g′ = B and f′ = ∂f/∂u over the sampled states."""
    B = problem.B(states)
    return {
        "b_squared": float(np.max(np.abs(B @ B - problem.A(states)))),
        "g_prime": float(np.max(np.abs(_fd_columns(problem.g, states, eps) - B))),
        "f_prime": float(np.max(np.abs(_fd_columns(problem.f, states, eps) - problem.fprime(states)))),
    }
