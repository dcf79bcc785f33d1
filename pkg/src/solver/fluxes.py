"""Interface numerical fluxes.

All functions work on batches: traces are arrays (..., m) with one row per
interface, eigendecompositions carry matching leading axes. Weighted
average convention: p^(θ) = θ·p⁻ + θ̄·p⁺ with θ̄ = 1 − θ.

Diffusive pairings:
  flux1  û = u^(θ),  p̂ = p^(θ̄)
  flux2  û = u^(θ̄),  p̂ = p^(θ)

B̂ modes (nonlinear diffusion only):
  outer     [g][u]ᵀ / ‖[u]‖², B({u}) below the jump floor
  diagonal  diag([g_i]/[u_i]), B_ii({u}) per component below the floor
  auto      diagonal when the problem's A is diagonal, otherwise outer
"""
from __future__ import annotations

import math
from collections.abc import Callable
from dataclasses import dataclass
from typing import Literal

import numpy as np
import structlog

from src.shared.errors import LDGError
from src.solver.smalleig import EigenBatch, EigenDecomp

log = structlog.get_logger()

Variant = Literal["flux1", "flux2"]
BHatMode = Literal["auto", "outer", "diagonal"]

DEFAULT_JUMP_FLOOR = 1e-12


@dataclass(frozen=True)
class FluxConfig:
    theta: float = 1.0
    variant: Variant = "flux1"
    jump_floor: float = DEFAULT_JUMP_FLOOR
    b_hat: BHatMode = "auto"

    def __post_init__(self) -> None:
        if not math.isfinite(self.theta) or self.theta <= 0:
            raise LDGError(f"theta must be finite and positive, got {self.theta}")
        if self.variant not in ("flux1", "flux2"):
            raise LDGError(f"unknown flux variant {self.variant!r}")
        if self.b_hat not in ("auto", "outer", "diagonal"):
            raise LDGError(f"unknown B-hat mode {self.b_hat!r}")
        if not self.jump_floor >= 0:
            raise LDGError(f"jump_floor must be non-negative, got {self.jump_floor}")
        if not 0.5 < self.theta <= 1.5:
            log.warning("theta_outside_analysed_range", theta=self.theta)

    @property
    def theta_bar(self) -> float:
        return 1.0 - self.theta

    @property
    def theta_u(self) -> float:
        """Weight of the û flux (and of ĝ on the nonlinear path)."""
        return self.theta if self.variant == "flux1" else self.theta_bar

    @property
    def theta_p(self) -> float:
        """Weight of the p̂ flux."""
        return self.theta_bar if self.variant == "flux1" else self.theta


def weighted_average(minus: np.ndarray, plus: np.ndarray, theta: float) -> np.ndarray:
    return theta * np.asarray(minus) + (1.0 - theta) * np.asarray(plus)


def convective_flux(
    minus: np.ndarray,
    plus: np.ndarray,
    f: Callable[[np.ndarray], np.ndarray],
    eig: EigenDecomp | EigenBatch,
    theta: float,
) -> np.ndarray:
    """Upwind-biased characteristic flux.

    z± = L·f(u±); each field takes θz⁻ + θ̄z⁺ if λ ≥ 0 and θ̄z⁻ + θz⁺
    otherwise; the result is R·ẑ.
    """
    z_minus = np.einsum("...ij,...j->...i", eig.L, f(minus))
    z_plus = np.einsum("...ij,...j->...i", eig.L, f(plus))
    theta_bar = 1.0 - theta
    z_hat = np.where(
        eig.lam >= 0.0,
        theta * z_minus + theta_bar * z_plus,
        theta_bar * z_minus + theta * z_plus,
    )
    return np.einsum("...ij,...j->...i", eig.R, z_hat)


def diffusive_fluxes(
    u_minus: np.ndarray,
    u_plus: np.ndarray,
    p_minus: np.ndarray,
    p_plus: np.ndarray,
    config: FluxConfig,
) -> tuple[np.ndarray, np.ndarray]:
    """(û, p̂) for the configured alternating pairing."""
    return (
        weighted_average(u_minus, u_plus, config.theta_u),
        weighted_average(p_minus, p_plus, config.theta_p),
    )


def g_hat(
    minus: np.ndarray,
    plus: np.ndarray,
    g: Callable[[np.ndarray], np.ndarray],
    theta: float,
) -> np.ndarray:
    return weighted_average(g(minus), g(plus), theta)


def b_hat_outer(
    minus: np.ndarray,
    plus: np.ndarray,
    g: Callable[[np.ndarray], np.ndarray],
    B: Callable[[np.ndarray], np.ndarray],
    jump_floor: float = DEFAULT_JUMP_FLOOR,
) -> np.ndarray:
    """[g][u]ᵀ/‖[u]‖², falling back to B at the trace average."""
    jump_u = np.asarray(plus) - np.asarray(minus)
    jump_g = g(plus) - g(minus)
    norm_sq = np.sum(jump_u**2, axis=-1)
    degenerate = np.sqrt(norm_sq) < jump_floor
    safe = np.where(degenerate, 1.0, norm_sq)
    secant = jump_g[..., :, None] * jump_u[..., None, :] / safe[..., None, None]
    if np.any(degenerate):
        log.debug("b_hat_fallback", count=int(np.sum(degenerate)), mode="outer")
        fallback = B(0.5 * (np.asarray(minus) + np.asarray(plus)))
        secant = np.where(degenerate[..., None, None], fallback, secant)
    return secant


def b_hat_diagonal(
    minus: np.ndarray,
    plus: np.ndarray,
    g: Callable[[np.ndarray], np.ndarray],
    B: Callable[[np.ndarray], np.ndarray],
    jump_floor: float = DEFAULT_JUMP_FLOOR,
    secant: Callable[[np.ndarray, np.ndarray], np.ndarray] | None = None,
) -> np.ndarray:
    """diag([g_i]/[u_i]) for diagonal diffusion.

    A problem-supplied divided difference ``secant(u⁻, u⁺)`` replaces the
    quotient when present; it needs no floor.
    """
    minus = np.asarray(minus)
    plus = np.asarray(plus)
    if secant is not None:
        slopes = secant(minus, plus)
    else:
        jump_u = plus - minus
        degenerate = np.abs(jump_u) < jump_floor
        safe = np.where(degenerate, 1.0, jump_u)
        slopes = (g(plus) - g(minus)) / safe
        if np.any(degenerate):
            log.debug("b_hat_fallback", count=int(np.sum(degenerate)), mode="diagonal")
            at_mean = np.diagonal(B(0.5 * (minus + plus)), axis1=-2, axis2=-1)
            slopes = np.where(degenerate, at_mean, slopes)
    return slopes[..., :, None] * np.eye(slopes.shape[-1])


def b_hat(
    minus: np.ndarray,
    plus: np.ndarray,
    g: Callable[[np.ndarray], np.ndarray],
    B: Callable[[np.ndarray], np.ndarray],
    jump_floor: float = DEFAULT_JUMP_FLOOR,
    *,
    mode: Literal["outer", "diagonal"] = "outer",
    secant: Callable[[np.ndarray, np.ndarray], np.ndarray] | None = None,
) -> np.ndarray:
    if mode == "diagonal":
        return b_hat_diagonal(minus, plus, g, B, jump_floor, secant)
    return b_hat_outer(minus, plus, g, B, jump_floor)


def resolve_b_hat_mode(config: FluxConfig, diagonal_diffusion: bool) -> Literal["outer", "diagonal"]:
    if config.b_hat == "auto":
        return "diagonal" if diagonal_diffusion else "outer"
    return config.b_hat
