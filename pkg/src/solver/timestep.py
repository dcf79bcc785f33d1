"""Explicit SSP-RK3 (Shu–Osher) time integration with Δt = CFL_k·h².

Stage times are t, t + Δt, t + Δt/2. The last step is shortened so the
run lands on t_end exactly.
"""
from __future__ import annotations

import math
from collections.abc import Callable
from dataclasses import dataclass
from typing import Protocol

import numpy as np
import structlog

from src.shared.errors import BlowUpError, LDGError
from src.solver.field import DGField
from src.solver.mesh import Partition1D

log = structlog.get_logger()

StepCallback = Callable[[int, float, DGField], None]


class Operator(Protocol):
    partition: Partition1D

    def __call__(self, u: DGField, t: float) -> DGField: ...


@dataclass(frozen=True)
class TimeControl:
    cfl: float | None
    t_end: float
    dt_override: float | None = None

    def __post_init__(self) -> None:
        if self.cfl is None and self.dt_override is None:
            raise LDGError("either cfl or dt_override is required")
        if self.cfl is not None and not self.cfl > 0:
            raise LDGError(f"cfl must be positive, got {self.cfl}")
        if not self.t_end > 0:
            raise LDGError(f"t_end must be positive, got {self.t_end}")
        if self.dt_override is not None and not self.dt_override > 0:
            raise LDGError(f"dt_override must be positive, got {self.dt_override}")

    def step_size(self, h: float) -> float:
        if self.dt_override is not None:
            return self.dt_override
        return self.cfl * h * h

    def schedule(self, h: float) -> tuple[float, int, float]:
        """(dt, number of steps, length of the last step)."""
        dt = self.step_size(h)
        n_steps = max(1, math.ceil(self.t_end / dt - 1e-9))
        last = self.t_end - (n_steps - 1) * dt
        return dt, n_steps, last


def _check_finite(u: DGField, t: float, stage: int) -> None:
    if not np.all(np.isfinite(u.coeff)):
        finite = u.coeff[np.isfinite(u.coeff)]
        max_norm = float(np.max(np.abs(finite))) if finite.size else math.inf
        log.error("blow_up", t=t, stage=stage, max_norm=max_norm)
        raise BlowUpError(t, max_norm, stage)


def ssp_rk3_step(op: Callable[[DGField, float], DGField], u: DGField, t: float, dt: float) -> DGField:
    if not dt > 0:
        raise LDGError(f"time step must be positive, got {dt}")
    u1 = DGField(u.coeff + dt * op(u, t).coeff)
    _check_finite(u1, t, 1)
    u2 = DGField(0.75 * u.coeff + 0.25 * (u1.coeff + dt * op(u1, t + dt).coeff))
    _check_finite(u2, t + dt, 2)
    u3 = DGField(u.coeff / 3.0 + 2.0 / 3.0 * (u2.coeff + dt * op(u2, t + 0.5 * dt).coeff))
    _check_finite(u3, t + 0.5 * dt, 3)
    return u3


def integrate(
    op: Operator,
    u0: DGField,
    control: TimeControl,
    callback: StepCallback | None = None,
) -> DGField:
    """Advance u0 from t = 0 to control.t_end; callback(step, t, u) sees step 0 too."""
    dt, n_steps, last = control.schedule(op.partition.h)
    log.info("integrate_start", dt=dt, n_steps=n_steps, t_end=control.t_end)
    u = u0.copy()
    if callback is not None:
        callback(0, 0.0, u)
    t = 0.0
    for step in range(1, n_steps + 1):
        step_dt = last if step == n_steps else dt
        u = ssp_rk3_step(op, u, t, step_dt)
        t = control.t_end if step == n_steps else step * dt
        if callback is not None:
            callback(step, t, u)
    log.info("integrate_done", t=t, n_steps=n_steps)
    return u
