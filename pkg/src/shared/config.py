"""Run configuration: `key = value` text parsed into a validated RunConfig.

Keys (list keys take comma-separated values):
  mode            run | convergence | history | projtest | fluxtest; optional, must agree with the CLI
  problem         built-in problem id
  degree          polynomial degrees k (list)
  cells           cell counts N, positive and increasing (list)
  theta           flux weights θ (list)
  variant         flux1 | flux2
  boundary        optional; must match the problem's boundary kind
  b_hat           auto | outer | diagonal
  cfl             CFL_k; defaults to CFL_TABLE[(problem, k)]
  dt_override     fixed time step, ignores cfl
  t_end           final time; defaults to the problem's own
  output          CSV path; stdout when unset
  field_output    coefficient dump (j, i, ℓ, coeff) of the final field, run mode
  history_stride  steps between history samples
  quad_points     quadrature points per cell; defaults to k + 3
  jump_floor      B̂ degeneracy floor
  snapshot_points sample points per cell in run mode
  projections     projtest kinds: ggr_plus, ggr_minus, ggr_vector, modified
  samples         random states per fluxtest check
  seed            fluxtest random seed

Environment: LOG_LEVEL only.
"""
from __future__ import annotations

from typing import Any, Literal

import structlog
from pydantic import BaseModel, ConfigDict, Field, ValidationError, ValidationInfo, field_validator

from src.shared.errors import ConfigError
from src.solver.fluxes import FluxConfig
from src.solver.problems import BUILTIN_IDS, builtin

log = structlog.get_logger()

_DEFAULTS: dict[str, Any] = {
    "variant": "flux1",
    "b_hat": "auto",
    "history_stride": 1,
    "jump_floor": 1e-12,
    "snapshot_points": 10,
    "samples": 200,
    "seed": 0,
}

# CFL_k per problem and degree, Δt = CFL_k·h²
CFL_TABLE: dict[tuple[str, int], float] = {
    **{("ex1_cubic", k): v for k, v in enumerate((0.005, 0.005, 0.005, 0.002, 0.001))},
    **{("ex1_convdom", k): v for k, v in enumerate((0.6, 0.01, 0.01, 0.002, 0.002))},
    **{("ex1_aniso", k): v for k, v in enumerate((1e-4, 1e-4, 8e-5, 2e-5, 1e-5))},
    **{("ex4_mixed", k): v for k, v in enumerate((0.005, 0.005, 0.005, 0.003, 0.002))},
    **{("ex4_dirichlet", k): v for k, v in enumerate((0.005, 0.005, 0.005, 0.003, 0.0005))},
    **{("ex5_nonlindiff", k): v for k, v in enumerate((0.005, 0.005, 0.005, 0.0005, 0.0001))},
    ("ex3_longtime", 2): 0.005,
    ("ex6_buckley", 1): 0.05,
    ("ex6_buckley", 2): 0.01,
}

PROJECTION_KINDS = ("ggr_plus", "ggr_minus", "ggr_vector", "modified")
_LIST_KEYS = frozenset({"degree", "cells", "theta", "projections"})

Mode = Literal["run", "convergence", "history", "projtest", "fluxtest"]


class RunConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    mode: Mode | None = None
    problem: str
    degree: list[int] = Field(..., min_length=1)
    cells: list[int] = Field(..., min_length=1)
    theta: list[float] = Field(default_factory=lambda: [1.0], min_length=1)
    variant: Literal["flux1", "flux2"] = _DEFAULTS["variant"]
    boundary: Literal["periodic", "dirichlet", "mixed"] | None = None
    b_hat: Literal["auto", "outer", "diagonal"] = _DEFAULTS["b_hat"]
    cfl: float | None = Field(None, gt=0)
    dt_override: float | None = Field(None, gt=0)
    t_end: float | None = Field(None, gt=0)
    output: str | None = None
    field_output: str | None = None
    history_stride: int = Field(_DEFAULTS["history_stride"], ge=1)
    quad_points: int | None = Field(None, ge=1, le=64)
    jump_floor: float = Field(_DEFAULTS["jump_floor"], ge=0)
    snapshot_points: int = Field(_DEFAULTS["snapshot_points"], ge=2)
    projections: list[str] = Field(default_factory=lambda: list(PROJECTION_KINDS))
    samples: int = Field(_DEFAULTS["samples"], ge=1)
    seed: int = _DEFAULTS["seed"]

    @field_validator("problem")
    @classmethod
    def known_problem(cls, v: str) -> str:
        if v not in BUILTIN_IDS:
            raise ValueError(f"unknown problem {v!r}; choose one of {', '.join(BUILTIN_IDS)}")
        return v

    @field_validator("degree")
    @classmethod
    def degrees_supported(cls, v: list[int]) -> list[int]:
        if any(k < 0 or k > 4 for k in v):
            raise ValueError("degrees must lie in 0..4")
        return v

    @field_validator("cells")
    @classmethod
    def cells_increasing(cls, v: list[int]) -> list[int]:
        if any(n < 1 for n in v):
            raise ValueError("cell counts must be positive")
        if any(b <= a for a, b in zip(v, v[1:], strict=False)):
            raise ValueError("cell counts must be strictly increasing")
        return v

    @field_validator("theta")
    @classmethod
    def theta_positive(cls, v: list[float]) -> list[float]:
        if any(not t > 0 for t in v):
            raise ValueError("theta must be positive")
        return v

    @field_validator("projections")
    @classmethod
    def projections_known(cls, v: list[str]) -> list[str]:
        unknown = [p for p in v if p not in PROJECTION_KINDS]
        if unknown:
            raise ValueError(f"unknown projection kind(s) {unknown}; choose from {PROJECTION_KINDS}")
        return v

    @field_validator("boundary")
    @classmethod
    def boundary_matches_problem(cls, v: str | None, info: ValidationInfo) -> str | None:
        problem = info.data.get("problem")
        if v is None or problem is None:
            return v
        kind = builtin(problem).bc.kind
        if v != kind:
            raise ValueError(f"boundary {v!r} does not match {problem} ({kind})")
        return v

    def cfl_for(self, k: int) -> float:
        if self.cfl is not None:
            return self.cfl
        try:
            return CFL_TABLE[(self.problem, k)]
        except KeyError:
            raise ConfigError(
                f"no tabulated CFL number for {self.problem} with k={k}; set cfl", key="cfl"
            ) from None

    def flux_config(self, theta: float) -> FluxConfig:
        return FluxConfig(theta=theta, variant=self.variant, jump_floor=self.jump_floor,
                          b_hat=self.b_hat)


def _split_value(key: str, value: str) -> Any:
    if key in _LIST_KEYS:
        return [item.strip() for item in value.split(",") if item.strip()]
    return value


def parse_config(text: str) -> RunConfig:
    """Parse `key = value` lines; `#` starts a comment; unknown keys are errors."""
    raw: dict[str, Any] = {}
    lines: dict[str, int] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        content = line.split("#", 1)[0].strip()
        if not content:
            continue
        if "=" not in content:
            raise ConfigError(f"expected 'key = value', got {content!r}", line=lineno)
        key, value = (part.strip() for part in content.split("=", 1))
        if key not in RunConfig.model_fields:
            raise ConfigError(f"unknown key {key!r}", line=lineno, key=key)
        if key in raw:
            raise ConfigError(f"duplicate key {key!r}", line=lineno, key=key)
        if not value:
            raise ConfigError(f"empty value for {key!r}", line=lineno, key=key)
        raw[key] = _split_value(key, value)
        lines[key] = lineno

    try:
        config = RunConfig.model_validate(raw)
    except ValidationError as exc:
        first = exc.errors()[0]
        key = str(first["loc"][0]) if first["loc"] else None
        where = lines.get(key) if key else None
        raise ConfigError(f"{key or 'config'}: {first['msg']}", line=where, key=key) from exc
    log.debug("config_parsed", problem=config.problem, mode=config.mode, keys=sorted(raw))
    return config
