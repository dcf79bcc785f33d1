"""Error hierarchy shared by the solver, the verification suite and the CLI.

The CLI maps these onto exit codes:
  ConfigError  → 2
  BlowUpError  → 3
  other LDGError → 1
"""
from __future__ import annotations


class LDGError(Exception):
    """Root of every error raised on purpose by this package."""


class ConfigError(LDGError, ValueError):
    """Config text could not be parsed or failed validation."""

    def __init__(self, message: str, *, line: int | None = None, key: str | None = None):
        self.line = line
        self.key = key
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(f"{prefix}{message}")


class MeshError(LDGError, ValueError):
    """Invalid partition or cell/interface index."""


class MissingTraceError(LDGError, LookupError):
    """The requested side of a boundary interface does not exist."""


class EigenDecompositionError(LDGError, ArithmeticError):
    """A flux Jacobian could not be diagonalised."""

    def __init__(self, message: str, *, interface: int | None = None):
        self.interface = interface
        self.detail = message
        where = f" at interface {interface}" if interface is not None else ""
        super().__init__(f"{message}{where}")


class NonSymmetrizableJacobianError(EigenDecompositionError):
    """Complex eigenvalues beyond tolerance."""


class DefectiveJacobianError(EigenDecompositionError):
    """Eigenvectors do not span the state space."""


class SingularSystemError(LDGError, ArithmeticError):
    """A linear system required by a projection or the diffusion is singular."""


class UnknownProblemError(LDGError, ValueError):
    """No built-in problem with the requested id."""


class MissingExactSolutionError(LDGError, ValueError):
    """The requested driver needs an exact solution the problem lacks."""


class BoundaryDataError(LDGError, ValueError):
    """Boundary data required by the boundary policy is missing."""


class BlowUpError(LDGError, FloatingPointError):
    """Non-finite state encountered during time integration."""

    def __init__(self, t: float, max_norm: float, stage: int | None = None):
        self.t = t
        self.max_norm = max_norm
        self.stage = stage
        super().__init__(f"non-finite state at t={t:.6e} (stage {stage}, max |u|={max_norm:.6e})")
