"""Exception hierarchy shared across the package."""


class LfmsError(Exception):
    """Base class for all package errors."""


class ParameterError(LfmsError, ValueError):
    """A numeric parameter is outside its admissible range."""


class ConfigurationError(LfmsError, ValueError):
    """A requested configuration is unsupported or inconsistent."""


class WindowError(LfmsError):
    """A time window is too short or a time falls outside a path's grid."""


class AlignmentError(LfmsError):
    """Two objects live on incompatible time grids."""


class StiffnessError(LfmsError):
    """Explicit time step too large for the fast block."""


class DivergenceError(LfmsError):
    """Integration produced NaN/overflow."""

    def __init__(self, step: int, message: str | None = None):
        self.step = step
        super().__init__(message or f"trajectory diverged at step {step}")


class ContractionError(LfmsError):
    """Fixed-point iteration is not contractive for the given epsilon."""


class NonConvergenceError(LfmsError):
    """Picard iteration hit its cap before reaching tolerance."""

    def __init__(self, residual: float, iterations: int):
        self.residual = residual
        self.iterations = iterations
        super().__init__(
            f"no convergence after {iterations} iterations "
            f"(last weighted residual {residual:.3e})"
        )


class DegeneracyWarning(UserWarning):
    """Particle weights collapsed (very low effective sample size)."""
