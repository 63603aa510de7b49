"""Exception hierarchy shared by all modules."""


class OptoSqueezeError(Exception):
    """Base class for every error raised by the package."""


class ParameterError(OptoSqueezeError, ValueError):
    """A parameter record violates one of its invariants."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(str(v) for v in self.violations))


class ConfigError(OptoSqueezeError):
    """Configuration text could not be parsed or contains unknown keys."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class NoConvergence(OptoSqueezeError):
    """Mean-field relaxation or Newton polish failed to settle."""

    def __init__(self, message, residual=float("nan")):
        self.residual = residual
        super().__init__(f"{message} (last residual {residual:.3e})")


class EigenFailure(OptoSqueezeError):
    """The dense eigensolver did not converge."""

    def __init__(self, matrix):
        self.matrix = matrix
        super().__init__(f"eigenvalue computation failed for matrix\n{matrix}")


class Unstable(OptoSqueezeError):
    """The drift matrix has an eigenvalue with non-negative real part."""

    def __init__(self, margin):
        self.margin = margin
        super().__init__(f"linear model is unstable (margin {margin:.6g})")


class StepTooLarge(OptoSqueezeError, ValueError):
    """Fixed time step violates the dt * ||A|| <= 0.1 accuracy guard."""


class NonPositiveVariance(OptoSqueezeError, ValueError):
    """A quadrature variance is not strictly positive."""


class UnknownPreset(OptoSqueezeError, KeyError):
    """Requested figure preset does not exist."""


class OracleMismatch(OptoSqueezeError):
    """An in-sweep oracle check disagreed with the algebraic solve."""

    def __init__(self, point, deviation, tolerance):
        self.point = point
        self.deviation = deviation
        self.tolerance = tolerance
        super().__init__(
            f"ODE oracle disagrees with algebraic covariance at {point}: "
            f"max deviation {deviation:.3e} > {tolerance:.1e}"
        )


class IllConditionedWarning(UserWarning):
    """Linear system for the steady covariance is nearly singular."""


class InsufficientSamplesWarning(UserWarning):
    """Stochastic estimate has relative standard error above 10 %."""
