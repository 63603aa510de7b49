"""Mechanical squeezing in a Duffing optomechanical cavity with a chi(2) medium.

The package solves the classical mean field, linearizes the fluctuations,
solves the steady-state covariance and reports quadrature squeezing in dB.
"""

__version__ = "0.1.0"

from .errors import (
    ConfigError,
    EigenFailure,
    IllConditionedWarning,
    InsufficientSamplesWarning,
    NoConvergence,
    NonPositiveVariance,
    OptoSqueezeError,
    OracleMismatch,
    ParameterError,
    StepTooLarge,
    UnknownPreset,
    Unstable,
)
from .linear import LinearModel, build_full, build_reduced, is_stable, routh_hurwitz
from .lyapunov import CovarianceResult, integrate_covariance, sample_stochastic, solve_steady
from .meanfield import MeanFieldState, classical_rhs, effective_params, solve_steady_state
from .model import EffectiveParams, PhysicalParams, drive_amplitudes, validate
from .squeezing import optimal_angle, quadrature_variance, squeezing_db
