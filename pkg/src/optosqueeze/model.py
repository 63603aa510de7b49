"""Parameter records for the Duffing optomechanical cavity with a chi(2) medium.

Every rate is stored in units of the mechanical frequency ``omega_m``.  Only
``PhysicalParams.omega_m`` itself is kept in rad/s, because converting drive
powers in watts to photon fluxes and reporting thermal occupations needs an
absolute frequency scale.
"""

from __future__ import annotations

import cmath
import math
from collections.abc import Mapping
from dataclasses import dataclass, fields

from .errors import ParameterError

HBAR = 1.054571817e-34  # J s
K_BOLTZMANN = 1.380649e-23  # J / K


@dataclass(frozen=True)
class PhysicalParams:
    """Laboratory-frame inputs of the cavity.

    Attributes
    ----------
    omega_m : float
        Mechanical frequency in rad/s.
    omega_L : float
        Laser frequency, multiples of ``omega_m``.
    delta_bar_c : float
        Bare cavity detuning ``omega_c - omega_L``, multiples of ``omega_m``.
    kappa1, kappa2 : float
        Decay rates of the fundamental and second-harmonic modes.
    gamma_m : float
        Mechanical damping rate.
    g1, g2 : float
        Single-photon optomechanical couplings.
    eta : float
        Duffing amplitude.
    chi0, chi0_phase : float
        Magnitude and phase (rad) of the chi(2) coupling between the modes.
    P1, P2 : float
        Drive powers in watts.
    n_th : float
        Mean thermal phonon number.
    """

    omega_m: float
    omega_L: float
    delta_bar_c: float
    kappa1: float
    kappa2: float
    gamma_m: float
    g1: float
    g2: float
    eta: float
    chi0: float = 0.0
    chi0_phase: float = 0.0
    P1: float = 0.0
    P2: float = 0.0
    n_th: float = 0.0

    def __post_init__(self):
        violations = validate(self)
        if violations:
            raise ParameterError(violations)

    @property
    def chi0_complex(self) -> complex:
        return cmath.rect(self.chi0, self.chi0_phase)


@dataclass(frozen=True)
class EffectiveParams:
    """Inputs of the linearized fluctuation dynamics.

    Rates are multiples of ``omega_m``.  ``G1``, ``G2`` and ``chi_mag`` are
    magnitudes; the phases of the complex couplings are carried separately.
    ``phi`` is half the phase of ``chi = chi0 * alpha2``; ``phase_alpha1`` and
    ``phase_alpha2`` are the mean-field phases of the two optical modes (both
    zero when the record is entered directly, which makes ``G1`` real).
    ``chi_cross`` is ``|chi0 * alpha1|``, the coupling between the
    fluctuations of the two optical modes, and only matters for the
    six-quadrature model.
    """

    delta_c: float
    G1: float
    Lambda: float
    chi_mag: float
    phi: float
    kappa1: float
    gamma_m: float = 1e-6
    n_th: float = 0.0
    phi_b: float = 0.0
    delta_c_prime: float = 20.0
    G2: float = 0.0
    kappa2: float = 2000.0
    chi_cross: float = 0.0
    phase_alpha1: float = 0.0
    phase_alpha2: float = 0.0

    def __post_init__(self):
        violations = validate(self)
        if violations:
            raise ParameterError(violations)

    @property
    def chi(self) -> complex:
        return cmath.rect(self.chi_mag, 2.0 * self.phi)


_POSITIVE = {
    PhysicalParams: ("omega_m", "omega_L", "kappa1", "kappa2", "gamma_m"),
    EffectiveParams: ("kappa1", "kappa2", "gamma_m"),
}
_NONNEGATIVE = {
    PhysicalParams: ("eta", "chi0", "P1", "P2", "n_th", "g1", "g2"),
    EffectiveParams: ("chi_mag", "n_th", "G1", "G2", "chi_cross", "Lambda"),
}


def _field_names(cls):
    return [f.name for f in fields(cls)]


def validate(p, kind=None) -> list[str]:
    """Return every invariant violated by a parameter record.

    ``p`` may be a ``PhysicalParams``/``EffectiveParams`` instance or a plain
    mapping of field values; for a mapping pass ``kind`` as the record class.
    An empty list means the record is valid.
    """
    if isinstance(p, Mapping):
        if kind is None:
            raise TypeError("kind is required when validating a mapping")
        cls, values = kind, dict(p)
    else:
        cls = type(p)
        values = {name: getattr(p, name) for name in _field_names(cls)}
    if cls not in _POSITIVE:
        raise TypeError(f"cannot validate {cls!r}")

    out = []
    for name in _field_names(cls):
        if name not in values:
            continue
        value = values[name]
        try:
            finite = math.isfinite(value)
        except TypeError:
            out.append(f"{name} must be a real number (got {value!r})")
            continue
        if not finite:
            out.append(f"{name} must be finite (got {value!r})")
    for name in _POSITIVE[cls]:
        value = values.get(name)
        if value is not None and math.isfinite(value) and not value > 0:
            out.append(f"{name} must be > 0 (got {value!r})")
    for name in _NONNEGATIVE[cls]:
        value = values.get(name)
        if value is not None and math.isfinite(value) and value < 0:
            out.append(f"{name} must be >= 0 (got {value!r})")
    return out


def drive_amplitudes(p: PhysicalParams) -> tuple[float, float]:
    """Drive amplitudes ``(eps1, eps2)`` in units of ``omega_m``.

    ``eps_j = sqrt(2 kappa_j Phi_j)`` with photon fluxes
    ``Phi_1 = P1 / (hbar omega_L)`` and ``Phi_2 = P2 / (2 hbar omega_L)``.
    """
    w = p.omega_m
    flux1 = p.P1 / (HBAR * p.omega_L * w)
    flux2 = p.P2 / (HBAR * 2.0 * p.omega_L * w)
    eps1 = math.sqrt(2.0 * p.kappa1 * w * flux1) / w
    eps2 = math.sqrt(2.0 * p.kappa2 * w * flux2) / w
    return eps1, eps2


def thermal_occupation(temperature: float, omega_m: float) -> float:
    """Bose-Einstein occupation of a mode at ``omega_m`` (rad/s)."""
    if temperature <= 0:
        return 0.0
    return 1.0 / math.expm1(HBAR * omega_m / (K_BOLTZMANN * temperature))
