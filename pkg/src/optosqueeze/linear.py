"""Drift/diffusion matrices of the fluctuation quadratures and their stability.

Quadratures follow ``X = (a^dag + a)/sqrt(2)``, ``Y = i(a^dag - a)/sqrt(2)`` so
that vacuum has variance 1/2.
"""

from __future__ import annotations

import cmath
import io
import math
from dataclasses import dataclass

import numpy as np

from .errors import EigenFailure
from .model import EffectiveParams

REDUCED_LABELS = ("X_a1", "Y_a1", "X_b", "Y_b")
FULL_LABELS = ("X_a1", "Y_a1", "X_a2", "Y_a2", "X_b", "Y_b")


@dataclass(frozen=True, eq=False)
class LinearModel:
    """Linear Langevin model ``df/dt = A f + noise`` with noise correlation ``D``."""

    A: np.ndarray
    D: np.ndarray
    labels: tuple

    @property
    def dim(self) -> int:
        return self.A.shape[0]

    def __post_init__(self):
        n = len(self.labels)
        if self.A.shape != (n, n) or self.D.shape != (n, n):
            raise ValueError("A, D and labels have inconsistent sizes")
        if not np.allclose(self.D, self.D.T, rtol=0, atol=1e-15 * max(1.0, np.abs(self.D).max())):
            raise ValueError("D must be symmetric")


def _mechanical_noise(e: EffectiveParams) -> float:
    return e.gamma_m / 2 * (2 * e.n_th + 1)


def build_reduced(e: EffectiveParams) -> LinearModel:
    """Four-quadrature model ``(X_a1, Y_a1, X_b, Y_b)`` after eliminating ``a2``.

    The drift is written in the frame where ``G1`` is real; if the record
    carries a nonzero ``phase_alpha1`` the squeezing phase is shifted by it.
    """
    phi = e.phi - e.phase_alpha1
    c = e.chi_mag * math.cos(2 * phi)
    s = e.chi_mag * math.sin(2 * phi)
    k = e.kappa1 / 2
    g = e.gamma_m / 2
    G = e.G1
    A = np.array(
        [
            [c - k, s + e.delta_c, 0.0, 0.0],
            [s - e.delta_c, -c - k, 2 * G, 0.0],
            [0.0, 0.0, -g, 1.0],
            [2 * G, 0.0, -1.0 - 4 * e.Lambda, -g],
        ]
    )
    nb = _mechanical_noise(e)
    D = np.diag([k, k, nb, nb])
    return LinearModel(A, D, REDUCED_LABELS)


def complex_block(coeff: complex, coeff_conj: complex = 0j) -> np.ndarray:
    """Real 2x2 matrix of ``z -> coeff * z + coeff_conj * conj(z)``.

    Acting on ``(X, Y)`` with ``z = (X + iY)/sqrt(2)``.
    """
    a, b = coeff.real, coeff.imag
    c, d = coeff_conj.real, coeff_conj.imag
    return np.array([[a + c, -b + d], [b + d, a - c]])


def build_full(e: EffectiveParams) -> LinearModel:
    """Six-quadrature model ``(X_a1, Y_a1, X_a2, Y_a2, X_b, Y_b)`` in the lab frame.

    Expands the complex fluctuation equations of both optical modes and the
    mechanics using the mean-field phases stored in ``e``.
    """
    th1, th2 = e.phase_alpha1, e.phase_alpha2
    G1 = cmath.rect(e.G1, th1)
    G2 = cmath.rect(e.G2, th2)
    chi = e.chi  # chi0 * alpha2
    arg_chi0 = 2 * e.phi - th2
    cross_12 = cmath.rect(e.chi_cross, arg_chi0 - th1)  # chi0 * conj(alpha1)
    cross_21 = -cmath.rect(e.chi_cross, th1 - arg_chi0)  # -conj(chi0) * alpha1

    A = np.zeros((6, 6))
    a1, a2, b = slice(0, 2), slice(2, 4), slice(4, 6)
    A[a1, a1] = complex_block(-(1j * e.delta_c + e.kappa1 / 2), chi)
    A[a1, a2] = complex_block(cross_12)
    A[a1, b] = complex_block(1j * G1, 1j * G1)
    A[a2, a2] = complex_block(-(1j * e.delta_c_prime + e.kappa2 / 2))
    A[a2, a1] = complex_block(cross_21)
    A[a2, b] = complex_block(1j * G2, 1j * G2)
    A[b, b] = complex_block(-(1j + e.gamma_m / 2)) + complex_block(-2j * e.Lambda, -2j * e.Lambda)
    A[b, a1] = complex_block(1j * G1.conjugate(), 1j * G1)
    A[b, a2] = complex_block(1j * G2.conjugate(), 1j * G2)

    nb = _mechanical_noise(e)
    D = np.diag([e.kappa1 / 2, e.kappa1 / 2, e.kappa2 / 2, e.kappa2 / 2, nb, nb])
    return LinearModel(A, D, FULL_LABELS)


def reduced_subblock(V_full: np.ndarray, e: EffectiveParams) -> np.ndarray:
    """``(a1, b)`` block of a full covariance, rotated into the real-``G1`` frame.

    The result is directly comparable with covariances of ``build_reduced(e)``.
    """
    th = -e.phase_alpha1
    rot = np.array([[math.cos(th), -math.sin(th)], [math.sin(th), math.cos(th)]])
    R = np.zeros((4, 6))
    R[0:2, 0:2] = rot
    R[2:4, 4:6] = np.eye(2)
    return R @ V_full @ R.T


@dataclass(frozen=True)
class Stability:
    stable: bool
    margin: float
    eigenvalues: np.ndarray

    def __bool__(self):
        return self.stable


def is_stable(m: LinearModel | np.ndarray) -> Stability:
    """Eigenvalue stability test; ``margin = -max Re(lambda)``."""
    A = m.A if isinstance(m, LinearModel) else np.asarray(m)
    try:
        ev = np.linalg.eigvals(A)
    except np.linalg.LinAlgError as exc:
        raise EigenFailure(A) from exc
    if not np.all(np.isfinite(ev)):
        raise EigenFailure(A)
    margin = float(-ev.real.max())
    return Stability(margin > 0, margin, ev)


def characteristic_polynomial(A: np.ndarray) -> np.ndarray:
    """Monic characteristic polynomial coefficients (Faddeev-LeVerrier).

    Returns ``[1, c1, ..., cn]`` for ``det(sI - A) = s^n + c1 s^(n-1) + ...``.
    """
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    coeffs = [1.0]
    M = np.zeros_like(A)
    eye = np.eye(n)
    for k in range(1, n + 1):
        M = A @ M + coeffs[-1] * eye
        coeffs.append(-np.trace(A @ M) / k)
    return np.array(coeffs)


@dataclass(frozen=True)
class RouthHurwitz:
    stable: bool
    degenerate: bool
    first_column: tuple

    def __bool__(self):
        return self.stable


def routh_hurwitz(m: LinearModel | np.ndarray, tol: float = 1e-12) -> RouthHurwitz:
    """Routh-Hurwitz test on the quartic characteristic polynomial of a 4x4 drift.

    ``degenerate`` is set when a first-column Routh entry is within ``tol``
    of zero relative to the terms it was formed from (marginal stability,
    where the sign test cannot be trusted).
    """
    A = m.A if isinstance(m, LinearModel) else np.asarray(m)
    if A.shape != (4, 4):
        raise ValueError("routh_hurwitz is implemented for 4x4 drift matrices only")
    _, a1, a2, a3, a4 = characteristic_polynomial(A)
    # Each first-column entry paired with the magnitude of its largest term.
    r2 = a1
    r3_num, r3_scale = a1 * a2 - a3, max(abs(a1 * a2), abs(a3))
    r4_num = a3 * r3_num - a1 * a1 * a4
    r4_scale = max(abs(a3 * a1 * a2), abs(a3 * a3), abs(a1 * a1 * a4))
    r5 = a4
    spectral = max(abs(a1), abs(a2) ** 0.5, abs(a3) ** (1 / 3), abs(a4) ** 0.25, 1e-300)

    entries = [
        (r2, spectral),
        (r3_num, r3_scale),
        (r4_num, r4_scale),
        (r5, spectral**4),
    ]
    degenerate = any(abs(v) <= tol * max(s, 1e-300) for v, s in entries)
    if a1 != 0 and r3_num != 0:
        column = (1.0, a1, r3_num / a1, r4_num / r3_num, a4)
    else:
        column = (1.0, a1, math.nan, math.nan, a4)
    stable = all(v > 0 for v, _ in entries)
    return RouthHurwitz(stable, degenerate, column)


def matrix_csv(m: LinearModel, which: str = "A") -> str:
    """Row-major CSV of the drift (``"A"``) or diffusion (``"D"``) matrix."""
    M = {"A": m.A, "D": m.D}[which]
    buf = io.StringIO()
    buf.write("row," + ",".join(m.labels) + "\r\n")
    for label, row in zip(m.labels, M):
        buf.write(label + "," + ",".join(format(x, ".17g") for x in row) + "\r\n")
    return buf.getvalue()
