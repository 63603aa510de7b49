"""Mechanical quadrature squeezing in dB relative to the zero-point variance 1/2."""

from __future__ import annotations

import io
import math
from dataclasses import dataclass

import numpy as np

from .errors import NonPositiveVariance

ZPF_VARIANCE = 0.5
THREE_DB = 10.0 * math.log10(2.0)
GRID_POINTS = 720


def _mech_block(V) -> tuple[float, float, float]:
    # The mechanical pair (X_b, Y_b) is always the last two quadratures.
    V = np.asarray(V, dtype=float)
    return float(V[-2, -2]), float(V[-1, -1]), float(V[-2, -1])


def quadrature_variance(V, theta):
    """Variance of ``Z = X_b cos(theta) + Y_b sin(theta)``; ``theta`` may be an array."""
    vx, vy, cxy = _mech_block(V)
    c, s = np.cos(theta), np.sin(theta)
    return vx * c * c + vy * s * s + 2.0 * cxy * s * c


def _to_db(var):
    var = np.asarray(var, dtype=float)
    if np.any(~(var > 0)):
        raise NonPositiveVariance(f"quadrature variance must be > 0 (got min {var.min():.6g})")
    return -10.0 * np.log10(var / ZPF_VARIANCE)


def squeezing_db(V, theta):
    """``-10 log10(2 Var(Z_theta))``: 0 dB at vacuum, positive when squeezed.

    Raises
    ------
    NonPositiveVariance
        If the quadrature variance is not strictly positive.
    """
    out = _to_db(quadrature_variance(V, theta))
    return float(out) if np.ndim(out) == 0 else out


def _wrap_half_pi(theta: float) -> float:
    # Map into (-pi/2, pi/2].
    t = theta - math.pi * math.floor(theta / math.pi + 0.5)
    if t <= -math.pi / 2:
        t += math.pi
    return t


@dataclass(frozen=True)
class OptimalAngle:
    theta: float
    S_db: float
    variance: float
    degenerate: bool


def optimal_angle(V, grid_points: int = GRID_POINTS, degenerate_tol: float = 1e-12) -> OptimalAngle:
    """Angle of minimal mechanical quadrature variance.

    Writing ``Var(theta) = m + r cos(2 theta - 2 theta0)`` the minimum sits at
    ``2 theta = atan2(2 V34, V33 - V44) + pi`` with value ``m - r``.  The
    closed form is checked against a ``grid_points`` scan of ``(-pi/2, pi/2]``.
    When ``r`` vanishes all angles are equivalent; ``theta = 0`` is returned
    with ``degenerate`` set.
    """
    vx, vy, cxy = _mech_block(V)
    mean = 0.5 * (vx + vy)
    r = math.hypot(0.5 * (vx - vy), cxy)
    if r <= degenerate_tol * max(abs(mean), 1e-300):
        return OptimalAngle(0.0, float(_to_db(mean)), mean, True)

    theta = _wrap_half_pi(0.5 * (math.atan2(2.0 * cxy, vx - vy) + math.pi))
    var_min = mean - r

    grid = np.linspace(-math.pi / 2, math.pi / 2, grid_points, endpoint=False) + math.pi / grid_points
    scan = quadrature_variance(V, grid)
    best = float(grid[np.argmin(scan)])
    gap = abs(_wrap_half_pi(best - theta))
    if gap > math.pi / grid_points + 1e-12 and scan.min() < var_min - 1e-12 * r:
        raise ArithmeticError(f"closed-form angle {theta:.6g} disagrees with grid minimum {best:.6g}")
    return OptimalAngle(theta, float(_to_db(var_min)), var_min, False)


@dataclass(frozen=True, eq=False)
class SqueezingReport:
    """Squeezing summary of one covariance.

    ``S_theta0_db`` is the squeezing of ``X_b`` alone; ``S_opt_db`` the best
    over all angles.  ``thetas``/``S_curve`` sample ``[-pi, pi]``.
    """

    theta_opt: float
    S_opt_db: float
    S_theta0_db: float
    var_Xb: float
    var_Yb: float
    cov_XbYb: float
    degenerate: bool
    thetas: np.ndarray
    S_curve: np.ndarray

    @property
    def beats_3db(self) -> bool:
        return self.S_opt_db > THREE_DB

    def S_at(self, theta):
        return np.interp(theta, self.thetas, self.S_curve)


def report(V, curve_points: int = 361) -> SqueezingReport:
    opt = optimal_angle(V)
    vx, vy, cxy = _mech_block(V)
    thetas = np.linspace(-math.pi, math.pi, curve_points)
    return SqueezingReport(
        theta_opt=opt.theta,
        S_opt_db=opt.S_db,
        S_theta0_db=squeezing_db(V, 0.0),
        var_Xb=vx,
        var_Yb=vy,
        cov_XbYb=cxy,
        degenerate=opt.degenerate,
        thetas=thetas,
        S_curve=squeezing_db(V, thetas),
    )


def angle_scan_csv(V, thetas=None) -> str:
    """CSV with columns ``theta, variance, S_db``."""
    if thetas is None:
        thetas = np.linspace(-math.pi, math.pi, 361)
    var = quadrature_variance(V, np.asarray(thetas, dtype=float))
    S = _to_db(var)
    buf = io.StringIO()
    buf.write("theta,variance,S_db\r\n")
    for t, v, s in zip(thetas, var, S):
        buf.write(f"{t:.17g},{v:.17g},{s:.17g}\r\n")
    return buf.getvalue()
