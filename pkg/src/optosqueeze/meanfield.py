"""Classical steady state of the driven cavity and mechanical amplitudes."""

from __future__ import annotations

import cmath
import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.integrate import solve_ivp

from .errors import NoConvergence
from .model import EffectiveParams, PhysicalParams, drive_amplitudes


@dataclass(frozen=True)
class MeanFieldState:
    """Complex amplitudes ``(alpha1, alpha2, beta)`` of a fixed point.

    ``residual`` is the relative norm of the steady-state equations at the
    returned amplitudes and ``ambiguous_branch`` is set when Newton started
    from perturbed points lands on a different fixed point (multistability).
    """

    alpha1: complex = 0j
    alpha2: complex = 0j
    beta: complex = 0j
    residual: float = 0.0
    ambiguous_branch: bool = False

    def as_vector(self) -> np.ndarray:
        return np.array([self.alpha1, self.alpha2, self.beta], dtype=complex)


@dataclass(frozen=True)
class SolverOptions:
    tol: float = 1e-10
    rtol: float = 1e-10
    max_periods: float = 1e4
    beta_damping_boost: float = 2.0
    settle_tol: float = 1e-6
    newton_maxiter: int = 60
    branch_probes: tuple = (0.0, 0.5, 1.5, 3.0)


def _rhs(a1, a2, b, p: PhysicalParams, eps1, eps2, gamma_b):
    x = b.real  # |beta| cos(phi_b)
    delta_c = p.delta_bar_c - 2.0 * p.g1 * x
    delta_cp = 2.0 * p.delta_bar_c - 2.0 * p.g2 * x
    chi0 = p.chi0_complex
    da1 = -(1j * delta_c + p.kappa1 / 2) * a1 + chi0 * np.conj(a1) * a2 + eps1
    # a2 couples through conj(chi0) so the chi(2) Hamiltonian stays Hermitian.
    da2 = -(1j * delta_cp + p.kappa2 / 2) * a2 - np.conj(chi0) / 2 * a1**2 + eps2
    db = (
        -(1j + gamma_b / 2) * b
        - 1j * p.eta * (16.0 * x**3 + 12.0 * x)
        + 1j * p.g1 * abs(a1) ** 2
        + 1j * p.g2 * abs(a2) ** 2
    )
    return np.array([da1, da2, db], dtype=complex)


def classical_rhs(s: MeanFieldState, p: PhysicalParams) -> np.ndarray:
    """Time derivatives ``(d alpha1, d alpha2, d beta)/dt`` at state ``s``.

    The effective detunings are recomputed from ``beta`` so the equations are
    self-consistent.
    """
    eps1, eps2 = drive_amplitudes(p)
    return _rhs(s.alpha1, s.alpha2, s.beta, p, eps1, eps2, p.gamma_m)


def _to_real(z):
    return np.concatenate([z.real, z.imag])


def _to_complex(u):
    return u[:3] + 1j * u[3:]


def _residual_scale(z, p, eps1, eps2):
    source = p.g1 * abs(z[0]) ** 2 + p.g2 * abs(z[1]) ** 2
    return max(eps1, eps2, source, 1e-300)


def _relative_residual(z, p, eps1, eps2):
    r = _rhs(*z, p, eps1, eps2, p.gamma_m)
    return float(np.linalg.norm(r) / _residual_scale(z, p, eps1, eps2))


def _newton(u0, p, eps1, eps2, opts: SolverOptions):
    def F(u):
        return _to_real(_rhs(*_to_complex(u), p, eps1, eps2, p.gamma_m))

    u = np.array(u0, dtype=float)
    f = F(u)
    for _ in range(opts.newton_maxiter):
        z = _to_complex(u)
        if np.linalg.norm(f) <= opts.tol * _residual_scale(z, p, eps1, eps2):
            return u, True
        jac = np.empty((6, 6))
        for j in range(6):
            h = 1e-7 * max(abs(u[j]), 1.0)
            du = np.zeros(6)
            du[j] = h
            jac[:, j] = (F(u + du) - F(u - du)) / (2 * h)
        try:
            step = np.linalg.solve(jac, -f)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(jac, -f, rcond=None)[0]
        t = 1.0
        fnorm = np.linalg.norm(f)
        while t > 1e-6:
            trial = u + t * step
            ft = F(trial)
            if np.linalg.norm(ft) < fnorm:
                break
            t *= 0.5
        u, f = trial, ft
    z = _to_complex(u)
    ok = np.linalg.norm(f) <= opts.tol * _residual_scale(z, p, eps1, eps2)
    return u, ok


def _relax(z0, p, eps1, eps2, opts: SolverOptions):
    """Integrate the equations (with extra damping on beta) until they settle."""
    gamma_b = max(p.gamma_m, opts.beta_damping_boost)

    chi0 = p.chi0_complex
    chi0c = chi0.conjugate()
    k1, k2 = p.kappa1 / 2, p.kappa2 / 2
    out = np.empty(6)

    # Scalar transcription of _rhs; the integrator calls it ~1e5 times.
    def f(_t, u):
        a1 = complex(u[0], u[3])
        a2 = complex(u[1], u[4])
        b = complex(u[2], u[5])
        x = u[2]
        dc = p.delta_bar_c - 2.0 * p.g1 * x
        dcp = 2.0 * p.delta_bar_c - 2.0 * p.g2 * x
        da1 = -complex(k1, dc) * a1 + chi0 * a1.conjugate() * a2 + eps1
        da2 = -complex(k2, dcp) * a2 - chi0c / 2 * a1 * a1 + eps2
        src = p.g1 * (a1.real**2 + a1.imag**2) + p.g2 * (a2.real**2 + a2.imag**2)
        db = -complex(gamma_b / 2, 1.0) * b + 1j * (src - p.eta * (16.0 * x**3 + 12.0 * x))
        out[0], out[1], out[2] = da1.real, da2.real, db.real
        out[3], out[4], out[5] = da1.imag, da2.imag, db.imag
        return out.copy()

    horizon = 2 * math.pi * opts.max_periods
    chunk = 20.0 / min(gamma_b, p.kappa1, p.kappa2)
    u = _to_real(np.asarray(z0, dtype=complex))
    t = 0.0
    rel = math.inf
    while t < horizon:
        t_next = min(t + chunk, horizon)
        sol = solve_ivp(f, (t, t_next), u, method="DOP853", rtol=opts.rtol, atol=1e-12)
        if not sol.success:
            raise NoConvergence(f"relaxation integrator failed: {sol.message}", rel)
        u = sol.y[:, -1]
        t = t_next
        z = _to_complex(u)
        drift = _rhs(*z, p, eps1, eps2, gamma_b)
        rel = float(np.linalg.norm(drift) / _residual_scale(z, p, eps1, eps2))
        if rel < opts.settle_tol:
            return z
    raise NoConvergence("relaxation did not settle within the horizon", rel)


def _resonant_probes(p: PhysicalParams, eps1, eps2):
    # Other branches typically sit where the displacement brings a mode to resonance.
    probes = []
    for x in (p.delta_bar_c / (2 * p.g1) if p.g1 else None, p.delta_bar_c / p.g2 if p.g2 else None):
        if x is None:
            continue
        a1 = eps1 / complex(p.kappa1 / 2, p.delta_bar_c - 2 * p.g1 * x)
        a2 = eps2 / complex(p.kappa2 / 2, 2 * p.delta_bar_c - 2 * p.g2 * x)
        probes.append(np.array([a1, a2, complex(x, p.gamma_m * x / 2)]))
    return probes


def solve_steady_state(p: PhysicalParams, init: MeanFieldState | None = None, opts: SolverOptions | None = None) -> MeanFieldState:
    """Find the dynamically reachable fixed point of the mean-field equations.

    The state is first relaxed by explicit adaptive integration starting from
    ``init`` (zero by default), with an artificial damping boost on ``beta``
    because the bare mechanical damping is far too slow to integrate through.
    A Newton polish on the true equations then removes the bias of the boost.
    Newton is also restarted from rescaled copies of the solution and from
    states where a cavity mode is brought to resonance by the mechanical
    displacement; landing on a different fixed point sets ``ambiguous_branch``.

    Raises
    ------
    NoConvergence
        If relaxation does not settle or Newton fails to reach ``opts.tol``.
    """
    opts = opts or SolverOptions()
    eps1, eps2 = drive_amplitudes(p)
    if eps1 == 0.0 and eps2 == 0.0 and init is None:
        return MeanFieldState()

    z0 = init.as_vector() if init is not None else np.zeros(3, dtype=complex)
    z = _relax(z0, p, eps1, eps2, opts)
    u, ok = _newton(_to_real(z), p, eps1, eps2, opts)
    z = _to_complex(u)
    if not ok:
        raise NoConvergence("Newton polish failed", _relative_residual(z, p, eps1, eps2))

    ambiguous = False
    size = max(np.abs(z).max(), 1.0)
    for start in [z * f for f in opts.branch_probes] + _resonant_probes(p, eps1, eps2):
        probe, probe_ok = _newton(_to_real(start), p, eps1, eps2, opts)
        if probe_ok and np.abs(_to_complex(probe) - z).max() > 1e-6 * size:
            ambiguous = True
            break

    return MeanFieldState(
        alpha1=complex(z[0]),
        alpha2=complex(z[1]),
        beta=complex(z[2]),
        residual=_relative_residual(z, p, eps1, eps2),
        ambiguous_branch=ambiguous,
    )


def _phase(z: complex) -> float:
    return cmath.phase(z) if z != 0 else 0.0


def effective_params(s: MeanFieldState, p: PhysicalParams) -> EffectiveParams:
    """Linearization inputs derived from a converged mean-field state."""
    b_abs = abs(s.beta)
    phi_b = _phase(s.beta)
    x = b_abs * math.cos(phi_b)
    chi = p.chi0_complex * s.alpha2
    return EffectiveParams(
        delta_c=p.delta_bar_c - 2.0 * p.g1 * x,
        delta_c_prime=2.0 * p.delta_bar_c - 2.0 * p.g2 * x,
        G1=p.g1 * abs(s.alpha1),
        G2=p.g2 * abs(s.alpha2),
        Lambda=3.0 * p.eta * (4.0 * x**2 + 1.0),
        chi_mag=abs(chi),
        phi=_phase(chi) / 2.0,
        phi_b=phi_b,
        kappa1=p.kappa1,
        kappa2=p.kappa2,
        gamma_m=p.gamma_m,
        n_th=p.n_th,
        chi_cross=p.chi0 * abs(s.alpha1),
        phase_alpha1=_phase(s.alpha1),
        phase_alpha2=_phase(s.alpha2),
    )


def steady_row(s: MeanFieldState, p: PhysicalParams) -> dict:
    """Flat record of inputs, amplitudes and derived parameters for CSV export."""
    row = {f"in_{k}": v for k, v in asdict(p).items()}
    for name in ("alpha1", "alpha2", "beta"):
        z = getattr(s, name)
        row[f"{name}_re"] = z.real
        row[f"{name}_im"] = z.imag
        row[f"{name}_abs"] = abs(z)
    row["residual"] = s.residual
    row["ambiguous_branch"] = s.ambiguous_branch
    for k, v in asdict(effective_params(s, p)).items():
        row[f"eff_{k}"] = v
    return row
