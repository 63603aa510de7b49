"""Oracle-triangle and invariant checks runnable from an installed package."""

from __future__ import annotations

import math
import time
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

from . import squeezing, sweep
from .linear import build_full, build_reduced, is_stable, routh_hurwitz
from .lyapunov import integrate_covariance, sample_stochastic, solve_steady, symplectic_eigenvalues
from .model import EffectiveParams


@dataclass
class Check:
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0


def random_effective(rng: np.random.Generator, min_margin: float = 0.1) -> EffectiveParams:
    """Random reduced-model parameters whose drift has stability margin >= ``min_margin``.

    Rates are O(1) so every oracle resolves the dynamics cheaply.
    """
    while True:
        k = rng.uniform(0.5, 4.0)
        e = EffectiveParams(
            delta_c=rng.uniform(-2.0, 2.0),
            G1=rng.uniform(0.0, 0.8),
            Lambda=rng.uniform(0.0, 0.5),
            chi_mag=rng.uniform(0.0, 0.45 * k),
            phi=rng.uniform(0.0, math.pi),
            kappa1=k,
            gamma_m=rng.uniform(0.5, 2.0),
            n_th=rng.uniform(0.0, 5.0),
        )
        if is_stable(build_reduced(e)).margin >= min_margin:
            return e


def random_drift(rng: np.random.Generator) -> np.ndarray:
    """Random 4x4 drift, shifted so that stable and unstable draws are both common."""
    A = rng.normal(size=(4, 4))
    shift = np.linalg.eigvals(A).real.max()
    return A - (shift + rng.normal(scale=0.5)) * np.eye(4)


def oracle_triangle(e: EffectiveParams, seed: int, n_traj: int = 2000):
    """Algebraic, ODE and stochastic covariances of ``build_reduced(e)``.

    Returns ``(ode_dev, zmax, z)`` where ``ode_dev`` is the largest entrywise
    ODE deviation and ``z`` the upper-triangle stochastic z-scores.
    """
    m = build_reduced(e)
    alg = solve_steady(m)
    ode = integrate_covariance(m, 0.5 * np.eye(4), T=50.0 / alg.margin)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        sto = sample_stochastic(m, n_traj=n_traj, seed=seed)
    iu = np.triu_indices(4)
    z = (np.abs(sto.V - alg.V) / sto.stderr)[iu]
    return float(np.abs(ode.V - alg.V).max()), float(z.max()), z


def _timed(name, fn):
    t0 = time.perf_counter()
    try:
        passed, detail = fn()
    except Exception as exc:  # a crash is a failed check, not a crashed harness
        passed, detail = False, f"{type(exc).__name__}: {exc}"
    return Check(name, bool(passed), detail, time.perf_counter() - t0)


def check_vacuum():
    e = EffectiveParams(delta_c=0.0, G1=0.0, Lambda=0.0, chi_mag=0.0, phi=0.0, kappa1=1.0, gamma_m=0.3, G2=0.0)
    worst = 0.0
    for m in (build_reduced(e), build_full(e)):
        V = solve_steady(m).V
        worst = max(worst, np.abs(V - 0.5 * np.eye(m.dim)).max())
    S = squeezing.squeezing_db(solve_steady(build_reduced(e)).V, 0.3)
    return worst < 1e-9 and abs(S) < 1e-12, f"max |V - I/2| = {worst:.2e}, S = {S:.1e} dB"


def check_thermal():
    e = EffectiveParams(delta_c=0.0, G1=0.0, Lambda=0.0, chi_mag=0.0, phi=0.0, kappa1=1.0, gamma_m=0.3, n_th=1000.0)
    V = solve_steady(build_reduced(e)).V
    dev = np.abs(np.diag(V)[2:] - 1000.5).max()
    return dev < 1e-9, f"max |Var - (n_th + 1/2)| = {dev:.2e}"


def check_oracles(draws: int, seed: int, familywise: float = 0.01):
    # The stochastic leg is judged against a Bonferroni threshold so that a
    # correct build fails this check with probability ~familywise.
    rng = np.random.default_rng(seed)
    n_tests = draws * 10
    z_crit = norm.isf(familywise / (2 * n_tests))
    worst_ode, worst_z, worst_sym = 0.0, 0.0, math.inf
    for d in range(draws):
        e = random_effective(rng)
        ode_dev, zmax, _ = oracle_triangle(e, seed=seed + d)
        worst_ode = max(worst_ode, ode_dev)
        worst_z = max(worst_z, zmax)
        worst_sym = min(worst_sym, symplectic_eigenvalues(solve_steady(build_reduced(e)).V).min())
    ok = worst_ode < 1e-5 and worst_z < z_crit and worst_sym >= 0.5 - 1e-9
    return ok, (
        f"{draws} draws: ODE dev {worst_ode:.1e}, max z {worst_z:.2f} (limit {z_crit:.2f}), "
        f"min symplectic eigenvalue {worst_sym:.6f}"
    )


def check_routh_hurwitz(samples: int, seed: int):
    rng = np.random.default_rng(seed)
    disagree = degenerate = stable = 0
    for _ in range(samples):
        A = random_drift(rng)
        rh = routh_hurwitz(A)
        if rh.degenerate:
            degenerate += 1
            continue
        st = is_stable(A)
        stable += st.stable
        disagree += rh.stable != st.stable
    return disagree == 0, f"{samples} drifts ({stable} stable, {degenerate} degenerate): {disagree} disagreements"


def check_angles(samples: int, seed: int):
    rng = np.random.default_rng(seed)
    worst_period = worst_heis = 0.0
    for _ in range(samples):
        V = solve_steady(build_reduced(random_effective(rng))).V
        th = rng.uniform(-math.pi, math.pi)
        worst_period = max(worst_period, abs(squeezing.squeezing_db(V, th) - squeezing.squeezing_db(V, th + math.pi)))
        opt = squeezing.optimal_angle(V)  # raises if closed form and grid disagree
        comp = squeezing.quadrature_variance(V, opt.theta + math.pi / 2)
        worst_heis = min(worst_heis, opt.variance * comp - 0.25)
    ok = worst_period < 1e-9 and worst_heis >= -1e-9
    return ok, f"periodicity error {worst_period:.1e}, min Var*Var_perp - 1/4 = {worst_heis:.1e}"


def check_sweep_determinism():
    spec = sweep.preset("fig3", n_points=9)
    a = sweep.run(spec).to_csv()
    b = sweep.run(spec).to_csv()
    c = sweep.run(spec, workers=2).to_csv()
    return a == b == c, f"{len(a)} bytes, serial repeat equal: {a == b}, two workers equal: {a == c}"


def run_all(draws: int = 10, seed: int = 0, rh_samples: int = 10_000) -> list[Check]:
    return [
        _timed("vacuum baseline", check_vacuum),
        _timed("thermal mechanical block", check_thermal),
        _timed("oracle triangle", lambda: check_oracles(draws, seed)),
        _timed("Routh-Hurwitz vs eigenvalues", lambda: check_routh_hurwitz(rh_samples, seed)),
        _timed("angle invariants", lambda: check_angles(100, seed)),
        _timed("sweep determinism", check_sweep_determinism),
    ]
