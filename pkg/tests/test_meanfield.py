import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from optosqueeze.errors import NoConvergence
from optosqueeze.meanfield import MeanFieldState, SolverOptions, classical_rhs, effective_params, solve_steady_state, steady_row
from optosqueeze.model import drive_amplitudes

from conftest import cavity_params


def literal_rhs(s, p):
    """Independent transcription in polar form, beta = |beta| exp(i phi_b)."""
    eps1, eps2 = drive_amplitudes(p)
    a1, a2, b = s.alpha1, s.alpha2, s.beta
    mag, phb = abs(b), cmath.phase(b)
    dc = p.delta_bar_c - 2 * p.g1 * mag * math.cos(phb)
    dcp = 2 * p.delta_bar_c - 2 * p.g2 * mag * math.cos(phb)
    chi0 = p.chi0  # real coupling
    d1 = -(1j * dc + p.kappa1 / 2) * a1 + chi0 * a1.conjugate() * a2 + eps1
    d2 = -(1j * dcp + p.kappa2 / 2) * a2 - chi0 / 2 * a1**2 + eps2
    db = (
        -(1j * 1.0 + p.gamma_m / 2) * b
        - 1j * p.eta * (16 * mag**3 * math.cos(phb) ** 3 + 12 * mag * math.cos(phb))
        + 1j * p.g1 * abs(a1) ** 2
        + 1j * p.g2 * abs(a2) ** 2
    )
    return np.array([d1, d2, db])


def test_undriven_origin_is_fixed():
    assert np.all(classical_rhs(MeanFieldState(), cavity_params()) == 0)


def test_drive_enters_first_component_at_origin():
    p = cavity_params(P1=1e-3)
    eps1, _ = drive_amplitudes(p)
    r = classical_rhs(MeanFieldState(), p)
    assert r[0] == eps1 and r[1] == 0 and r[2] == 0


def test_rhs_matches_literal_transcription(rng):
    p = cavity_params(P1=5e-3, P2=5e-3, chi0=1e-3)
    for _ in range(50):
        z = (rng.normal(size=3) + 1j * rng.normal(size=3)) * np.array([3e3, 5e2, 1e2])
        s = MeanFieldState(*z)
        np.testing.assert_allclose(classical_rhs(s, p), literal_rhs(s, p), rtol=1e-12, atol=1e-9)


def test_complex_coupling_uses_hermitian_conjugate_in_second_mode():
    p = cavity_params(chi0=1e-3, chi0_phase=0.7)
    s = MeanFieldState(100 + 20j, 5 - 3j, 0j)
    r0 = classical_rhs(s, cavity_params(chi0=0.0))
    r = classical_rhs(s, p)
    assert r[1] - r0[1] == pytest.approx(-np.conj(p.chi0_complex) / 2 * s.alpha1**2)
    assert r[0] - r0[0] == pytest.approx(p.chi0_complex * np.conj(s.alpha1) * s.alpha2)


def test_zero_drive_returns_origin():
    s = solve_steady_state(cavity_params())
    assert s.alpha1 == s.alpha2 == s.beta == 0


def _scalar_force(x, p, eps1, eps2):
    # Imaginary part of the beta equation once Re = 0 fixes Im(beta) = gamma x / 2.
    n1 = eps1**2 / ((p.delta_bar_c - 2 * p.g1 * x) ** 2 + p.kappa1**2 / 4)
    n2 = eps2**2 / ((2 * p.delta_bar_c - 2 * p.g2 * x) ** 2 + p.kappa2**2 / 4)
    return -x * (1 + p.gamma_m**2 / 4) - p.eta * (16 * x**3 + 12 * x) + p.g1 * n1 + p.g2 * n2


def grid_bisection_roots(p, lo=-2e3, hi=2e3, n=200001):
    """Fixed points without the chi(2) coupling: grid the mechanical amplitude, bisect sign changes."""
    eps1, eps2 = drive_amplitudes(p)
    xs = np.linspace(lo, hi, n)
    fs = _scalar_force(xs, p, eps1, eps2)
    roots = []
    for i in np.nonzero(np.sign(fs[:-1]) != np.sign(fs[1:]))[0]:
        a, b = xs[i], xs[i + 1]
        fa = fs[i]
        for _ in range(200):
            mid = 0.5 * (a + b)
            fm = _scalar_force(mid, p, eps1, eps2)
            if np.sign(fm) == np.sign(fa):
                a, fa = mid, fm
            else:
                b = mid
        roots.append(0.5 * (a + b))
    return roots, eps1, eps2


@pytest.mark.parametrize("power", [1e-4, 1e-3, 5e-3])
def test_uncoupled_fixed_point_matches_grid_bisection(power):
    p = cavity_params(P1=power, P2=power)
    roots, eps1, eps2 = grid_bisection_roots(p)
    s = solve_steady_state(p)
    x = s.beta.real
    nearest = min(roots, key=lambda r: abs(r - x))
    assert x == pytest.approx(nearest, rel=1e-8)
    assert s.beta.imag == pytest.approx(p.gamma_m * nearest / 2, rel=1e-6)
    expected_a1 = eps1 / abs(1j * (p.delta_bar_c - 2 * p.g1 * nearest) + p.kappa1 / 2)
    assert abs(s.alpha1) == pytest.approx(expected_a1, rel=1e-8)


def test_weak_drive_linear_response():
    p = cavity_params(P1=1e-12, P2=0.0)
    s = solve_steady_state(p)
    eps1, _ = drive_amplitudes(p)
    assert abs(s.alpha1) == pytest.approx(eps1 / abs(1j * p.delta_bar_c + p.kappa1 / 2), rel=0.01)


def test_fixed_point_residual_with_coupling():
    p = cavity_params(P1=5e-3, P2=5e-3, chi0=1e-3)
    s = solve_steady_state(p)
    eps1, eps2 = drive_amplitudes(p)
    scale = max(eps1, eps2, p.g1 * abs(s.alpha1) ** 2 + p.g2 * abs(s.alpha2) ** 2)
    assert np.linalg.norm(classical_rhs(s, p)) / scale < 1e-10
    assert s.residual < 1e-10


def test_relaxation_horizon_exhaustion_raises():
    p = cavity_params(P1=5e-3, P2=5e-3, chi0=1e-3)
    with pytest.raises(NoConvergence) as exc:
        solve_steady_state(p, opts=SolverOptions(max_periods=1e-3))
    assert math.isfinite(exc.value.residual)


def test_lambda_at_zero_beta_and_phase_convention():
    e = effective_params(MeanFieldState(), cavity_params())
    assert e.Lambda == pytest.approx(3e-4)
    assert e.phi_b == 0.0


def test_lambda_large_amplitude():
    e = effective_params(MeanFieldState(beta=500 + 0j), cavity_params())
    assert e.Lambda == pytest.approx(300.0003, rel=1e-12)


def test_lambda_with_tilted_mechanical_phase():
    e = effective_params(MeanFieldState(beta=cmath.rect(111, math.pi / 6)), cavity_params())
    assert e.Lambda == pytest.approx(11.0, rel=0.02)


@settings(max_examples=200)
@given(mag=st.floats(0, 1e3), ph=st.floats(-math.pi, math.pi), eta=st.floats(0, 1e-2))
def test_lambda_round_trip_and_lower_bound(mag, ph, eta):
    p = cavity_params(eta=eta)
    b = cmath.rect(mag, ph)
    e = effective_params(MeanFieldState(beta=b), p)
    expected = 3 * eta * (4 * abs(b) ** 2 * math.cos(cmath.phase(b)) ** 2 + 1)
    assert e.Lambda == pytest.approx(expected, rel=1e-12, abs=1e-300)
    assert e.Lambda >= 3 * eta * (1 - 1e-15)


def test_effective_params_from_solution():
    p = cavity_params(P1=5e-3, P2=5e-3, chi0=1e-3)
    s = solve_steady_state(p)
    e = effective_params(s, p)
    chi = p.chi0_complex * s.alpha2
    assert e.chi_mag == pytest.approx(abs(chi))
    assert e.chi == pytest.approx(chi)
    assert e.G1 == pytest.approx(p.g1 * abs(s.alpha1))
    assert e.delta_c == pytest.approx(p.delta_bar_c - 2 * p.g1 * s.beta.real)


def test_steady_row_has_amplitudes_and_derived_fields():
    p = cavity_params(P1=1e-3, P2=1e-3)
    row = steady_row(solve_steady_state(p), p)
    for key in ("in_P1", "alpha1_re", "alpha1_im", "beta_abs", "residual", "eff_Lambda", "eff_delta_c"):
        assert key in row


def test_bistable_drive_flags_branch_and_relaxes_to_lower_branch():
    # Far-detuned strong drive: three fixed points, two of them near cavity resonance.
    p = cavity_params(P1=0.3, P2=0.0, eta=0.0, delta_bar_c=100.0, kappa1=10.0)
    roots, _, _ = grid_bisection_roots(p, lo=-1e3, hi=2e6, n=400001)
    assert len(roots) == 3
    s = solve_steady_state(p)
    assert s.ambiguous_branch
    assert s.beta.real == pytest.approx(min(roots), rel=1e-8)


def test_single_branch_not_flagged():
    s = solve_steady_state(cavity_params(P1=1e-3, P2=1e-3))
    assert not s.ambiguous_branch
