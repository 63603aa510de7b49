import math

import pytest

from optosqueeze.model import EffectiveParams, PhysicalParams

OMEGA_M = 2 * math.pi * 20e6
OMEGA_L = 2 * math.pi * 500e12 / OMEGA_M


def cavity_params(**kw) -> PhysicalParams:
    """Laboratory parameters of the reference device (20 MHz resonator, 500 THz laser)."""
    base = dict(
        omega_m=OMEGA_M,
        omega_L=OMEGA_L,
        delta_bar_c=10.0,
        kappa1=100.0,
        kappa2=2000.0,
        gamma_m=1e-6,
        g1=1e-4,
        g2=1e-4,
        eta=1e-4,
    )
    base.update(kw)
    return PhysicalParams(**base)


def hursb_point(**kw) -> EffectiveParams:
    """Squeezing working point in the unresolved-sideband regime with the medium on."""
    base = dict(delta_c=10.0, G1=0.1, Lambda=10.0, chi_mag=40.0, phi=0.5 * math.pi, kappa1=100.0, gamma_m=1e-6, n_th=0.0)
    base.update(kw)
    return EffectiveParams(**base)


def decoupled(**kw) -> EffectiveParams:
    base = dict(delta_c=0.0, G1=0.0, Lambda=0.0, chi_mag=0.0, phi=0.0, kappa1=1.0, gamma_m=0.3)
    base.update(kw)
    return EffectiveParams(**base)


@pytest.fixture
def rng():
    import numpy as np

    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    """Collect the one-line verdicts recorded by the acceptance tests."""
    lines = []
    for key in ("passed", "failed"):
        for rep in terminalreporter.stats.get(key, []):
            if rep.when != "call":
                continue
            for name, value in rep.user_properties:
                if name == "criterion":
                    lines.append(value)
    if lines:
        terminalreporter.section("acceptance criteria")
        for number, ok, text in sorted(lines):
            terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} criterion {number:>2}: {text}")
