import math
import subprocess

import pytest

from optosqueeze.config import ConfigError, load, parse_config, parse_number
from optosqueeze.model import EffectiveParams, PhysicalParams
from optosqueeze.sweep import spec_from_config

EFFECTIVE = """\
# squeezing working point
[effective]
delta_c = 10
G1 = 0.1
Lambda = 10      ; Duffing shift
chi_mag = 0.4 * 100
phi = 0.5 * pi
kappa1 = 100
"""


def test_parse_number_arithmetic():
    assert parse_number("0.5 * pi") == 0.5 * math.pi
    assert parse_number("-2e-3") == -2e-3
    assert parse_number("2**-3 + 1") == 1.125
    assert parse_number("inf") == math.inf


@pytest.mark.parametrize("text", ["__import__('os')", "abs(1)", "1/0", "x", "True", "'3'", ""])
def test_parse_number_rejects_non_numbers(text):
    with pytest.raises(ValueError):
        parse_number(text)


def test_effective_section():
    cfg = parse_config(EFFECTIVE)
    assert cfg.mode() == "effective"
    e = cfg.params()
    assert e == EffectiveParams(delta_c=10, G1=0.1, Lambda=10, chi_mag=40, phi=0.5 * math.pi, kappa1=100)
    assert cfg.sections["effective"]["Lambda"] == ("10", 5)


def test_si_rates_are_scaled_by_mechanical_frequency():
    om = 2 * math.pi * 20e6
    text = f"""
[physical]
omega_m = {om!r}
omega_L = 2*pi*500e12 / {om!r}
delta_bar_c = 10
kappa1_si = {100 * om!r}
kappa2 = 2000
gamma_m = 1e-6
g1 = 1e-4
g2 = 1e-4
eta = 1e-4
P1 = 5e-3
"""
    p = parse_config(text).params()
    assert isinstance(p, PhysicalParams)
    assert p.kappa1 == pytest.approx(100.0, rel=1e-15)
    assert p.P1 == 5e-3 and p.P2 == 0.0


def test_effective_si_needs_omega_m():
    with pytest.raises(ConfigError) as exc:
        parse_config("[effective]\ndelta_c=0\nG1=0\nLambda=0\nchi_mag=0\nphi=0\nkappa1_si=3\n").params()
    assert exc.value.line == 7
    e = parse_config("[effective]\nomega_m=2\ndelta_c=0\nG1=0\nLambda=0\nchi_mag=0\nphi=0\nkappa1_si=3\n").params()
    assert e.kappa1 == 1.5


@pytest.mark.parametrize(
    "text, line, fragment",
    [
        ("[effective]\ndelta_c = 1\nkapa1 = 3\n", 3, "unknown key 'kapa1'"),
        ("[effective]\ndelta_c = 1\ndelta_c = 2\n", 3, "duplicate key"),
        ("[effective]\n\ndelta_c 1\n", 3, "expected 'key = value'"),
        ("[nonsense]\n", 1, "unknown section"),
        ("delta_c = 1\n", 1, "outside of any section"),
        ("[effective]\ndelta_c = one\n", 2, "not a number"),
        ("[sweep]\naxis3 = phi 0 1 3\n", 2, "unknown key 'axis3'"),
    ],
)
def test_errors_carry_line_numbers(text, line, fragment):
    with pytest.raises(ConfigError) as exc:
        cfg = parse_config(text)
        cfg.params()
    assert exc.value.line == line
    assert fragment in str(exc.value)
    assert str(exc.value).startswith(f"line {line}:")


def test_invalid_value_points_at_its_line():
    with pytest.raises(ConfigError) as exc:
        parse_config(EFFECTIVE.replace("kappa1 = 100", "kappa1 = -1")).params()
    assert exc.value.line == 8


def test_missing_required_keys():
    with pytest.raises(ConfigError, match="missing required keys: .*kappa1"):
        parse_config("[effective]\ndelta_c=0\nG1=0\nLambda=0\nchi_mag=0\nphi=0\n").params()


def test_exactly_one_parameter_section():
    with pytest.raises(ConfigError):
        parse_config("[sweep]\nname = x\n").mode()
    both = EFFECTIVE + "[physical]\n"
    with pytest.raises(ConfigError):
        parse_config(both).mode()


def test_digest_is_git_blob_hash(tmp_path):
    path = tmp_path / "c.cfg"
    path.write_text(EFFECTIVE)
    expected = subprocess.run(["git", "hash-object", str(path)], capture_output=True, text=True, check=True).stdout.strip()
    assert load(path).digest == expected


def test_sweep_section():
    text = EFFECTIVE + """
[sweep]
name = band
axis1 = phi 0 pi 11
axis2 = Lambda 0 5 6 linear
series = G1=0.1 | G1=5 n_th=1000
outputs = margin, S_theta0_db
oracle_fraction = 0.05
seed = 7
"""
    spec = spec_from_config(parse_config(text))
    assert spec.name == "band" and spec.seed == 7 and spec.oracle_fraction == 0.05
    assert [(a.name, a.min, a.max, a.n_points) for a in spec.axes] == [("phi", 0.0, math.pi, 11), ("Lambda", 0.0, 5.0, 6)]
    assert spec.series == (("G1=0.1", (("G1", 0.1),)), ("G1=5 n_th=1000", (("G1", 5.0), ("n_th", 1000.0))))
    assert spec.outputs == ("margin", "S_theta0_db")
    assert spec_from_config(parse_config(text), seed=3).seed == 3


@pytest.mark.parametrize(
    "sweep, line",
    [
        ("axis1 = phi 0 pi\n", 10),
        ("axis1 = phi 0 pi 2.5\n", 10),
        ("series = G1 0.1\n", 10),
    ],
)
def test_sweep_errors_carry_line_numbers(sweep, line):
    with pytest.raises(ConfigError) as exc:
        spec_from_config(parse_config(EFFECTIVE + "[sweep]\n" + sweep))
    assert exc.value.line == line


def test_sweep_rejects_unknown_axis():
    with pytest.raises(ConfigError, match="bogus"):
        spec_from_config(parse_config(EFFECTIVE + "[sweep]\naxis1 = bogus 0 1 3\n"))
