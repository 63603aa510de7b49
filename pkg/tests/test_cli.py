import csv
import io
import json
import math
import subprocess
import sys

import pytest

from optosqueeze import cli, selftest, sweep
from optosqueeze.errors import NoConvergence

from conftest import OMEGA_L, OMEGA_M

EFFECTIVE = """[effective]
delta_c = {delta_c}
G1 = {G1}
Lambda = {Lambda}
chi_mag = {chi_mag}
phi = {phi}
kappa1 = {kappa1}
gamma_m = {gamma_m}
n_th = {n_th}
"""

PHYSICAL = f"""[physical]
omega_m = {OMEGA_M!r}
omega_L = {OMEGA_L!r}
delta_bar_c = 10
kappa1 = 100
kappa2 = 2000
gamma_m = 1e-6
g1 = 1e-4
g2 = 1e-4
eta = 1e-4
chi0 = 1e-3
P1 = {{P}}
P2 = {{P}}
"""


def write(tmp_path, text, name="run.cfg"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def effective_cfg(tmp_path, **kw):
    values = dict(delta_c=0, G1=0, Lambda=0, chi_mag=0, phi=0, kappa1=1, gamma_m=0.3, n_th=0)
    values.update(kw)
    return write(tmp_path, EFFECTIVE.format(**values))


def csv_record(text):
    return next(csv.DictReader(io.StringIO(text)))


def test_squeeze_vacuum(tmp_path, capsys):
    out = tmp_path / "out"
    assert cli.main(["squeeze", "--config", effective_cfg(tmp_path), "--out", str(out)]) == 0
    rec = csv_record(capsys.readouterr().out)
    assert float(rec["S_theta0_db"]) == pytest.approx(0.0, abs=1e-12)
    assert (out / "squeeze.csv").exists() and (out / "squeeze_angles.csv").exists()


def test_squeeze_hursb_point_json(tmp_path, capsys):
    cfg = effective_cfg(tmp_path, delta_c=10, G1=0.1, Lambda=10, chi_mag=40, phi="0.5*pi", kappa1=100, gamma_m=1e-6)
    assert cli.main(["squeeze", "--config", cfg, "--format", "json"]) == 0
    rec = json.loads(capsys.readouterr().out)
    assert rec["S_theta0_db"] > 3 and rec["beats_3db"] is True and rec["margin"] > 0


def test_squeeze_unstable_point_exits_4(tmp_path, capsys):
    cfg = effective_cfg(tmp_path, delta_c=10, G1=5, Lambda=0.5, chi_mag=40, phi="0.2*pi", kappa1=100, gamma_m=1e-6, n_th=1000)
    assert cli.main(["squeeze", "--config", cfg]) == 4
    assert "margin" in capsys.readouterr().err


def test_malformed_key_exits_2_with_line(tmp_path, capsys):
    cfg = write(tmp_path, EFFECTIVE.format(delta_c=0, G1=0, Lambda=0, chi_mag=0, phi=0, kappa1=1, gamma_m=1, n_th=0) + "kapa2 = 3\n")
    assert cli.main(["squeeze", "--config", cfg]) == 2
    assert "line 10" in capsys.readouterr().err


def test_missing_file_exits_2(tmp_path):
    assert cli.main(["steady", "--config", str(tmp_path / "absent.cfg")]) == 2


def test_steady_needs_physical(tmp_path):
    assert cli.main(["steady", "--config", effective_cfg(tmp_path)]) == 2


def test_steady_zero_drive(tmp_path, capsys):
    assert cli.main(["steady", "--config", write(tmp_path, PHYSICAL.format(P=0))]) == 0
    rec = csv_record(capsys.readouterr().out)
    for k in ("alpha1_abs", "alpha2_abs", "beta_abs"):
        assert float(rec[k]) == 0.0


def test_steady_reference_drive(tmp_path, capsys):
    assert cli.main(["steady", "--config", write(tmp_path, PHYSICAL.format(P=5e-3)), "--format", "json"]) == 0
    rec = json.loads(capsys.readouterr().out)
    assert 1000 <= rec["alpha1_abs"] <= 4000


def test_steady_no_convergence_exits_3(tmp_path, monkeypatch):
    def fail(p):
        raise NoConvergence("relaxation did not settle", 0.5)

    monkeypatch.setattr(cli, "solve_steady_state", fail)
    assert cli.main(["steady", "--config", write(tmp_path, PHYSICAL.format(P=5e-3))]) == 3


def test_sweep_single_point(tmp_path, capsys):
    text = EFFECTIVE.format(delta_c=0, G1=0, Lambda=0, chi_mag=0, phi=0, kappa1=1, gamma_m=0.3, n_th=0)
    text += "[sweep]\nname = one\naxis1 = delta_c 0 0 1\n"
    out = tmp_path / "o"
    assert cli.main(["sweep", "--config", write(tmp_path, text), "--out", str(out), "--plot"]) == 0
    lines = (out / "one.csv").read_bytes().decode().split("\r\n")
    assert len([ln for ln in lines if ln]) == 2
    assert (out / "one.meta").exists() and (out / "one.png").exists()


def test_sweep_oracle_mismatch_exits_5(tmp_path, monkeypatch):
    text = EFFECTIVE.format(delta_c=0, G1=0.1, Lambda=0, chi_mag=0, phi=0, kappa1=1, gamma_m=0.3, n_th=0)
    text += "[sweep]\naxis1 = delta_c 0 1 3\n"
    monkeypatch.setattr(sweep, "ode_oracle", lambda *a: 1.0)
    assert cli.main(["sweep", "--config", write(tmp_path, text), "--out", str(tmp_path)]) == 5


def test_figure_fig4(tmp_path):
    out = tmp_path / "f"
    assert cli.main(["figure", "fig4", "--points", "9", "--out", str(out), "--seed", "3"]) == 0
    rows = list(csv.DictReader(open(out / "fig4.csv", newline="")))
    assert len(rows) == 4 * 9
    assert {r["series"] for r in rows} == {"kappa1=0.1 chi=0.0", "kappa1=100.0 chi=0.0", "kappa1=0.1 chi=0.04", "kappa1=100.0 chi=40.0"}
    assert all(r["S_theta_db"] != "" for r in rows)
    assert json.load(open(out / "fig4.meta"))["seed"] == 3
    assert (out / "fig4.png").exists()


def test_figure_fig3_records_bands(tmp_path):
    out = tmp_path / "f"
    assert cli.main(["figure", "fig3", "--points", "11", "--out", str(out), "--no-plot"]) == 0
    meta = json.load(open(out / "fig3.meta"))
    bands = meta["unstable_phi_bands"]
    assert set(bands) == {"G1=0.1", "G1=1.0", "G1=5.0"}
    one = bands["G1=0.1"]["Lambda=1"]
    assert all(abs(r[0] / math.pi - u[0]) < 1e-12 for r, u in zip(one["radians"], one["units_of_pi"]))


def test_selftest_failure_exits_1(monkeypatch, capsys):
    monkeypatch.setattr(selftest, "run_all", lambda **kw: [selftest.Check("broken", False, "forced")])
    assert cli.main(["selftest"]) == 1
    assert "[FAIL] broken" in capsys.readouterr().out


def test_unknown_figure_is_a_usage_error():
    with pytest.raises(SystemExit) as exc:
        cli.main(["figure", "fig9"])
    assert exc.value.code == 2


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "optosqueeze", "--version"], capture_output=True, text=True)
    assert out.returncode == 0 and out.stdout.strip()
