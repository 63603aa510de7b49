"""Gridded parameter scans and the figure presets built on them.

Every grid point runs the same pipeline: parameters, mean field (physical
mode only), linear model, stability and, for stable points, the algebraic
covariance and its squeezing figures.  A deterministic subset of stable
points is re-solved by integrating the covariance ODE; any disagreement
aborts the scan.
"""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import io
import json
import math
import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import squeezing
from .errors import IllConditionedWarning, NoConvergence, OracleMismatch, ParameterError, UnknownPreset
from .linear import FULL_LABELS, REDUCED_LABELS, LinearModel, build_full, build_reduced, is_stable, routh_hurwitz
from .lyapunov import CONDITION_LIMIT, integrate_covariance, solve_steady
from .meanfield import effective_params, solve_steady_state
from .model import EffectiveParams, PhysicalParams

ORACLE_TOL = 1e-5
ORACLE_MIN_POINTS = 3

# Pseudo-fields accepted as axis or series names besides the record fields.
SPECIAL_NAMES = {"theta", "P"}

MEANFIELD_OUTPUTS = ("alpha1_abs", "alpha2_abs", "beta_abs", "Lambda", "ambiguous_branch")
COVARIANCE_OUTPUTS = ("margin", "S_theta0_db", "S_theta_db", "S_opt_db", "theta_opt", "var_Xb", "var_Yb", "cov_XbYb")
ALL_OUTPUTS = MEANFIELD_OUTPUTS + COVARIANCE_OUTPUTS + ("rh_stable", "rh_degenerate", "condition")


@dataclass(frozen=True)
class Axis:
    name: str
    min: float
    max: float
    n_points: int = 101
    scale: str = "linear"

    def problems(self) -> list[str]:
        out = []
        if self.scale not in ("linear", "log"):
            out.append(f"axis {self.name}: scale must be linear or log (got {self.scale!r})")
        if self.n_points == 1:
            if self.min != self.max:
                out.append(f"axis {self.name}: a single-point axis needs min == max")
        elif self.n_points < 2:
            out.append(f"axis {self.name}: n_points must be >= 2 (got {self.n_points})")
        elif not self.min < self.max:
            out.append(f"axis {self.name}: min must be < max (got {self.min}, {self.max})")
        if self.scale == "log" and not self.min > 0:
            out.append(f"axis {self.name}: log scale needs min > 0")
        return out

    def values(self) -> np.ndarray:
        if self.n_points == 1:
            return np.array([float(self.min)])
        if self.scale == "log":
            return np.geomspace(self.min, self.max, self.n_points)
        return np.linspace(self.min, self.max, self.n_points)


@dataclass(frozen=True)
class SweepSpec:
    """A scan over one or two axes, optionally repeated for several series.

    ``series`` is a tuple of ``(label, overrides)`` pairs; every series is
    a full copy of the grid with the overrides applied to ``base``, so a
    figure with several panels or curves is one spec.
    """

    name: str
    base: PhysicalParams | EffectiveParams
    axes: tuple
    outputs: tuple = ()
    oracle_fraction: float = 0.01
    series: tuple = (("", ()),)
    model: str = "reduced"
    seed: int = 0
    notes: str = ""

    @property
    def mode(self) -> str:
        return "physical" if isinstance(self.base, PhysicalParams) else "effective"

    def resolved_outputs(self) -> tuple:
        if self.outputs:
            return tuple(self.outputs)
        if self.mode == "physical":
            return MEANFIELD_OUTPUTS + COVARIANCE_OUTPUTS
        return COVARIANCE_OUTPUTS

    def override_keys(self) -> list[str]:
        keys = []
        for _, overrides in self.series:
            for k, _ in overrides:
                if k not in keys:
                    keys.append(k)
        return keys

    def problems(self) -> list[str]:
        out = []
        names = {f.name for f in dataclasses.fields(type(self.base))} | SPECIAL_NAMES
        if self.mode == "effective":
            names.discard("P")
        if not 1 <= len(self.axes) <= 2:
            out.append(f"a sweep needs 1 or 2 axes (got {len(self.axes)})")
        axis_names = [a.name for a in self.axes]
        if len(set(axis_names)) != len(axis_names):
            out.append("axes must have distinct names")
        for a in self.axes:
            if a.name not in names:
                out.append(f"axis {a.name!r} is not a field of {type(self.base).__name__}")
            out.extend(a.problems())
        for k in self.override_keys():
            if k not in names:
                out.append(f"series key {k!r} is not a field of {type(self.base).__name__}")
            if k in axis_names:
                out.append(f"series key {k!r} is also an axis")
        for o in self.resolved_outputs():
            if o not in ALL_OUTPUTS:
                out.append(f"unknown output {o!r}")
            if self.mode == "effective" and o in MEANFIELD_OUTPUTS:
                out.append(f"output {o!r} needs a physical-mode sweep")
        if self.model not in ("reduced", "full"):
            out.append(f"model must be reduced or full (got {self.model!r})")
        if not 0 <= self.oracle_fraction <= 1:
            out.append("oracle_fraction must lie in [0, 1]")
        return out

    def grid(self):
        """``(series label, overrides dict)`` for every row, in table order."""
        values = [a.values() for a in self.axes]
        names = [a.name for a in self.axes]
        for label, overrides in self.series:
            for combo in _product(values):
                point = dict(overrides)
                point.update(zip(names, (float(v) for v in combo)))
                yield label, point

    def describe(self) -> dict:
        return {
            "name": self.name,
            "mode": self.mode,
            "model": self.model,
            "base": dataclasses.asdict(self.base),
            "axes": [dataclasses.asdict(a) for a in self.axes],
            "series": [[label, [list(kv) for kv in overrides]] for label, overrides in self.series],
            "outputs": list(self.resolved_outputs()),
            "oracle_fraction": self.oracle_fraction,
            "seed": self.seed,
            "notes": self.notes,
        }


def _product(values):
    if len(values) == 1:
        for v in values[0]:
            yield (v,)
        return
    for v in values[0]:
        for w in values[1]:
            yield (v, w)


def _resolve(base, point: dict):
    point = dict(point)
    theta = point.pop("theta", 0.0)
    if "P" in point:
        P = point.pop("P")
        point["P1"] = point["P2"] = P
    return dataclasses.replace(base, **point), theta


def evaluate_point(base, point: dict, model: str = "reduced"):
    """Run the pipeline at one grid point.

    Returns ``(row, A, D, V)``; the arrays are ``None`` where the pipeline
    stopped early.  Failures are recorded in ``row["status"]``.
    """
    row = {"status": "ok", "stable": None}
    try:
        params, theta = _resolve(base, point)
    except ParameterError as exc:
        row["status"] = "invalid: " + str(exc)
        return row, None, None, None

    if isinstance(params, PhysicalParams):
        try:
            s = solve_steady_state(params)
        except NoConvergence as exc:
            row["status"] = "no_convergence"
            row["meanfield_residual"] = exc.residual
            return row, None, None, None
        e = effective_params(s, params)
        row.update(
            alpha1_abs=abs(s.alpha1),
            alpha2_abs=abs(s.alpha2),
            beta_abs=abs(s.beta),
            Lambda=e.Lambda,
            ambiguous_branch=s.ambiguous_branch,
            meanfield_residual=s.residual,
        )
    else:
        e = params

    m = build_full(e) if model == "full" else build_reduced(e)
    st = is_stable(m)
    row["stable"] = st.stable
    row["margin"] = st.margin
    if m.dim == 4:
        rh = routh_hurwitz(m)
        row["rh_stable"] = rh.stable
        row["rh_degenerate"] = rh.degenerate
    if not st.stable:
        row["status"] = "unstable"
        return row, m.A, m.D, None

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", IllConditionedWarning)
        cov = solve_steady(m)
    rep = squeezing.report(cov.V, curve_points=0)
    row.update(
        lyap_residual=cov.residual,
        condition=cov.info["condition"],
        S_theta0_db=rep.S_theta0_db,
        S_theta_db=squeezing.squeezing_db(cov.V, theta),
        S_opt_db=rep.S_opt_db,
        theta_opt=rep.theta_opt,
        var_Xb=rep.var_Xb,
        var_Yb=rep.var_Yb,
        cov_XbYb=rep.cov_XbYb,
    )
    if cov.info["condition"] > CONDITION_LIMIT:
        # Next to a stability boundary: values are kept but flagged.
        row["status"] = "ill_conditioned"
    return row, m.A, m.D, cov.V


def _evaluate_task(args):
    return evaluate_point(*args)


def oracle_deviation(V_ref: np.ndarray, V: np.ndarray) -> float:
    """Largest entrywise difference, each entry scaled by ``sqrt(V_ii V_jj)``."""
    d = np.sqrt(np.abs(np.diag(V_ref)))
    return float((np.abs(V - V_ref) / np.outer(d, d)).max())


def oracle_indices(stable_rows: list[int], fraction: float) -> list[int]:
    """Evenly spaced subset of the stable rows, at least three when available."""
    n = len(stable_rows)
    if n == 0 or fraction <= 0:
        return []
    k = min(n, max(ORACLE_MIN_POINTS, math.ceil(fraction * n)))
    picks = np.unique(np.linspace(0, n - 1, k).round().astype(int))
    return [stable_rows[i] for i in picks]


def ode_oracle(A, D, V, labels) -> float:
    m = LinearModel(A, D, labels)
    margin = is_stable(m).margin
    n = A.shape[0]
    res = integrate_covariance(m, 0.5 * np.eye(n), T=50.0 / margin)
    return oracle_deviation(V, res.V)


def git_blob_hash(text: str) -> str:
    data = text.encode()
    return hashlib.sha1(b"blob %d\0" % len(data) + data).hexdigest()


@dataclass(frozen=True, eq=False)
class SweepResult:
    spec: SweepSpec
    columns: list
    rows: list
    provenance: dict = field(default_factory=dict)

    def column(self, name, series=None) -> np.ndarray:
        """Column as a float array (``nan`` for empty cells), optionally one series."""
        vals = [r.get(name) for r in self.rows if series is None or r["series"] == series]
        return np.array([math.nan if v is None or v == "" else float(v) for v in vals])

    def series_labels(self) -> list[str]:
        return [label for label, _ in self.spec.series]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\r\n")
        w.writerow(self.columns)
        for r in self.rows:
            w.writerow([format_cell(r.get(c)) for c in self.columns])
        return buf.getvalue()

    def meta_text(self) -> str:
        return json.dumps(self.provenance, sort_keys=True, indent=2) + "\n"

    def write(self, outdir) -> list[str]:
        os.makedirs(outdir, exist_ok=True)
        paths = []
        for ext, text in (("csv", self.to_csv()), ("meta", self.meta_text())):
            path = os.path.join(outdir, f"{self.spec.name}.{ext}")
            with open(path, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
            paths.append(path)
        return paths


def format_cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def run(spec: SweepSpec, workers: int = 1, config_text: str | None = None) -> SweepResult:
    """Evaluate every grid point of ``spec`` and return the long-format table.

    Rows come back in grid order whatever ``workers`` is.  Unstable points keep
    empty squeezing cells.

    Raises
    ------
    ValueError
        If the spec is inconsistent.
    OracleMismatch
        If the ODE oracle disagrees with the algebraic covariance at a
        checked point by more than ``ORACLE_TOL``.
    """
    problems = spec.problems()
    if problems:
        raise ValueError("; ".join(problems))

    points = list(spec.grid())
    tasks = [(spec.base, p, spec.model) for _, p in points]
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(workers) as pool:
            results = list(pool.map(_evaluate_task, tasks, chunksize=max(1, len(tasks) // (8 * workers))))
    else:
        results = [_evaluate_task(t) for t in tasks]

    labels = FULL_LABELS if spec.model == "full" else REDUCED_LABELS
    stable_rows = [i for i, (row, *_rest) in enumerate(results) if row["stable"]]
    # The oracle checks well-posed points; ill-conditioned ones are flagged in-row.
    well_posed = [i for i in stable_rows if results[i][0]["status"] == "ok"]
    checked = {}
    for i in oracle_indices(well_posed, spec.oracle_fraction):
        _, A, D, V = results[i]
        dev = ode_oracle(A, D, V, labels)
        checked[i] = dev
        if dev > ORACLE_TOL:
            raise OracleMismatch(points[i][1], dev, ORACLE_TOL)

    axis_names = [a.name for a in spec.axes]
    columns = ["series", *spec.override_keys(), *axis_names, "status", "stable"]
    columns += [o for o in spec.resolved_outputs() if o not in columns]
    if spec.mode == "physical":
        columns.append("meanfield_residual")
    columns += ["lyap_residual", "oracle_deviation"]

    rows = []
    for i, ((label, point), (row, *_rest)) in enumerate(zip(points, results)):
        out = {"series": label, **point, **row}
        if i in checked:
            out["oracle_deviation"] = checked[i]
        rows.append(out)

    description = spec.describe()
    canonical = config_text if config_text is not None else json.dumps(description, sort_keys=True)
    provenance = {
        "spec": description,
        "config_hash": git_blob_hash(canonical),
        "config_source": "file" if config_text is not None else "spec",
        "seed": spec.seed,
        "rows": len(rows),
        "stable_rows": len(stable_rows),
        "ill_conditioned_rows": len(stable_rows) - len(well_posed),
        "oracle": {
            "checked": len(checked),
            "tolerance": ORACLE_TOL,
            "max_deviation": max(checked.values()) if checked else None,
        },
        "versions": _versions(),
    }
    return SweepResult(spec, columns, rows, provenance)


def _versions() -> dict:
    from . import __version__

    return {"optosqueeze": __version__, "numpy": np.__version__}


def spec_from_config(cfg, seed: int | None = None) -> SweepSpec:
    """Build a :class:`SweepSpec` from a parsed config with a ``[sweep]`` section."""
    from .config import ConfigError, parse_number

    base = cfg.params()
    sec = cfg.sections.get("sweep")
    if sec is None:
        raise ConfigError("config has no [sweep] section")

    def num(raw, lineno):
        try:
            return parse_number(raw)
        except ValueError as exc:
            raise ConfigError(str(exc), lineno) from exc

    axes = []
    for key in ("axis1", "axis2"):
        if key not in sec:
            continue
        raw, lineno = sec[key]
        parts = raw.split()
        if len(parts) not in (4, 5):
            raise ConfigError(f"{key} needs 'name min max n_points [linear|log]'", lineno)
        n = num(parts[3], lineno)
        if n != int(n):
            raise ConfigError(f"{key}: n_points must be an integer", lineno)
        axes.append(Axis(parts[0], num(parts[1], lineno), num(parts[2], lineno), int(n), parts[4] if len(parts) == 5 else "linear"))

    series = (("", ()),)
    if "series" in sec:
        raw, lineno = sec["series"]
        series = []
        for group in raw.split("|"):
            pairs = []
            for item in group.split():
                if "=" not in item:
                    raise ConfigError(f"series entries must be key=value (got {item!r})", lineno)
                k, v = item.split("=", 1)
                pairs.append((k, num(v, lineno)))
            series.append((" ".join(group.split()), tuple(pairs)))
        series = tuple(series)

    outputs = ()
    if "outputs" in sec:
        outputs = tuple(o.strip() for o in sec["outputs"][0].split(",") if o.strip())

    kwargs = {}
    if "oracle_fraction" in sec:
        kwargs["oracle_fraction"] = num(*sec["oracle_fraction"])
    if "model" in sec:
        kwargs["model"] = sec["model"][0]
    if seed is not None:
        kwargs["seed"] = seed
    elif "seed" in sec:
        kwargs["seed"] = int(num(*sec["seed"]))

    spec = SweepSpec(
        name=sec["name"][0] if "name" in sec else "sweep",
        base=base,
        axes=tuple(axes),
        outputs=outputs,
        series=series,
        **kwargs,
    )
    problems = spec.problems()
    if problems:
        raise ConfigError("; ".join(problems))
    return spec


# Figure presets ----------------------------------------------------------

OMEGA_M = 2 * math.pi * 20e6  # rad/s
OMEGA_L = 2 * math.pi * 500e12 / OMEGA_M


def _fig2(n):
    base = PhysicalParams(
        omega_m=OMEGA_M,
        omega_L=OMEGA_L,
        delta_bar_c=10.0,  # bare detuning; the effective one is shifted by beta
        kappa1=100.0,
        kappa2=2000.0,
        gamma_m=1e-6,
        g1=1e-4,
        g2=1e-4,
        eta=1e-4,
    )
    return SweepSpec(
        name="fig2",
        base=base,
        axes=(Axis("P", 1e-4, 1e-2, n or 101, "log"),),
        series=(("chi0=0", (("chi0", 0.0),)), ("chi0=1e-3", (("chi0", 1e-3),))),
        notes="mean-field amplitudes vs drive power, P1 = P2 = P",
    )


def _fig3(n):
    base = EffectiveParams(delta_c=10.0, G1=0.1, Lambda=1.0, chi_mag=40.0, phi=0.0, kappa1=100.0, gamma_m=1e-6, n_th=1000.0)
    return SweepSpec(
        name="fig3",
        base=base,
        axes=(Axis("phi", 0.0, math.pi, n or 101), Axis("Lambda", 0.0, 5.0, n or 101)),
        outputs=("margin", "rh_stable", "rh_degenerate", "S_theta0_db"),
        series=tuple((f"G1={g}", (("G1", g),)) for g in (0.1, 1.0, 5.0)),
        notes="stability map; phi axis in radians (phi / pi gives the units-of-pi reading)",
    )


def _fig4(n):
    base = EffectiveParams(delta_c=10.0, G1=0.1, Lambda=10.0, chi_mag=0.0, phi=0.5 * math.pi, kappa1=100.0, gamma_m=1e-6, n_th=0.0)
    pairs = ((0.1, 0.0), (100.0, 0.0), (0.1, 0.04), (100.0, 40.0))
    return SweepSpec(
        name="fig4",
        base=base,
        axes=(Axis("theta", -math.pi, math.pi, n or 101),),
        outputs=("margin", "S_theta_db", "S_opt_db", "theta_opt", "var_Xb", "var_Yb", "cov_XbYb"),
        series=tuple((f"kappa1={k} chi={c}", (("kappa1", k), ("chi_mag", c))) for k, c in pairs),
        notes="squeezing vs angle; |chi| = 0.4 kappa1 when on",
    )


FIG5_KAPPAS = (0.1, 10.0, 100.0)  # the middle value is a free choice between the two regimes


def _fig5(n):
    base = EffectiveParams(delta_c=10.0, G1=0.1, Lambda=0.0, chi_mag=0.0, phi=0.5 * math.pi, kappa1=100.0, gamma_m=1e-6, n_th=0.0)
    panels = [(k, 0.0) for k in FIG5_KAPPAS] + [(k, 0.4 * k) for k in FIG5_KAPPAS]
    return SweepSpec(
        name="fig5",
        base=base,
        axes=(Axis("Lambda", 0.0, 20.0, n or 101), Axis("delta_c", 0.0, 40.0, n or 101)),
        outputs=("margin", "S_theta0_db", "S_opt_db"),
        series=tuple((f"kappa1={k} chi={c:g}", (("kappa1", k), ("chi_mag", c))) for k, c in panels),
        notes="panels (a)-(c) without the medium, (d)-(f) with |chi| = 0.4 kappa1",
    )


def _fig6(n):
    base = EffectiveParams(delta_c=10.0, G1=1.5, Lambda=0.0, chi_mag=0.0, phi=0.5 * math.pi, kappa1=100.0, gamma_m=1e-6, n_th=1000.0)
    return SweepSpec(
        name="fig6",
        base=base,
        axes=(Axis("Lambda", 0.0, 20.0, n or 101), Axis("chi_mag", 0.0, 48.0, n or 101)),
        outputs=("margin", "S_theta0_db", "S_opt_db"),
    )


FIG7_G1 = (0.5, 1.5, 2.5)
FIG7_CHI = 48.0  # chosen so that G1 = 0.5 beats 3 dB at n_th <= 500 only
FIG7_NTH = (0.0, 500.0, 1000.0, 5000.0)


def _fig7(n):
    base = EffectiveParams(delta_c=10.0, G1=0.5, Lambda=8.0, chi_mag=0.0, phi=0.5 * math.pi, kappa1=100.0, gamma_m=1e-6, n_th=0.0)
    series = []
    for chi in (0.0, FIG7_CHI):
        for g in FIG7_G1:
            for nth in FIG7_NTH:
                series.append((f"G1={g} chi={chi:g} n_th={nth:g}", (("G1", g), ("chi_mag", chi), ("n_th", nth))))
    return SweepSpec(
        name="fig7",
        base=base,
        axes=(Axis("delta_c", 0.0, 40.0, n or 101),),
        outputs=("margin", "S_theta0_db", "S_opt_db"),
        series=tuple(series),
        notes="panels (a)-(c) |chi| = 0, (d)-(f) |chi| > 0; curves over n_th",
    )


PRESETS = {"fig2": _fig2, "fig3": _fig3, "fig4": _fig4, "fig5": _fig5, "fig6": _fig6, "fig7": _fig7}


def preset(name: str, n_points: int | None = None) -> SweepSpec:
    """Spec reproducing a figure; ``n_points`` overrides every axis resolution."""
    try:
        factory = PRESETS[name]
    except KeyError:
        raise UnknownPreset(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}") from None
    return factory(n_points)


def unstable_bands(values: np.ndarray, stable: np.ndarray) -> list[tuple[float, float]]:
    """Contiguous runs of unstable grid values as ``(first, last)`` pairs."""
    bands = []
    start = None
    for v, ok in zip(values, stable):
        if not ok and start is None:
            start = v
        if ok and start is not None:
            bands.append((start, prev))
            start = None
        prev = v
    if start is not None:
        bands.append((start, prev))
    return bands
