"""Plain-text ``key = value`` configuration files.

Sections ``[physical]`` or ``[effective]`` hold a parameter record whose keys
are exactly the field names of :class:`PhysicalParams` or
:class:`EffectiveParams`.  Rates are multiples of ``omega_m``; a key ending in
``_si`` gives the same quantity in rad/s (or s^-1) and is divided by
``omega_m``.  Values may be simple arithmetic such as ``0.5 * pi``.

An optional ``[sweep]`` section describes a parameter scan::

    [sweep]
    name = stability
    axis1 = phi 0 pi 101
    axis2 = Lambda 0 5 101 linear
    series = G1=0.1 | G1=5
    outputs = margin, S_theta0_db
    oracle_fraction = 0.01
"""

from __future__ import annotations

import ast
import hashlib
import math
import operator
from dataclasses import MISSING, dataclass, field, fields

from .errors import ConfigError, ParameterError
from .model import EffectiveParams, PhysicalParams

_RATE_FIELDS = {
    PhysicalParams: {"omega_L", "delta_bar_c", "kappa1", "kappa2", "gamma_m", "g1", "g2", "eta", "chi0"},
    EffectiveParams: {"delta_c", "delta_c_prime", "G1", "G2", "Lambda", "chi_mag", "kappa1", "kappa2", "gamma_m", "chi_cross"},
}
_SECTIONS = {"physical": PhysicalParams, "effective": EffectiveParams}
SWEEP_KEYS = {"name", "axis1", "axis2", "series", "outputs", "oracle_fraction", "model", "seed"}

_OPS = {
    ast.Add: operator.add,
    ast.Sub: operator.sub,
    ast.Mult: operator.mul,
    ast.Div: operator.truediv,
    ast.Pow: operator.pow,
    ast.USub: operator.neg,
    ast.UAdd: operator.pos,
}
_NAMES = {"pi": math.pi, "e": math.e, "inf": math.inf}


def parse_number(text: str) -> float:
    """Evaluate a numeric literal or a small arithmetic expression."""

    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)) and not isinstance(node.value, bool):
            return float(node.value)
        if isinstance(node, ast.Name) and node.id in _NAMES:
            return _NAMES[node.id]
        if isinstance(node, ast.BinOp) and type(node.op) in _OPS:
            return _OPS[type(node.op)](ev(node.left), ev(node.right))
        if isinstance(node, ast.UnaryOp) and type(node.op) in _OPS:
            return _OPS[type(node.op)](ev(node.operand))
        raise ValueError(f"not a number: {text!r}")

    try:
        return float(ev(ast.parse(text.strip(), mode="eval")))
    except (SyntaxError, TypeError, ZeroDivisionError, OverflowError) as exc:
        raise ValueError(f"not a number: {text!r}") from exc


@dataclass
class ConfigFile:
    """Parsed contents: ``sections[name][key] = (raw value, line number)``."""

    text: str
    sections: dict = field(default_factory=dict)

    @property
    def digest(self) -> str:
        """Git blob hash of the raw config text."""
        data = self.text.encode()
        return hashlib.sha1(b"blob %d\0" % len(data) + data).hexdigest()

    def mode(self) -> str:
        present = [s for s in _SECTIONS if s in self.sections]
        if len(present) != 1:
            raise ConfigError("config needs exactly one of [physical] or [effective]")
        return present[0]

    def params(self):
        mode = self.mode()
        return build_params(_SECTIONS[mode], self.sections[mode])


def parse_config(text: str) -> ConfigFile:
    """Split text into sections of ``key = value`` pairs, keeping line numbers.

    Unknown sections, duplicate keys and lines without ``=`` are errors.
    Comments start with ``#`` or ``;``.
    """
    cfg = ConfigFile(text)
    current = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].split(";", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            current = line[1:-1].strip().lower()
            if current not in _SECTIONS and current != "sweep":
                raise ConfigError(f"unknown section [{current}]", lineno)
            if current in cfg.sections:
                raise ConfigError(f"duplicate section [{current}]", lineno)
            cfg.sections[current] = {}
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", lineno)
        if current is None:
            raise ConfigError("key outside of any section", lineno)
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigError("empty key", lineno)
        if key in cfg.sections[current]:
            raise ConfigError(f"duplicate key {key!r}", lineno)
        _check_key(current, key, lineno)
        cfg.sections[current][key] = (value, lineno)
    return cfg


def _check_key(section, key, lineno):
    if section == "sweep":
        if key not in SWEEP_KEYS:
            raise ConfigError(f"unknown key {key!r} in [sweep]", lineno)
        return
    cls = _SECTIONS[section]
    names = {f.name for f in fields(cls)}
    if key in names:
        return
    if key.endswith("_si") and key[:-3] in _RATE_FIELDS[cls]:
        return
    if cls is EffectiveParams and key == "omega_m":
        return
    raise ConfigError(f"unknown key {key!r} in [{section}]", lineno)


def build_params(cls, entries: dict):
    """Construct a parameter record from ``{key: (raw, line)}`` entries."""
    values, lines = {}, {}
    omega_m = None
    if "omega_m" in entries:
        raw, lineno = entries["omega_m"]
        omega_m = _number(raw, lineno)
    for key, (raw, lineno) in entries.items():
        value = _number(raw, lineno)
        name = key
        if key.endswith("_si"):
            name = key[:-3]
            if omega_m is None:
                raise ConfigError(f"{key} needs omega_m in the same section", lineno)
            value = value / omega_m
        if cls is EffectiveParams and key == "omega_m":
            continue
        if name in values:
            raise ConfigError(f"{name} given twice (with and without _si)", lineno)
        values[name] = value
        lines[name] = lineno
    required = [f.name for f in fields(cls) if f.default is MISSING]
    missing = [n for n in required if n not in values]
    if missing:
        raise ConfigError(f"missing required keys: {', '.join(missing)}")
    try:
        return cls(**values)
    except ParameterError as exc:
        found = [lines[n] for n in (v.split()[0] for v in exc.violations) if n in lines]
        raise ConfigError(str(exc), min(found) if found else None) from exc


def _number(raw, lineno):
    try:
        return parse_number(raw)
    except ValueError as exc:
        raise ConfigError(str(exc), lineno) from exc


def load(path) -> ConfigFile:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())
