"""Scenario files: INI sections read with ``configparser``.

Grammar: ``[section]`` headers, ``key = value`` lines, ``#`` comments (also
inline).  Vectors are comma separated, matrix rows are separated by ``;``::

    [model]
    type = linear
    hamiltonian = 2 0; 0 1     # Q in H = x^T Q x / 2
    structure = 0 1; -1 0
    dissipation = 0 0; 0 0.5
    input_map = 0; 1

    [simulation]
    x0 = 1, 0
    t_end = 10
    step = 1e-3
    input = zero               # or: constant, with u = ...

Built-in model types take their parameters by field name, e.g.
``type = gas_piston`` with ``n_mol``, ``c_v``, ``A``, ``m``...
"""

from __future__ import annotations

import configparser
import dataclasses
import os
from pathlib import Path

import numpy as np

from .core import PhsSystem, TwoPortPhs, embed_two_port
from .errors import ConfigError
from .models import (
    ActuatorParams,
    GasPistonParams,
    HeatExchangerParams,
    MsdParams,
    linear_phs,
    make_actuator,
    make_gas_piston,
    make_heat_exchanger,
    make_msd,
    make_scalar_exp,
)

_MISSING = object()

MODEL_TYPES = {
    "gas_piston": (GasPistonParams, make_gas_piston),
    "actuator": (ActuatorParams, make_actuator),
    "heat_exchanger": (HeatExchangerParams, make_heat_exchanger),
    "msd": (MsdParams, make_msd),
    "scalar_exp": (None, make_scalar_exp),
}


class Scenario:
    """Thin typed accessor over a parsed config file."""

    def __init__(self, parser: configparser.ConfigParser, path: str = "<string>"):
        self.parser = parser
        self.path = path

    @classmethod
    def read(cls, path) -> "Scenario":
        parser = _new_parser()
        try:
            with open(path, encoding="utf-8") as fh:
                parser.read_file(fh)
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}") from None
        except configparser.Error as exc:
            raise ConfigError(f"{path}: {exc}") from None
        return cls(parser, str(path))

    @classmethod
    def from_string(cls, text: str) -> "Scenario":
        parser = _new_parser()
        try:
            parser.read_string(text)
        except configparser.Error as exc:
            raise ConfigError(str(exc)) from None
        return cls(parser)

    @property
    def stem(self):
        return Path(self.path).stem

    def has(self, section, key=None):
        if key is None:
            return self.parser.has_section(section)
        return self.parser.has_option(section, key)

    def section(self, name):
        if not self.parser.has_section(name):
            raise ConfigError(f"{self.path}: missing section [{name}]")
        return self.parser[name]

    def raw(self, section, key, default=_MISSING):
        if self.has(section, key):
            return self.parser[section][key]
        if default is not _MISSING:
            return default
        self.section(section)
        raise ConfigError(f"{self.path}: missing key '{key}' in [{section}]")

    def text(self, section, key, default=_MISSING):
        value = self.raw(section, key, default)
        return value.strip() if isinstance(value, str) else value

    def float(self, section, key, default=_MISSING):
        value = self.raw(section, key, default)
        if not isinstance(value, str):
            return value
        try:
            return float(value)
        except ValueError:
            raise ConfigError(f"{self.path}: [{section}] {key} = {value!r} is not a number") from None

    def int(self, section, key, default=_MISSING):
        value = self.float(section, key, default)
        if value is None or float(value) != int(value):
            raise ConfigError(f"{self.path}: [{section}] {key} must be an integer")
        return int(value)

    def vector(self, section, key, default=_MISSING):
        value = self.raw(section, key, default)
        if not isinstance(value, str):
            return value
        return parse_vector(value, f"[{section}] {key}")

    def matrix(self, section, key, default=_MISSING):
        value = self.raw(section, key, default)
        if not isinstance(value, str):
            return value
        return parse_matrix(value, f"[{section}] {key}")


def _new_parser():
    parser = configparser.ConfigParser(
        inline_comment_prefixes=("#",), comment_prefixes=("#",), interpolation=None
    )
    parser.optionxform = str  # parameter names such as T_ref and L0 are case sensitive
    return parser


def parse_vector(text: str, what: str = "value") -> np.ndarray:
    try:
        return np.array([float(v) for v in text.replace(",", " ").split()])
    except ValueError:
        raise ConfigError(f"{what}: cannot parse vector {text!r}") from None


def parse_matrix(text: str, what: str = "value") -> np.ndarray:
    rows = [parse_vector(r, what) for r in text.split(";") if r.strip()]
    if not rows or len({len(r) for r in rows}) != 1:
        raise ConfigError(f"{what}: rows of {text!r} have unequal lengths")
    return np.array(rows)


# ------------------------------------------------------------------- models


def model_params(sc: Scenario, section: str = "model"):
    """Parameter dataclass instance for a built-in model section."""
    kind = sc.text(section, "type")
    if kind not in MODEL_TYPES:
        raise ConfigError(f"{sc.path}: unknown model type {kind!r} in [{section}]")
    cls = MODEL_TYPES[kind][0]
    if cls is None:
        return None
    allowed = {f.name for f in dataclasses.fields(cls)}
    kwargs = {}
    for key in sc.section(section):
        if key == "type":
            continue
        if key not in allowed:
            raise ConfigError(f"{sc.path}: unknown key '{key}' for model type {kind}")
        kwargs[key] = sc.float(section, key)
    try:
        return cls(**kwargs)
    except ValueError as exc:
        raise ConfigError(f"{sc.path}: [{section}] {exc}") from None


def build_model(sc: Scenario, section: str = "model"):
    """Return the model described by ``section`` (PhsSystem or TwoPortPhs)."""
    kind = sc.text(section, "type")
    if kind == "linear":
        return _build_linear(sc, section)
    if kind not in MODEL_TYPES:
        raise ConfigError(f"{sc.path}: unknown model type {kind!r} in [{section}]")
    params = model_params(sc, section)
    factory = MODEL_TYPES[kind][1]
    return factory() if params is None else factory(params)


def build_system(sc: Scenario, section: str = "model") -> PhsSystem:
    model = build_model(sc, section)
    return embed_two_port(model) if isinstance(model, TwoPortPhs) else model


def _build_linear(sc: Scenario, section: str) -> PhsSystem:
    Q = sc.matrix(section, "hamiltonian")
    J = sc.matrix(section, "structure")
    G = sc.matrix(section, "input_map")
    n = Q.shape[0]
    R = sc.matrix(section, "dissipation", np.zeros((n, n)))
    for name, M, shape in (("hamiltonian", Q, (n, n)), ("structure", J, (n, n)), ("dissipation", R, (n, n))):
        if M.shape != shape:
            raise ConfigError(f"{sc.path}: [{section}] {name} must be {n}x{n}, got {M.shape}")
    if G.shape[0] != n:
        raise ConfigError(f"{sc.path}: [{section}] input_map needs {n} rows, got {G.shape[0]}")
    if not np.allclose(J, -J.T, atol=1e-12):
        raise ConfigError(f"{sc.path}: [{section}] structure is not skew-symmetric")
    if not np.allclose(R, R.T, atol=1e-12) or np.min(np.linalg.eigvalsh(0.5 * (R + R.T))) < -1e-12:
        raise ConfigError(f"{sc.path}: [{section}] dissipation must be symmetric positive semidefinite")
    n_in = G.shape[1]
    return linear_phs(
        Q, J, R, G,
        state_labels=tuple(f"x{i + 1}" for i in range(n)),
        input_labels=tuple(f"u{i + 1}" for i in range(n_in)),
        output_labels=tuple(f"y{i + 1}" for i in range(n_in)),
        name=sc.text(section, "name", "linear"),
    )


# --------------------------------------------------------------------- seeds


def seed_from_env(default: int = 0) -> int:
    """``PHS_LAB_SEED`` as a decimal unsigned integer, or ``default``."""
    raw = os.environ.get("PHS_LAB_SEED")
    if raw is None or raw.strip() == "":
        return default
    raw = raw.strip()
    if not raw.isdigit():
        raise ConfigError(f"PHS_LAB_SEED must be a decimal unsigned integer, got {raw!r}")
    return int(raw)
