"""
Run configuration: YAML loading, dotted-path overrides, validation and the
sweep grid.

Grammar (every section a mapping, unknown keys rejected):

    machine:  {omega0, omega_l, Omega}
    cold/hot: {xi, beta, modes: [{frequency, coupling}]}
    numerics: {broadening_eta, bessel_tol, bessel_cap, rank_tol,
               weight_floor, merge_tol, workers}
    sweep:    {parameter, from, to, points, scale}
    output:   {csv_path, svg_path, svg_column, svg_log_y, columns}
    inputs:   {g1_csv}
"""

import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, Iterable, Optional, Tuple

import numpy as np
import yaml

from polaron_qhm.bath_model import BathMode, BathSpec, MAX_MODES
from polaron_qhm.floquet_lindblad import DEFAULT_RANK_TOL, MachineParams
from polaron_qhm.kms_thermometry import DEFAULT_WEIGHT_FLOOR
from polaron_qhm.polaron import DEFAULT_BESSEL_CAP, DEFAULT_BESSEL_TOL
from polaron_qhm.spectra import DEFAULT_ETA, DEFAULT_MERGE_TOL

logger = logging.getLogger("polaron_qhm.main")

SWEEP_PARAMETERS = ("xi_c", "xi_h", "xi_both", "omega_l", "Omega", "beta_C", "beta_H")
SWEEP_SCALES = ("linear", "log")

SWEEP_COLUMNS = (
    "value",
    "A",
    "Omega_r",
    "G1_delta",
    "G2_omega0",
    "beta_eff",
    "lambda",
    "lambda_heat",
    "J1",
    "J2",
    "P",
    "J_C",
    "eta",
    "eta_naive",
    "eta_carnot",
    "cop",
    "cop_carnot",
    "regime",
    "residual",
    "P_weak",
    "G1_weak_delta",
    "weak_coupling",
    "flags",
)
TEXT_COLUMNS = ("regime", "flags")

SECTIONS = {
    "machine": ("omega0", "omega_l", "Omega"),
    "cold": ("xi", "beta", "modes"),
    "hot": ("xi", "beta", "modes"),
    "numerics": (
        "broadening_eta",
        "bessel_tol",
        "bessel_cap",
        "rank_tol",
        "weight_floor",
        "merge_tol",
        "workers",
    ),
    "sweep": ("parameter", "from", "to", "points", "scale"),
    "output": ("csv_path", "svg_path", "svg_column", "svg_log_y", "columns"),
    "inputs": ("g1_csv",),
}
REQUIRED_SECTIONS = ("machine", "cold", "hot")
MODE_KEYS = ("frequency", "coupling")


class ConfigError(ValueError):
    """A configuration problem, located by the dotted path of the offending field."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path
        self.message = message


@dataclass(frozen=True)
class MachineConfig:
    omega0: float
    omega_l: float
    Omega: float


@dataclass(frozen=True)
class NumericsConfig:
    broadening_eta: float = DEFAULT_ETA
    bessel_tol: float = DEFAULT_BESSEL_TOL
    bessel_cap: int = DEFAULT_BESSEL_CAP
    rank_tol: float = DEFAULT_RANK_TOL
    weight_floor: float = DEFAULT_WEIGHT_FLOOR
    merge_tol: float = DEFAULT_MERGE_TOL
    workers: int = 1


@dataclass(frozen=True)
class SweepConfig:
    parameter: str
    start: float
    stop: float
    points: int
    scale: str = "linear"

    def grid(self) -> np.ndarray:
        if self.scale == "log":
            return np.geomspace(self.start, self.stop, self.points)
        return np.linspace(self.start, self.stop, self.points)


@dataclass(frozen=True)
class OutputConfig:
    csv_path: str = "sweep.csv"
    svg_path: Optional[str] = None
    svg_column: str = "P"
    svg_log_y: bool = False
    columns: Tuple[str, ...] = SWEEP_COLUMNS


@dataclass(frozen=True)
class InputsConfig:
    g1_csv: Optional[str] = None


@dataclass(frozen=True)
class RunConfig:
    machine: MachineConfig
    cold: BathSpec
    hot: BathSpec
    numerics: NumericsConfig = field(default_factory=NumericsConfig)
    sweep: Optional[SweepConfig] = None
    output: OutputConfig = field(default_factory=OutputConfig)
    inputs: InputsConfig = field(default_factory=InputsConfig)

    def machine_params(self) -> MachineParams:
        return MachineParams(
            self.machine.omega0,
            self.machine.omega_l,
            self.machine.Omega,
            self.cold,
            self.hot,
        )

    def grid(self) -> np.ndarray:
        if self.sweep is None:
            raise ConfigError("sweep", "no sweep section configured")
        return self.sweep.grid()

    def with_sweep_value(self, value: float) -> "RunConfig":
        if self.sweep is None:
            raise ConfigError("sweep", "no sweep section configured")
        value = float(value)
        parameter = self.sweep.parameter
        if parameter == "xi_c":
            return replace(self, cold=self.cold.with_xi(value))
        if parameter == "xi_h":
            return replace(self, hot=self.hot.with_xi(value))
        if parameter == "xi_both":
            return replace(self, cold=self.cold.with_xi(value), hot=self.hot.with_xi(value))
        if parameter == "beta_C":
            return replace(self, cold=self.cold.with_beta(value))
        if parameter == "beta_H":
            return replace(self, hot=self.hot.with_beta(value))
        return replace(self, machine=replace(self.machine, **{parameter: value}))


def _join(path: str, key: Any) -> str:
    return f"{path}.{key}" if path else str(key)


def _number(value: Any, path: str) -> float:
    if isinstance(value, bool):
        raise ConfigError(path, f"expected a number, got {value!r}")
    if isinstance(value, (int, float)):
        return float(value)
    if isinstance(value, str):
        try:
            return float(value)
        except ValueError:
            pass
    raise ConfigError(path, f"expected a number, got {value!r}")


def _positive(value: Any, path: str, allow_inf: bool = False) -> float:
    number = _number(value, path)
    if not number > 0 or (math.isinf(number) and not allow_inf) or math.isnan(number):
        raise ConfigError(path, f"must be positive{'' if allow_inf else ' and finite'}, got {value!r}")
    return number


def _nonnegative(value: Any, path: str) -> float:
    number = _number(value, path)
    if not (math.isfinite(number) and number >= 0):
        raise ConfigError(path, f"must be finite and nonnegative, got {value!r}")
    return number


def _integer(value: Any, path: str, minimum: int) -> int:
    number = _number(value, path)
    if not number.is_integer() or number < minimum:
        raise ConfigError(path, f"must be an integer >= {minimum}, got {value!r}")
    return int(number)


def _section(raw: Dict[str, Any], name: str) -> Dict[str, Any]:
    if name not in raw or raw[name] is None:
        if name in REQUIRED_SECTIONS:
            raise ConfigError(name, "missing required section")
        return {}
    section = raw[name]
    if not isinstance(section, dict):
        raise ConfigError(name, "must be a mapping")
    for key in section:
        if key not in SECTIONS[name]:
            raise ConfigError(_join(name, key), "unknown key")
    return section


def _require(section: Dict[str, Any], path: str, key: str) -> Any:
    if key not in section or section[key] is None:
        raise ConfigError(_join(path, key), "missing required value")
    return section[key]


def _parse_bath(section: Dict[str, Any], label: str) -> BathSpec:
    modes_raw = _require(section, label, "modes")
    if not isinstance(modes_raw, list) or not 1 <= len(modes_raw) <= MAX_MODES:
        raise ConfigError(_join(label, "modes"), f"must be a list of 1 to {MAX_MODES} modes")
    modes = []
    for i, mode in enumerate(modes_raw):
        path = _join(_join(label, "modes"), i)
        if not isinstance(mode, dict):
            raise ConfigError(path, "must be a mapping")
        for key in mode:
            if key not in MODE_KEYS:
                raise ConfigError(_join(path, key), "unknown key")
        frequency = _positive(_require(mode, path, "frequency"), _join(path, "frequency"))
        coupling = _number(mode.get("coupling", 1.0), _join(path, "coupling"))
        try:
            modes.append(BathMode(frequency, coupling))
        except ValueError as error:
            raise ConfigError(path, str(error)) from error
    xi = _nonnegative(_require(section, label, "xi"), _join(label, "xi"))
    beta = _positive(_require(section, label, "beta"), _join(label, "beta"), allow_inf=True)
    try:
        return BathSpec(tuple(modes), xi, beta, label)
    except ValueError as error:
        raise ConfigError(label, str(error)) from error


def _parse_numerics(section: Dict[str, Any], omega0: float) -> NumericsConfig:
    def get(key: str, default: float) -> float:
        if section.get(key) is None:
            return default
        return _positive(section[key], _join("numerics", key))

    return NumericsConfig(
        broadening_eta=get("broadening_eta", DEFAULT_ETA * omega0),
        bessel_tol=get("bessel_tol", DEFAULT_BESSEL_TOL),
        bessel_cap=_integer(section.get("bessel_cap", DEFAULT_BESSEL_CAP), "numerics.bessel_cap", 1),
        rank_tol=get("rank_tol", DEFAULT_RANK_TOL),
        weight_floor=get("weight_floor", DEFAULT_WEIGHT_FLOOR),
        merge_tol=get("merge_tol", DEFAULT_MERGE_TOL * omega0),
        workers=_integer(section.get("workers", 1), "numerics.workers", 1),
    )


def _parse_sweep(section: Dict[str, Any]) -> Optional[SweepConfig]:
    if not section:
        return None
    parameter = _require(section, "sweep", "parameter")
    if parameter not in SWEEP_PARAMETERS:
        raise ConfigError("sweep.parameter", f"must be one of {', '.join(SWEEP_PARAMETERS)}")
    start = _number(_require(section, "sweep", "from"), "sweep.from")
    stop = _number(_require(section, "sweep", "to"), "sweep.to")
    if not (math.isfinite(start) and math.isfinite(stop)):
        raise ConfigError("sweep", "from and to must be finite")
    if not start < stop:
        raise ConfigError("sweep", f"from must be below to, got {start} >= {stop}")
    points = _integer(_require(section, "sweep", "points"), "sweep.points", 2)
    scale = section.get("scale", "linear")
    if scale not in SWEEP_SCALES:
        raise ConfigError("sweep.scale", f"must be one of {', '.join(SWEEP_SCALES)}")
    if scale == "log" and start <= 0:
        raise ConfigError("sweep.from", "a log sweep needs from > 0")
    return SweepConfig(parameter, start, stop, points, scale)


def _parse_output(section: Dict[str, Any]) -> OutputConfig:
    defaults = OutputConfig()
    csv_path = section.get("csv_path") or defaults.csv_path
    svg_path = section.get("svg_path")
    if not isinstance(csv_path, str) or (svg_path is not None and not isinstance(svg_path, str)):
        raise ConfigError("output", "paths must be strings")
    svg_column = section.get("svg_column", defaults.svg_column)
    if svg_column not in SWEEP_COLUMNS or svg_column in TEXT_COLUMNS:
        raise ConfigError("output.svg_column", f"not a numeric column: {svg_column!r}")
    svg_log_y = section.get("svg_log_y", defaults.svg_log_y)
    if not isinstance(svg_log_y, bool):
        raise ConfigError("output.svg_log_y", "must be true or false")
    columns = section.get("columns")
    if columns is None or columns == "all":
        columns = defaults.columns
    elif not isinstance(columns, list) or not columns:
        raise ConfigError("output.columns", "must be a non-empty list of column names")
    for name in columns:
        if name not in SWEEP_COLUMNS:
            raise ConfigError("output.columns", f"unknown column {name!r}")
    return OutputConfig(csv_path, svg_path, svg_column, svg_log_y, tuple(columns))


def parse_config(raw: Any, base_dir: Optional[Path] = None) -> RunConfig:
    """Validate a parsed YAML mapping and fill in every default."""
    if not isinstance(raw, dict):
        raise ConfigError("", "the configuration must be a mapping of sections")
    for name in raw:
        if name not in SECTIONS:
            raise ConfigError(str(name), "unknown section")

    machine_raw = _section(raw, "machine")
    machine = MachineConfig(
        omega0=_positive(_require(machine_raw, "machine", "omega0"), "machine.omega0"),
        omega_l=_positive(_require(machine_raw, "machine", "omega_l"), "machine.omega_l"),
        Omega=_nonnegative(_require(machine_raw, "machine", "Omega"), "machine.Omega"),
    )
    cold = _parse_bath(_section(raw, "cold"), "cold")
    hot = _parse_bath(_section(raw, "hot"), "hot")
    numerics = _parse_numerics(_section(raw, "numerics"), machine.omega0)
    sweep = _parse_sweep(_section(raw, "sweep"))
    output = _parse_output(_section(raw, "output"))

    g1_csv = _section(raw, "inputs").get("g1_csv")
    if g1_csv is not None:
        if not isinstance(g1_csv, str):
            raise ConfigError("inputs.g1_csv", "must be a path")
        if base_dir is not None and not Path(g1_csv).is_absolute():
            g1_csv = str(base_dir / g1_csv)

    config = RunConfig(machine, cold, hot, numerics, sweep, output, InputsConfig(g1_csv))
    if sweep is not None:
        for end in (sweep.start, sweep.stop):
            try:
                config.with_sweep_value(end).machine_params()
            except ValueError as error:
                raise ConfigError(f"sweep.{sweep.parameter}", str(error)) from error
    return config


def apply_override(raw: Dict[str, Any], assignment: str) -> Dict[str, Any]:
    """Apply one `a.b.c=value` override in place; the value is parsed as YAML."""
    if "=" not in assignment:
        raise ConfigError(assignment, "override must look like key.path=value")
    key, text = assignment.split("=", 1)
    segments = [segment for segment in key.strip().split(".") if segment]
    if not segments:
        raise ConfigError(assignment, "empty override key")
    try:
        value = yaml.safe_load(text) if text.strip() else None
    except yaml.YAMLError as error:
        raise ConfigError(key, f"cannot parse value {text!r}: {error}") from error

    node: Any = raw
    for depth, segment in enumerate(segments):
        last = depth == len(segments) - 1
        path = ".".join(segments[: depth + 1])
        if isinstance(node, list):
            if not segment.isdigit() or int(segment) >= len(node):
                raise ConfigError(path, "list index out of range")
            index = int(segment)
            if last:
                node[index] = value
            else:
                node = node[index]
        elif isinstance(node, dict):
            if last:
                node[segment] = value
            else:
                if node.get(segment) is None:
                    node[segment] = {}
                node = node[segment]
        else:
            raise ConfigError(path, "cannot descend into a scalar value")
    return raw


def load_config(path, overrides: Iterable[str] = ()) -> RunConfig:
    """Read a YAML config file, apply overrides and validate."""
    config_path = Path(path)
    try:
        text = config_path.read_text(encoding="utf-8")
    except OSError as error:
        raise ConfigError("", f"cannot read {config_path}: {error}") from error
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as error:
        raise ConfigError("", f"cannot parse {config_path}: {error}") from error
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError("", f"{config_path} must contain a mapping of sections")
    for assignment in overrides:
        apply_override(raw, assignment)
    config = parse_config(raw, base_dir=config_path.parent)
    logger.debug(f"Loaded configuration from {config_path}")
    return config


# Copyright (c) 2025 AMD
