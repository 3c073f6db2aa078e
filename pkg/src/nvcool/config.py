"""JSON run configuration -> validated :class:`RunSpec`.

A config uses exactly one unit style.  Either every frequency key carries
an ``_over_2pi`` suffix (value in Hz, converted to angular internally), or
the document sets ``"renormalized": true`` and gives bare dimensionless
values (rates in units of gamma_b).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from nvcool.errors import ConfigError, InvalidParameterError
from nvcool.liouville import IntegratorSpec
from nvcool.model import OCCUPATION_FIELDS, RATE_FIELDS, PhysicalParams, SystemParams, validate_regime

MODES = ("analytic-sweep", "gamma-sweep", "evolve-full", "evolve-reduced", "evolve-meanfield",
         "compare", "derive-params")
EVOLVE_MODES = ("evolve-full", "evolve-reduced", "evolve-meanfield")
TOP_LEVEL_KEYS = {"mode", "renormalized", "params", "physical", "derive", "sweep", "truncation",
                  "integrator", "stationarity", "gamma_range", "output", "check_tol"}
SUFFIX = "_over_2pi"
TWO_PI = 2.0 * math.pi

# mode-a truncation used for the reference numerical runs, keyed by bath occupation
REFERENCE_DIM_A = {1: 15, 2: 27, 3: 40, 4: 60}
REFERENCE_DIM_B = {1: 15}
CI_DIMS = (25, 10)
CI_MAX_NBAR_A = 2


def default_dim(nbar: float, table: dict[int, int]) -> int:
    """Reference truncation for ``nbar``; 15 * nbar (at least 4) off the table."""
    if float(nbar).is_integer() and int(nbar) in table:
        return table[int(nbar)]
    return max(4, math.ceil(15 * nbar))


def truncation_warnings(dim_a: int | None, dim_b: int, nbar_a: float, nbar_b: float) -> list[str]:
    out = []
    for name, dim, nbar in (("dim_a", dim_a, nbar_a), ("dim_b", dim_b, nbar_b)):
        if dim is not None and dim < 4 * nbar + 5:
            out.append(f"truncation {name}={dim} is below 4*nbar+5={4 * nbar + 5:g}")
    return out


@dataclass
class Units:
    """Conversion between config values and internal angular rates."""

    renormalized: bool

    @property
    def factor(self) -> float:
        return 1.0 if self.renormalized else TWO_PI

    def key(self, name: str) -> str:
        if name in RATE_FIELDS and not self.renormalized:
            return name + SUFFIX
        return name

    def to_internal(self, name: str, value: float) -> float:
        return value * self.factor if name in RATE_FIELDS else value

    def to_config(self, name: str, value: float) -> float:
        return value / self.factor if name in RATE_FIELDS else value


@dataclass
class RunSpec:
    mode: str
    units: Units
    params: SystemParams | None = None
    physical: PhysicalParams | None = None
    derive: dict[str, float] = field(default_factory=dict)
    sweep: list[tuple[str, list[float]]] = field(default_factory=list)
    truncation: tuple[int, int] | None = None
    integrator: IntegratorSpec | None = None
    stationarity: tuple[float, float] | None = None
    gamma_range: tuple[float, float] | None = None
    output: str | None = None
    check_tol: float = 0.05
    warnings: list[str] = field(default_factory=list)
    source: dict[str, Any] = field(default_factory=dict)

    def dims_for(self, nbar_a: float, nbar_b: float) -> tuple[int, int]:
        if self.truncation is not None:
            return self.truncation
        return default_dim(nbar_a, REFERENCE_DIM_A), default_dim(nbar_b, REFERENCE_DIM_B)

    def resolved(self) -> dict[str, Any]:
        """Everything that determines the output, in internal units."""
        out: dict[str, Any] = {"mode": self.mode, "renormalized": self.units.renormalized}
        if self.params is not None:
            out["params"] = self.params.as_dict()
        if self.physical is not None:
            out["physical"] = vars(self.physical).copy()
        if self.derive:
            out["derive"] = dict(self.derive)
        if self.sweep:
            out["sweep"] = [[name, list(values)] for name, values in self.sweep]
        if self.truncation is not None:
            out["truncation"] = list(self.truncation)
        if self.integrator is not None:
            out["integrator"] = {"dt": self.integrator.dt, "t_final": self.integrator.t_final,
                                 "record_stride": self.integrator.record_stride}
        if self.stationarity is not None:
            out["stationarity"] = {"window": self.stationarity[0], "tol": self.stationarity[1]}
        if self.gamma_range is not None:
            out["gamma_range"] = list(self.gamma_range)
        return out


def _number(value, key) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"expected a number, got {value!r}", key)
    value = float(value)
    if not math.isfinite(value):
        raise ConfigError("value must be finite", key)
    return value


def _section(doc: dict, key: str, allowed: set[str]) -> dict:
    section = doc.get(key, {})
    if not isinstance(section, dict):
        raise ConfigError("expected an object", key)
    for k in section:
        if k not in allowed:
            raise ConfigError(f"unknown key (allowed: {sorted(allowed)})", f"{key}.{k}")
    return section


def _params(doc: dict, units: Units) -> SystemParams:
    allowed = {units.key(n) for n in RATE_FIELDS + OCCUPATION_FIELDS}
    section = doc.get("params")
    if not isinstance(section, dict):
        raise ConfigError("missing or not an object", "params")
    for k in section:
        if k not in allowed:
            hint = " (mixes unit styles)" if k in {n + SUFFIX for n in RATE_FIELDS} | set(RATE_FIELDS) else ""
            raise ConfigError(f"unknown key{hint}", f"params.{k}")
    values = {}
    for name in RATE_FIELDS + OCCUPATION_FIELDS:
        key = units.key(name)
        if key not in section:
            if name == "delta":
                continue
            raise ConfigError("required field is missing", f"params.{key}")
        values[name] = units.to_internal(name, _number(section[key], f"params.{key}"))
    values.setdefault("delta", values["omega_z"])
    try:
        return SystemParams(**values)
    except InvalidParameterError as exc:
        raise ConfigError(str(exc), "params") from exc


PHYSICAL_KEYS = {"mass_a", "mass_b", "omega_a_mech", "omega_b_mech", "G2", "temperature", "quality_factor"}


def _physical(doc: dict) -> PhysicalParams:
    allowed = PHYSICAL_KEYS | {"omega_a_mech" + SUFFIX, "omega_b_mech" + SUFFIX}
    section = _section(doc, "physical", allowed)
    values = {}
    for name in sorted(PHYSICAL_KEYS):
        if name in section and name + SUFFIX in section:
            raise ConfigError("give either the angular value or the _over_2pi value", f"physical.{name}")
        if name + SUFFIX in section:
            values[name] = TWO_PI * _number(section[name + SUFFIX], f"physical.{name}{SUFFIX}")
        elif name in section:
            values[name] = _number(section[name], f"physical.{name}")
        else:
            raise ConfigError("required field is missing", f"physical.{name}")
    try:
        return PhysicalParams(**values)
    except InvalidParameterError as exc:
        raise ConfigError(str(exc), "physical") from exc


def _sweep(doc: dict, units: Units) -> list[tuple[str, list[float]]]:
    raw = doc.get("sweep", {})
    if isinstance(raw, dict):
        items = list(raw.items())
    elif isinstance(raw, list) and all(isinstance(x, list) and len(x) == 2 for x in raw):
        items = [tuple(x) for x in raw]
    else:
        raise ConfigError("expected an object {name: [values]} or a list of [name, [values]]", "sweep")
    out = []
    by_key = {units.key(n): n for n in RATE_FIELDS + OCCUPATION_FIELDS}
    for key, values in items:
        if key not in by_key:
            raise ConfigError(f"sweep parameter is not a SystemParams field in this unit style "
                              f"(allowed: {sorted(by_key)})", f"sweep.{key}")
        if not isinstance(values, list) or not values:
            raise ConfigError("expected a non-empty list of values", f"sweep.{key}")
        name = by_key[key]
        out.append((name, [units.to_internal(name, _number(v, f"sweep.{key}")) for v in values]))
    return out


def parse_config(doc: dict) -> RunSpec:
    if not isinstance(doc, dict):
        raise ConfigError("top level must be a JSON object")
    for k in doc:
        if k not in TOP_LEVEL_KEYS:
            raise ConfigError(f"unknown key (allowed: {sorted(TOP_LEVEL_KEYS)})", k)
    mode = doc.get("mode")
    if mode not in MODES:
        raise ConfigError(f"must be one of {list(MODES)}, got {mode!r}", "mode")
    renorm = doc.get("renormalized", False)
    if not isinstance(renorm, bool):
        raise ConfigError("expected true or false", "renormalized")
    units = Units(renorm)
    spec = RunSpec(mode=mode, units=units, source=doc)

    if mode == "derive-params":
        if renorm:
            raise ConfigError("derive-params takes SI inputs; drop the renormalized flag", "renormalized")
        spec.physical = _physical(doc)
        derive = _section(doc, "derive", {"Gamma" + SUFFIX, "nbar_a", "heating_temperature"})
        if "nbar_a" in derive and "heating_temperature" in derive:
            raise ConfigError("give nbar_a or heating_temperature, not both", "derive")
        spec.derive = {k: _number(v, f"derive.{k}") for k, v in derive.items()}
        spec.output = _output(doc)
        return spec

    spec.params = _params(doc, units)
    spec.sweep = _sweep(doc, units)
    names = [name for name, _ in spec.sweep]
    if len(set(names)) != len(names):
        raise ConfigError("a parameter is swept twice", "sweep")

    if "truncation" in doc:
        trunc = _section(doc, "truncation", {"dim_a", "dim_b"})
        try:
            dims = (int(_number(trunc["dim_a"], "truncation.dim_a")), int(_number(trunc["dim_b"], "truncation.dim_b")))
        except KeyError as exc:
            raise ConfigError("required field is missing", f"truncation.{exc.args[0]}") from None
        if min(dims) < 2:
            raise ConfigError("dimensions must be >= 2", "truncation")
        spec.truncation = dims

    integ = _section(doc, "integrator", {"dt", "t_final", "record_stride"})
    time_unit = 1.0 / spec.params.gamma_b if spec.params.gamma_b > 0 else 1.0
    try:
        spec.integrator = IntegratorSpec(
            dt=_number(integ.get("dt", 2e-4 * time_unit), "integrator.dt"),
            t_final=_number(integ.get("t_final", 3.0 * time_unit), "integrator.t_final"),
            record_stride=int(_number(integ.get("record_stride", 50), "integrator.record_stride")),
        )
    except InvalidParameterError as exc:
        raise ConfigError(str(exc), "integrator") from exc

    stat = _section(doc, "stationarity", {"window", "tol"})
    window = _number(stat.get("window", 0.1 * spec.integrator.t_final), "stationarity.window")
    tol = _number(stat.get("tol", 1e-3), "stationarity.tol")
    if window <= 0 or window > spec.integrator.t_final or tol <= 0:
        raise ConfigError("window must lie in (0, t_final] and tol must be > 0", "stationarity")
    spec.stationarity = (window, tol)

    if "gamma_range" in doc:
        gr = doc["gamma_range"]
        if not (isinstance(gr, list) and len(gr) == 2):
            raise ConfigError("expected [low, high]", "gamma_range")
        lo, hi = (units.to_internal("Gamma", _number(v, "gamma_range")) for v in gr)
        if not 0 < lo <= hi:
            raise ConfigError("need 0 < low <= high", "gamma_range")
        spec.gamma_range = (lo, hi)
    if "check_tol" in doc:
        spec.check_tol = _number(doc["check_tol"], "check_tol")
    spec.output = _output(doc)

    _mode_requirements(spec)
    spec.warnings = validate_regime(spec.params)
    if mode in EVOLVE_MODES and mode != "evolve-meanfield":
        dim_a, dim_b = spec.dims_for(spec.params.nbar_a, spec.params.nbar_b)
        spec.warnings += truncation_warnings(dim_a if mode == "evolve-full" else None, dim_b,
                                             spec.params.nbar_a, spec.params.nbar_b)
    return spec


def _output(doc):
    out = doc.get("output")
    if out is not None and not isinstance(out, str):
        raise ConfigError("expected a path string", "output")
    return out


def _mode_requirements(spec: RunSpec):
    names = [n for n, _ in spec.sweep]
    if spec.mode == "analytic-sweep" and len(names) > 1:
        raise ConfigError("analytic-sweep takes a single sweep parameter", "sweep")
    if spec.mode == "gamma-sweep" and names != ["Gamma"]:
        raise ConfigError("gamma-sweep needs exactly one sweep over Gamma", "sweep")
    if spec.mode == "compare" and not set(names) <= {"nbar_a", "Gamma"}:
        raise ConfigError("compare sweeps nbar_a and/or Gamma only", "sweep")
    if spec.mode in EVOLVE_MODES and names:
        raise ConfigError("evolve modes do not take a sweep", "sweep")


def load_config(path) -> RunSpec:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    return parse_config(doc)
