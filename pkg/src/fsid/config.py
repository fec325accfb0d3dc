"""Scenario configuration files.

Configs are JSON key-value trees with a versioned ``schema`` field.
Unknown keys are errors, not warnings, and every validation message names
the offending field.  The seed is mandatory: no command ever falls back to
wall-clock entropy.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .systems import LtiSystem, double_integrator

SCHEMA_VERSION = 1

BOUND_SELECTORS = (
    "scalar_theorem",
    "matrix_theorem",
    "matrix_theorem_A",
    "matrix_theorem_B",
    "ellipsoid",
    "ellipsoid_containment",
    "ellipsoid_block_A",
    "ellipsoid_block_B",
    "single_traj",
    "snm",
    "bootstrap_A",
    "bootstrap_B",
)

PRESETS = {"double_integrator": double_integrator}


def _require(section: dict, key: str, where: str):
    if key not in section:
        raise ConfigError(f"missing required field '{where}.{key}'" if where else f"missing required field '{key}'")
    return section[key]


def _check_keys(section: dict, allowed: set[str], where: str) -> None:
    for key in section:
        if key not in allowed:
            label = f"{where}.{key}" if where else key
            raise ConfigError(f"unknown field '{label}'")


def _int_field(value, where: str, minimum: int | None = None) -> int:
    if not isinstance(value, int) or isinstance(value, bool):
        raise ConfigError(f"field '{where}' must be an integer")
    if minimum is not None and value < minimum:
        raise ConfigError(f"field '{where}' must be >= {minimum}")
    return value


def _num_field(value, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"field '{where}' must be a number")
    return float(value)


@dataclass
class SimulateSpec:
    kind: str
    horizon: int
    n_experiments: int = 1
    autonomous: bool = False


@dataclass
class EstimatorSpec:
    kind: str
    pooled: bool = False
    mode: str = "controlled"


@dataclass
class CoverageSpec:
    bound: str
    grid_axis: str
    grid: list[int]
    replicates: int
    horizon: int = 6


@dataclass
class FigureSpec:
    runs: int
    single_traj_horizons: list[int]
    batch_sizes: list[int]
    bootstrap_sizes: list[int]
    batch_horizon: int = 6
    bootstrap_trials: int = 200


@dataclass
class ScenarioConfig:
    seed: int
    system: LtiSystem
    threads: int = 1
    delta: float = 0.05
    alpha: float = 1.0
    bounds: list[str] = field(default_factory=list)
    simulate: SimulateSpec | None = None
    estimator: EstimatorSpec | None = None
    bootstrap_enabled: bool = False
    bootstrap_trials: int = 200
    coverage: CoverageSpec | None = None
    figure: FigureSpec | None = None
    raw: dict = field(default_factory=dict, repr=False)


def _parse_system(section, where: str = "system") -> LtiSystem:
    if not isinstance(section, dict):
        raise ConfigError(f"field '{where}' must be an object")
    if "preset" in section:
        _check_keys(section, {"preset", "sigma_w", "sigma_u"}, where)
        name = section["preset"]
        if name not in PRESETS:
            raise ConfigError(f"field '{where}.preset' references unknown preset '{name}'")
        base = PRESETS[name]()
        sigma_w = _num_field(section.get("sigma_w", base.sigma_w), f"{where}.sigma_w")
        sigma_u = _num_field(section.get("sigma_u", base.sigma_u), f"{where}.sigma_u")
        return LtiSystem(base.a, base.b, sigma_w, sigma_u)
    _check_keys(section, {"A", "B", "sigma_w", "sigma_u"}, where)
    a = np.asarray(_require(section, "A", where), dtype=float)
    b = np.asarray(_require(section, "B", where), dtype=float)
    sigma_w = _num_field(_require(section, "sigma_w", where), f"{where}.sigma_w")
    sigma_u = _num_field(_require(section, "sigma_u", where), f"{where}.sigma_u")
    return LtiSystem(a, b, sigma_w, sigma_u)


def _parse_simulate(section) -> SimulateSpec:
    where = "simulate"
    kind = _require(section, "kind", where)
    if kind == "batch":
        _check_keys(section, {"kind", "n_experiments", "horizon"}, where)
        return SimulateSpec(
            kind="batch",
            n_experiments=_int_field(_require(section, "n_experiments", where), f"{where}.n_experiments", 1),
            horizon=_int_field(_require(section, "horizon", where), f"{where}.horizon", 0),
        )
    if kind == "single":
        _check_keys(section, {"kind", "horizon", "autonomous"}, where)
        autonomous = section.get("autonomous", False)
        if not isinstance(autonomous, bool):
            raise ConfigError(f"field '{where}.autonomous' must be a boolean")
        return SimulateSpec(
            kind="single",
            horizon=_int_field(_require(section, "horizon", where), f"{where}.horizon", 0),
            autonomous=autonomous,
        )
    raise ConfigError(f"field '{where}.kind' must be 'batch' or 'single', got '{kind}'")


def _parse_estimator(section) -> EstimatorSpec:
    where = "estimator"
    kind = _require(section, "kind", where)
    if kind == "batch":
        _check_keys(section, {"kind", "pooled"}, where)
        pooled = section.get("pooled", False)
        if not isinstance(pooled, bool):
            raise ConfigError(f"field '{where}.pooled' must be a boolean")
        return EstimatorSpec(kind="batch", pooled=pooled)
    if kind == "scalar_lastpoint":
        _check_keys(section, {"kind"}, where)
        return EstimatorSpec(kind="scalar_lastpoint")
    if kind == "single":
        _check_keys(section, {"kind", "mode"}, where)
        mode = section.get("mode", "controlled")
        if mode not in ("controlled", "autonomous"):
            raise ConfigError(f"field '{where}.mode' must be 'controlled' or 'autonomous'")
        return EstimatorSpec(kind="single", mode=mode)
    raise ConfigError(f"field '{where}.kind' must be 'batch', 'scalar_lastpoint' or 'single'")


def _parse_grid(values, where: str) -> list[int]:
    if not isinstance(values, list) or not values:
        raise ConfigError(f"field '{where}' must be a nonempty list of integers")
    return [_int_field(v, where, 1) for v in values]


def _parse_coverage(section) -> CoverageSpec:
    where = "coverage"
    _check_keys(section, {"bound", "grid_axis", "grid", "replicates", "horizon"}, where)
    bound = _require(section, "bound", where)
    if bound not in BOUND_SELECTORS:
        raise ConfigError(f"field '{where}.bound' must be one of {BOUND_SELECTORS}, got '{bound}'")
    axis = _require(section, "grid_axis", where)
    if axis not in ("N", "T"):
        raise ConfigError(f"field '{where}.grid_axis' must be 'N' or 'T'")
    return CoverageSpec(
        bound=bound,
        grid_axis=axis,
        grid=_parse_grid(_require(section, "grid", where), f"{where}.grid"),
        replicates=_int_field(_require(section, "replicates", where), f"{where}.replicates", 1),
        horizon=_int_field(section.get("horizon", 6), f"{where}.horizon", 0),
    )


def _parse_figure(section) -> FigureSpec:
    where = "figure"
    _check_keys(
        section,
        {"runs", "single_traj_horizons", "batch_sizes", "bootstrap_sizes", "batch_horizon", "bootstrap_trials"},
        where,
    )
    return FigureSpec(
        runs=_int_field(section.get("runs", 10), f"{where}.runs", 1),
        single_traj_horizons=_parse_grid(
            _require(section, "single_traj_horizons", where), f"{where}.single_traj_horizons"
        ),
        batch_sizes=_parse_grid(_require(section, "batch_sizes", where), f"{where}.batch_sizes"),
        bootstrap_sizes=_parse_grid(_require(section, "bootstrap_sizes", where), f"{where}.bootstrap_sizes"),
        batch_horizon=_int_field(section.get("batch_horizon", 6), f"{where}.batch_horizon", 2),
        bootstrap_trials=_int_field(section.get("bootstrap_trials", 200), f"{where}.bootstrap_trials", 1),
    )


TOP_LEVEL_KEYS = {
    "schema",
    "seed",
    "threads",
    "system",
    "simulate",
    "estimator",
    "delta",
    "alpha",
    "bounds",
    "bootstrap",
    "coverage",
    "figure",
}


def parse_config(payload: dict) -> ScenarioConfig:
    if not isinstance(payload, dict):
        raise ConfigError("config root must be an object")
    _check_keys(payload, TOP_LEVEL_KEYS, "")
    schema = _require(payload, "schema", "")
    if schema != SCHEMA_VERSION:
        raise ConfigError(f"field 'schema' must be {SCHEMA_VERSION}, got {schema!r}")
    seed = _int_field(_require(payload, "seed", ""), "seed")
    system = _parse_system(_require(payload, "system", ""))
    threads = _int_field(payload.get("threads", 1), "threads", 1)
    delta = _num_field(payload.get("delta", 0.05), "delta")
    if not 0.0 < delta <= 1.0:
        raise ConfigError("field 'delta' must lie in (0, 1]")
    raw_alpha = payload.get("alpha", 1.0)
    alpha_list = raw_alpha if isinstance(raw_alpha, list) else [raw_alpha]
    if not alpha_list:
        raise ConfigError("field 'alpha' must be a number or nonempty list")
    alphas = [_num_field(a, "alpha") for a in alpha_list]
    if any(a <= 0 for a in alphas):
        raise ConfigError("field 'alpha' must be positive")
    alpha = alphas[0]

    bounds = payload.get("bounds", [])
    if not isinstance(bounds, list):
        raise ConfigError("field 'bounds' must be a list")
    for b in bounds:
        if b not in BOUND_SELECTORS:
            raise ConfigError(f"field 'bounds' contains unknown selector '{b}'")

    bootstrap_enabled, bootstrap_trials = False, 200
    if "bootstrap" in payload:
        section = payload["bootstrap"]
        _check_keys(section, {"enabled", "trials"}, "bootstrap")
        bootstrap_enabled = section.get("enabled", False)
        if not isinstance(bootstrap_enabled, bool):
            raise ConfigError("field 'bootstrap.enabled' must be a boolean")
        bootstrap_trials = _int_field(section.get("trials", 200), "bootstrap.trials", 1)

    return ScenarioConfig(
        seed=seed,
        system=system,
        threads=threads,
        delta=delta,
        alpha=alpha,
        bounds=list(bounds),
        simulate=_parse_simulate(payload["simulate"]) if "simulate" in payload else None,
        estimator=_parse_estimator(payload["estimator"]) if "estimator" in payload else None,
        bootstrap_enabled=bootstrap_enabled,
        bootstrap_trials=bootstrap_trials,
        coverage=_parse_coverage(payload["coverage"]) if "coverage" in payload else None,
        figure=_parse_figure(payload["figure"]) if "figure" in payload else None,
        raw=payload,
    )


def load_config(path) -> ScenarioConfig:
    text = Path(path).read_text()
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from None
    return parse_config(payload)
