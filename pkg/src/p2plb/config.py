"""Scenario configuration: defaults, YAML loading, validation, overrides.

Precedence is CLI flags > config file > built-in defaults.  Every validation
error names the offending field so a bad file fails with a usable
diagnostic.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

import yaml

from .balancing import BalancingConfig
from .clustering import ClusteringConfig, build_clusters
from .engine import Simulation
from .errors import ConfigurationError
from .placement import PlacementConfig
from .topology import AttributeRanges, build_topology
from .workload import WorkloadConfig

_SECTION_TYPES = {
    "topology": AttributeRanges,
    "clustering": ClusteringConfig,
    "placement": PlacementConfig,
    "balancing": BalancingConfig,
    "workload": WorkloadConfig,
}


@dataclass(frozen=True)
class SweepSpec:
    param: str
    values: tuple[float, ...]


@dataclass(frozen=True)
class ScenarioConfig:
    n_peers: int = 100
    seed: int = 1
    lb_enabled: bool = True
    topology: AttributeRanges = field(default_factory=AttributeRanges)
    clustering: ClusteringConfig = field(default_factory=ClusteringConfig)
    placement: PlacementConfig = field(default_factory=PlacementConfig)
    balancing: BalancingConfig = field(default_factory=BalancingConfig)
    workload: WorkloadConfig = field(default_factory=WorkloadConfig)
    sweep: SweepSpec | None = None

    def validate(self) -> None:
        if self.n_peers < 2:
            raise ConfigurationError("n_peers must be at least 2")
        self.topology.validate()
        self.clustering.validate()
        self.placement.validate()
        self.balancing.validate()
        self.workload.validate()
        if self.workload.catalog_size > self.n_peers:
            raise ConfigurationError(
                "workload.catalog_size must not exceed n_peers")
        if self.sweep is not None:
            resolve_param(self, self.sweep.param)
            if not self.sweep.values:
                raise ConfigurationError("sweep.values must be non-empty")

    def with_param(self, param: str, value: float) -> "ScenarioConfig":
        """Copy of this config with one numeric field replaced."""
        section, fname, ftype = resolve_param(self, param)
        cast = int(value) if ftype is int else float(value)
        if section is None:
            return dataclasses.replace(self, **{fname: cast})
        sub = dataclasses.replace(getattr(self, section), **{fname: cast})
        return dataclasses.replace(self, **{section: sub})


def resolve_param(cfg: ScenarioConfig, param: str) -> tuple[str | None, str, type]:
    """Map a sweep parameter name to (section, field, type).

    Accepts dotted paths like ``workload.payload_bytes`` or a bare field
    name when it is unique across sections.  Only scalar numeric fields are
    sweepable.
    """
    def numeric_fields(obj) -> dict[str, type]:
        out = {}
        for f in dataclasses.fields(obj):
            val = getattr(obj, f.name)
            if isinstance(val, bool) or not isinstance(val, (int, float)):
                continue
            out[f.name] = int if isinstance(val, int) else float
        return out

    if "." in param:
        section, fname = param.split(".", 1)
        if section not in _SECTION_TYPES:
            raise ConfigurationError(f"sweep.param: unknown section '{section}'")
        fields = numeric_fields(getattr(cfg, section))
        if fname not in fields:
            raise ConfigurationError(
                f"sweep.param: '{section}.{fname}' is not a numeric field")
        return section, fname, fields[fname]

    top = numeric_fields(cfg)
    if param in top:
        return None, param, top[param]
    matches = []
    for section in _SECTION_TYPES:
        fields = numeric_fields(getattr(cfg, section))
        if param in fields:
            matches.append((section, param, fields[param]))
    if len(matches) == 1:
        return matches[0]
    if not matches:
        raise ConfigurationError(f"sweep.param: no numeric field named '{param}'")
    names = ", ".join(f"{s}.{param}" for s, _, _ in matches)
    raise ConfigurationError(f"sweep.param: '{param}' is ambiguous ({names})")


def _build_section(name: str, raw: Any) -> Any:
    cls = _SECTION_TYPES[name]
    if raw is None:
        return cls()
    if not isinstance(raw, Mapping):
        raise ConfigurationError(f"{name}: expected a mapping")
    known = {f.name: f for f in dataclasses.fields(cls)}
    kwargs = {}
    for key, value in raw.items():
        if key not in known:
            raise ConfigurationError(f"{name}.{key}: unknown key")
        if isinstance(value, list):
            value = tuple(value)
        kwargs[key] = value
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise ConfigurationError(f"{name}: {exc}") from exc


def scenario_from_dict(raw: Mapping[str, Any]) -> ScenarioConfig:
    if not isinstance(raw, Mapping):
        raise ConfigurationError("config root must be a mapping")
    kwargs: dict[str, Any] = {}
    for key, value in raw.items():
        if key in _SECTION_TYPES:
            kwargs[key] = _build_section(key, value)
        elif key in ("n_peers", "seed"):
            if not isinstance(value, int) or isinstance(value, bool):
                raise ConfigurationError(f"{key}: expected an integer")
            kwargs[key] = value
        elif key == "lb_enabled":
            if not isinstance(value, bool):
                raise ConfigurationError("lb_enabled: expected a boolean")
            kwargs[key] = value
        elif key == "sweep":
            if value is None:
                continue
            if not isinstance(value, Mapping) or "param" not in value or "values" not in value:
                raise ConfigurationError("sweep: expected mapping with 'param' and 'values'")
            kwargs[key] = SweepSpec(param=str(value["param"]),
                                    values=tuple(float(v) for v in value["values"]))
        else:
            raise ConfigurationError(f"{key}: unknown top-level key")
    cfg = ScenarioConfig(**kwargs)
    cfg.validate()
    return cfg


def load_scenario(path: str | Path) -> ScenarioConfig:
    """Parse and validate a YAML scenario file."""
    text = Path(path).read_text()
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigurationError(f"{path}: {exc}") from exc
    if raw is None:
        raw = {}
    try:
        return scenario_from_dict(raw)
    except ConfigurationError as exc:
        raise ConfigurationError(f"{path}: {exc}") from exc


def build_simulation(sc: ScenarioConfig, *, lb_enabled: bool | None = None,
                     seed: int | None = None, audit_level: int = 0,
                     track_tick_loads: bool = False) -> Simulation:
    """Assemble topology, clusters, and kernel state for one scenario run.

    The topology stream is derived from the scenario seed, so both
    comparison arms of a sweep see the same network.
    """
    sc.validate()
    seed = sc.seed if seed is None else seed
    lb = sc.lb_enabled if lb_enabled is None else lb_enabled
    topo = build_topology(sc.n_peers, f"{seed}/topology", sc.topology)
    clusters, _ = build_clusters(topo, sc.clustering)
    return Simulation(topo, clusters, sc.workload, sc.placement, sc.balancing,
                      lb_enabled=lb, seed=seed, audit_level=audit_level,
                      track_tick_loads=track_tick_loads)
