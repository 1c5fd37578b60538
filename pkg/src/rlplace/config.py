"""Scenario defaults and the YAML configuration format.

Every key is optional; an empty file yields the default six-service,
six-edge scenario. Layout::

    vehicle_count: 100
    learning_rate: 0.75        # alpha
    discount: 0.0              # gamma
    balance_offset: 0.1        # beta
    violation_penalty: -10.0
    horizon: 500.0             # seconds
    monitor_interval: 1.0      # seconds
    rng_seed: 0
    resource_demand: [60, 20, 60, 40, 50, 70]    # shorthand, one per service
    delay_threshold: [5, 4, 4.5, 5, 5, 5.5]      # ms
    capacity: [60, 60, 70, 80, 90, 100]          # shorthand, one per edge
    ue_limit: 100                                # scalar or list
    services:                  # explicit form, overrides the shorthand
      - {id: 0, resource_demand: 60, delay_threshold: 5}
    edges:
      - {id: 0, position: [x, y], capacity: 60, ue_limit: 100}
    delay: {base_delay: .., access_coeff: .., backhaul_coeff: .., direct_distance: false}
    mobility: {area: [w, h], isd: 500, speed_range: [3, 14], churn_rate: 0.02,
               hotspot_radius: 0, hotspot_speed: 0, hotspot_floor: 0}   # radius 0 = uniform demand

Edges without explicit positions take the first sites of the eNB grid.
"""

from __future__ import annotations

from dataclasses import asdict, fields
from pathlib import Path
from typing import Any

import yaml

from .domain import (
    DelayModelParams,
    EdgeNode,
    MobilityParams,
    ScenarioConfig,
    ServiceSpec,
    validate_scenario,
)
from .traces import place_enbs

RESOURCE_DEMAND = (60.0, 20.0, 60.0, 40.0, 50.0, 70.0)
DELAY_THRESHOLD = (5.0, 4.0, 4.5, 5.0, 5.0, 5.5)
CAPACITY = (60.0, 60.0, 70.0, 80.0, 90.0, 100.0)
UE_LIMIT = 100

_SCALARS = ("vehicle_count", "learning_rate", "discount", "balance_offset",
            "violation_penalty", "horizon", "monitor_interval", "rng_seed")


class ConfigError(ValueError):
    pass


def _as_list(value, n, name):
    if isinstance(value, (int, float)):
        return [value] * n
    if len(value) != n:
        raise ConfigError(f"{name} needs {n} entries, got {len(value)}")
    return list(value)


def _sub(cls, data: dict | None, name: str):
    data = dict(data or {})
    known = {f.name for f in fields(cls)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown {name} keys: {sorted(unknown)}")
    for key in ("area", "speed_range"):
        if key in data:
            data[key] = tuple(float(v) for v in data[key])
    return cls(**data)


def from_dict(data: dict[str, Any] | None) -> ScenarioConfig:
    data = dict(data or {})
    known = set(_SCALARS) | {"services", "edges", "delay", "mobility",
                             "resource_demand", "delay_threshold", "capacity", "ue_limit"}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown keys: {sorted(unknown)}")

    delay = _sub(DelayModelParams, data.get("delay"), "delay")
    mobility = _sub(MobilityParams, data.get("mobility"), "mobility")

    if "services" in data:
        services = tuple(
            ServiceSpec(int(s["id"]), float(s["resource_demand"]), float(s["delay_threshold"]))
            for s in data["services"]
        )
    else:
        demand = data.get("resource_demand", RESOURCE_DEMAND)
        thresholds = _as_list(data.get("delay_threshold", DELAY_THRESHOLD), len(demand), "delay_threshold")
        services = tuple(ServiceSpec(k, float(r), float(d)) for k, (r, d) in enumerate(zip(demand, thresholds)))

    if "edges" in data:
        raw_edges = list(data["edges"])
    else:
        caps = data.get("capacity", CAPACITY)
        limits = _as_list(data.get("ue_limit", UE_LIMIT), len(caps), "ue_limit")
        raw_edges = [{"id": k, "capacity": c, "ue_limit": n} for k, (c, n) in enumerate(zip(caps, limits))]
    sites = place_enbs(mobility.area, mobility.isd)
    edges = []
    for k, e in enumerate(raw_edges):
        if "position" in e:
            pos = tuple(float(v) for v in e["position"])
        elif k < len(sites):
            pos = sites[k]
        else:
            raise ConfigError(f"edge {e.get('id', k)} has no position and the eNB grid has only {len(sites)} sites")
        edges.append(EdgeNode(int(e.get("id", k)), pos, float(e["capacity"]), int(e.get("ue_limit", UE_LIMIT))))

    scalars = {k: data[k] for k in _SCALARS if k in data}
    for k in ("vehicle_count", "rng_seed"):
        if k in scalars:
            scalars[k] = int(scalars[k])
    for k in set(scalars) - {"vehicle_count", "rng_seed"}:
        scalars[k] = float(scalars[k])
    return ScenarioConfig(services, tuple(edges), delay=delay, mobility=mobility, **scalars)


def to_dict(config: ScenarioConfig) -> dict[str, Any]:
    """Explicit (non-shorthand) form; ``from_dict(to_dict(c)) == c``."""
    out: dict[str, Any] = {k: getattr(config, k) for k in _SCALARS}
    out["services"] = [asdict(s) for s in config.services]
    out["edges"] = [
        {"id": e.id, "position": list(e.position), "capacity": e.capacity, "ue_limit": e.ue_limit}
        for e in config.edges
    ]
    out["delay"] = asdict(config.delay)
    mob = asdict(config.mobility)
    mob["area"] = list(mob["area"])
    mob["speed_range"] = list(mob["speed_range"])
    out["mobility"] = mob
    return out


def default_config() -> ScenarioConfig:
    return validate_scenario(from_dict({}))


def loads(text: str) -> ScenarioConfig:
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"invalid YAML: {exc}") from None
    if data is not None and not isinstance(data, dict):
        raise ConfigError("configuration must be a mapping")
    return validate_scenario(from_dict(data))


def dumps(config: ScenarioConfig) -> str:
    return yaml.safe_dump(to_dict(config), sort_keys=False)


def load(path: str | Path) -> ScenarioConfig:
    return loads(Path(path).read_text(encoding="utf-8"))


def dump(config: ScenarioConfig, path: str | Path) -> None:
    Path(path).write_text(dumps(config), encoding="utf-8")
