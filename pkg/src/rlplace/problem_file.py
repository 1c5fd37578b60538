"""YAML snapshot format read by ``rlplace solve``.

::

    objective: su              # delay | su
    time: 1.0
    scenario:                  # optional, same keys as a scenario config file
      resource_demand: [60, 20, 60, 40, 50, 70]
    requests:                  # vehicle_id, x, y, service_id
      - [veh0, 120.0, 340.5, 2]
      - [veh1, 800.0, 90.0, 0]
"""

from __future__ import annotations

from pathlib import Path
from typing import Any

import yaml

from . import config as scenario_config
from .domain import RequestSnapshot, ScenarioConfig, ServiceRequest, validate_scenario
from .optimizer import ObjectiveKind, PlacementProblem


class ProblemFormatError(ValueError):
    pass


def problem_from_dict(data: dict[str, Any], objective: ObjectiveKind | None = None) -> tuple[ScenarioConfig, PlacementProblem]:
    if not isinstance(data, dict):
        raise ProblemFormatError("problem file must be a mapping")
    cfg = validate_scenario(scenario_config.from_dict(data.get("scenario")))
    time = float(data.get("time", 1.0))
    requests = []
    for k, row in enumerate(data.get("requests") or []):
        try:
            vid, x, y, s = row
            requests.append(ServiceRequest(str(vid), (float(x), float(y)), time, int(s)))
        except (TypeError, ValueError):
            raise ProblemFormatError(f"request #{k} must be [vehicle_id, x, y, service_id], got {row!r}") from None
        if not 0 <= requests[-1].service_id < cfg.n_services:
            raise ProblemFormatError(f"request #{k} names unknown service {requests[-1].service_id}")
    if objective is None:
        try:
            objective = ObjectiveKind(data.get("objective", "delay"))
        except ValueError:
            raise ProblemFormatError(f"objective must be 'delay' or 'su', got {data.get('objective')!r}") from None
    snap = RequestSnapshot.from_requests(time, requests)
    problem = PlacementProblem.from_snapshot(
        cfg.services, cfg.edges, snap, objective, cfg.balance_offset, cfg.delay
    )
    return cfg, problem


def problem_to_dict(cfg: ScenarioConfig, snapshot: RequestSnapshot, objective: ObjectiveKind) -> dict[str, Any]:
    return {
        "objective": objective.value,
        "time": snapshot.time,
        "scenario": scenario_config.to_dict(cfg),
        "requests": [
            [r.vehicle_id, r.location[0], r.location[1], r.service_id]
            for s in sorted(snapshot.requests_by_service)
            for r in snapshot.requests_by_service[s]
        ],
    }


def load_problem(path: str | Path, objective: ObjectiveKind | None = None) -> tuple[ScenarioConfig, PlacementProblem]:
    try:
        data = yaml.safe_load(Path(path).read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        raise ProblemFormatError(f"invalid YAML: {exc}") from None
    return problem_from_dict(data or {}, objective)
