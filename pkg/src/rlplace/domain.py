"""Core value types shared by the optimizer, controller and simulator.

Service and edge ids are dense integers ``0..n-1`` so that per-pair
quantities can live in plain ``(n_services, n_edges)`` arrays.
"""

from __future__ import annotations

from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field
import math

Point = tuple[float, float]


class ScenarioError(ValueError):
    """Raised when a scenario violates one or more invariants.

    ``violations`` holds ``(code, field, message)`` triples; ``code`` is one of
    ``EmptyServices``, ``EmptyEdges``, ``NonPositiveParameter``,
    ``DuplicateId``, ``AlphaOutOfRange``, ``GammaOutOfRange``,
    ``OutOfBounds`` or ``NonDenseIds``.
    """

    def __init__(self, violations: list[tuple[str, str, str]]):
        self.violations = violations
        super().__init__("; ".join(f"{code} at {where}: {msg}" for code, where, msg in violations))

    @property
    def codes(self) -> list[str]:
        return [code for code, _, _ in self.violations]


@dataclass(frozen=True)
class ServiceSpec:
    id: int
    resource_demand: float
    delay_threshold: float  # ms


@dataclass(frozen=True)
class EdgeNode:
    id: int
    position: Point  # meters
    capacity: float
    ue_limit: int


@dataclass(frozen=True)
class ServiceRequest:
    """One ``(vehicle, location, time, service)`` request message."""

    vehicle_id: str
    location: Point
    time: float
    service_id: int


@dataclass(frozen=True)
class RequestSnapshot:
    """All requests active at one instant, grouped by service id."""

    time: float
    requests_by_service: Mapping[int, tuple[ServiceRequest, ...]] = field(default_factory=dict)

    def __post_init__(self):
        for sid, reqs in self.requests_by_service.items():
            seen = set()
            for r in reqs:
                if r.time != self.time:
                    raise ValueError(f"request of {r.vehicle_id} has time {r.time}, snapshot is at {self.time}")
                if r.service_id != sid:
                    raise ValueError(f"request of {r.vehicle_id} for service {r.service_id} filed under {sid}")
                if r.vehicle_id in seen:
                    raise ValueError(f"vehicle {r.vehicle_id} appears twice for service {sid}")
                seen.add(r.vehicle_id)

    @classmethod
    def from_requests(cls, time: float, requests: Iterable[ServiceRequest]) -> RequestSnapshot:
        grouped: dict[int, list[ServiceRequest]] = {}
        for r in requests:
            grouped.setdefault(r.service_id, []).append(r)
        return cls(time, {sid: tuple(v) for sid, v in sorted(grouped.items())})

    def requests(self, service_id: int) -> tuple[ServiceRequest, ...]:
        return tuple(self.requests_by_service.get(service_id, ()))

    def count(self, service_id: int) -> int:
        return len(self.requests_by_service.get(service_id, ()))

    def demand(self, n_services: int) -> DemandVector:
        return DemandVector(tuple(self.count(s) for s in range(n_services)))

    def __len__(self) -> int:
        return sum(len(v) for v in self.requests_by_service.values())


@dataclass(frozen=True)
class DemandVector:
    """Number of vehicles requesting each service, indexed by service id."""

    count_by_service: tuple[int, ...]

    def __post_init__(self):
        if any(c < 0 for c in self.count_by_service):
            raise ValueError("demand counts must be non-negative")

    def __getitem__(self, service_id: int) -> int:
        return self.count_by_service[service_id]

    def __len__(self) -> int:
        return len(self.count_by_service)

    @property
    def total(self) -> int:
        return sum(self.count_by_service)


@dataclass(frozen=True)
class Placement:
    """Injective map service id -> edge id, stored densely by service.

    ``hosts[s]`` is the edge hosting service ``s``.
    """

    hosts: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "hosts", tuple(int(h) for h in self.hosts))
        if len(set(self.hosts)) != len(self.hosts):
            raise ValueError(f"placement {self.hosts} puts two services on one edge")
        if any(h < 0 for h in self.hosts):
            raise ValueError("edge ids must be non-negative")

    @classmethod
    def from_mapping(cls, assignment: Mapping[int, int]) -> Placement:
        if sorted(assignment) != list(range(len(assignment))):
            raise ValueError("placement must assign every service id 0..n-1 exactly once")
        return cls(tuple(assignment[s] for s in range(len(assignment))))

    def host(self, service_id: int) -> int:
        return self.hosts[service_id]

    def service_on(self, edge_id: int) -> int | None:
        try:
            return self.hosts.index(edge_id)
        except ValueError:
            return None

    def as_dict(self) -> dict[int, int]:
        return dict(enumerate(self.hosts))

    def __len__(self) -> int:
        return len(self.hosts)


@dataclass(frozen=True)
class DelayModelParams:
    """Distance-based delay: ``base + access * d(vehicle, nearest eNB) + backhaul * d(nearest, host)``.

    Coefficients are per kilometer. With ``direct_distance`` the nearest-eNB
    hop is skipped and ``access_coeff`` scales the vehicle-to-host distance.
    """

    base_delay: float = 1.0
    access_coeff: float = 1.0
    backhaul_coeff: float = 0.5
    direct_distance: bool = False


@dataclass(frozen=True)
class MobilityParams:
    """Synthetic mobility and demand knobs (used when no trace file is given)."""

    area: Point = (math.sqrt(3e6), math.sqrt(3e6))  # 3 km^2
    isd: float = 500.0
    speed_range: Point = (3.0, 14.0)
    churn_rate: float = 0.02
    hotspot_radius: float = 0.0  # meters; 0 = location-independent demand
    hotspot_speed: float = 0.0  # m/s
    hotspot_floor: float = 0.0


@dataclass(frozen=True)
class ScenarioConfig:
    services: tuple[ServiceSpec, ...]
    edges: tuple[EdgeNode, ...]
    vehicle_count: int = 100
    learning_rate: float = 0.75
    discount: float = 0.0
    balance_offset: float = 0.1
    violation_penalty: float = -10.0
    horizon: float = 500.0
    monitor_interval: float = 1.0
    delay: DelayModelParams = field(default_factory=DelayModelParams)
    mobility: MobilityParams = field(default_factory=MobilityParams)
    rng_seed: int = 0

    @property
    def n_services(self) -> int:
        return len(self.services)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def ticks(self) -> list[float]:
        """Monitoring instants ``interval, 2*interval, ..., horizon``."""
        n = int(math.floor(self.horizon / self.monitor_interval + 1e-9))
        return [k * self.monitor_interval for k in range(1, n + 1)]


def validate_scenario(config: ScenarioConfig) -> ScenarioConfig:
    """Return ``config`` unchanged if every invariant holds, else raise ScenarioError."""
    bad: list[tuple[str, str, str]] = []

    def positive(name, value):
        if not value > 0:
            bad.append(("NonPositiveParameter", name, f"must be > 0, got {value}"))

    if not config.services:
        bad.append(("EmptyServices", "services", "at least one service is required"))
    if not config.edges:
        bad.append(("EmptyEdges", "edges", "at least one edge is required"))

    for kind, items in (("services", config.services), ("edges", config.edges)):
        ids = [x.id for x in items]
        dupes = sorted({i for i in ids if ids.count(i) > 1})
        for d in dupes:
            bad.append(("DuplicateId", f"{kind}[id={d}]", "ids must be unique"))
        if not dupes and sorted(ids) != list(range(len(ids))):
            bad.append(("NonDenseIds", kind, f"ids must be 0..{len(ids) - 1}, got {sorted(ids)}"))

    for s in config.services:
        positive(f"services[{s.id}].resource_demand", s.resource_demand)
        positive(f"services[{s.id}].delay_threshold", s.delay_threshold)

    width, height = config.mobility.area
    positive("mobility.area.width", width)
    positive("mobility.area.height", height)
    for e in config.edges:
        positive(f"edges[{e.id}].capacity", e.capacity)
        positive(f"edges[{e.id}].ue_limit", e.ue_limit)
        x, y = e.position
        if not (0 <= x <= width and 0 <= y <= height):
            bad.append(("OutOfBounds", f"edges[{e.id}].position", f"{e.position} outside {config.mobility.area}"))

    positive("vehicle_count", config.vehicle_count)
    positive("balance_offset", config.balance_offset)
    positive("horizon", config.horizon)
    positive("monitor_interval", config.monitor_interval)
    positive("mobility.isd", config.mobility.isd)
    if not 0 < config.learning_rate <= 1:
        bad.append(("AlphaOutOfRange", "learning_rate", f"must lie in (0, 1], got {config.learning_rate}"))
    if not 0 <= config.discount < 1:
        bad.append(("GammaOutOfRange", "discount", f"must lie in [0, 1), got {config.discount}"))
    if not 0 <= config.mobility.churn_rate <= 1:
        bad.append(("NonPositiveParameter", "mobility.churn_rate", "must lie in [0, 1]"))
    lo, hi = config.mobility.speed_range
    if not 0 < lo <= hi:
        bad.append(("NonPositiveParameter", "mobility.speed_range", f"need 0 < min <= max, got {(lo, hi)}"))
    d = config.delay
    for name in ("base_delay", "access_coeff", "backhaul_coeff"):
        if getattr(d, name) < 0:
            bad.append(("NonPositiveParameter", f"delay.{name}", "must be >= 0"))

    if bad:
        raise ScenarioError(bad)
    return config
