"""Closed-loop simulation of static and Q-learning-driven placement."""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass
import enum
import logging

from .domain import Placement, ScenarioConfig
from .metrics import TrialSummary, average_summaries, summarize
from .optimizer import Infeasible, ObjectiveKind, PlacementProblem, solve
from .rl import QTable, initialize, observe_feedback
from .traces import DemandProfile, TraceIndex, TraceSample, generate_synthetic, snapshot_at

log = logging.getLogger(__name__)


class PolicyKind(enum.Enum):
    STATIC = "static"
    RL_DYNAMIC = "rl"


class SimulationError(RuntimeError):
    pass


class InfeasibleAtStart(SimulationError):
    pass


class TraceTooShort(SimulationError):
    pass


@dataclass(frozen=True)
class ServiceTick:
    host: int
    requesters: int
    avg_delay: float | None  # ms; None when nobody requests the service
    threshold: float
    reward: float
    q_value: float

    @property
    def violated(self) -> bool:
        return self.avg_delay is not None and self.avg_delay >= self.threshold


@dataclass(frozen=True)
class EdgeTick:
    service: int | None
    utilization: float


@dataclass(frozen=True)
class TickRecord:
    time: float
    per_service: tuple[ServiceTick, ...]
    per_edge: tuple[EdgeTick, ...]
    reoptimized: bool = False
    resolve_failed: bool = False

    @property
    def placement(self) -> Placement:
        return Placement(tuple(s.host for s in self.per_service))


def _edge_ticks(config: ScenarioConfig, placement: Placement) -> tuple[EdgeTick, ...]:
    out = []
    for e in config.edges:
        s = placement.service_on(e.id)
        util = 0.0 if s is None else config.services[s].resource_demand / e.capacity
        out.append(EdgeTick(s, util))
    return tuple(out)


def _problem(config: ScenarioConfig, snapshot, objective: ObjectiveKind) -> PlacementProblem:
    return PlacementProblem.from_snapshot(
        config.services, config.edges, snapshot, objective, config.balance_offset, config.delay
    )


def run(
    config: ScenarioConfig,
    trace: TraceIndex | Sequence[TraceSample],
    policy: PolicyKind,
    objective: ObjectiveKind,
    profile: DemandProfile | None = None,
) -> list[TickRecord]:
    """Simulate every monitoring tick from the first interval to the horizon.

    The demand profile defaults to one seeded from ``config.rng_seed``; pass
    fresh, identically seeded profiles to compare policies on the same demand.
    """
    index = trace if isinstance(trace, TraceIndex) else TraceIndex(trace)
    ticks = config.ticks()
    times = index.times
    if not times or times[-1] < ticks[-1] - 1e-9 or not index.at(ticks[0]):
        raise TraceTooShort(f"trace spans {times[:1]}..{times[-1:]}, need {ticks[0]}..{ticks[-1]}")
    if profile is None:
        profile = demand_profile(config, config.rng_seed)
    thresholds = [s.delay_threshold for s in config.services]

    records: list[TickRecord] = []
    table: QTable | None = None
    placement: Placement | None = None
    for t in ticks:
        snap = snapshot_at(index, t, profile, config.services)
        problem = _problem(config, snap, objective)
        if placement is None:
            try:
                sol = solve(problem)
            except Infeasible as exc:
                raise InfeasibleAtStart(str(exc)) from exc
            placement = sol.placement
            if policy is PolicyKind.RL_DYNAMIC:
                table = initialize(None, sol, t)
            per_service = tuple(
                ServiceTick(h, snap.count(s), sol.service_delays[s], thresholds[s], 0.0, 1.0)
                for s, h in enumerate(placement.hosts)
            )
            records.append(TickRecord(t, per_service, _edge_ticks(config, placement)))
            continue

        delays = []
        for s, h in enumerate(placement.hosts):
            d = problem.delay_matrix[s, h]
            delays.append(None if d != d else float(d))

        served = placement
        reoptimized = failed = False
        if policy is PolicyKind.RL_DYNAMIC:
            trigger = False
            # commit in service-id order
            for s in range(config.n_services):
                _, fired = observe_feedback(table, s, delays[s], thresholds[s], config, t)
                trigger |= fired
            rows = [(table[s].last_reward, table[s].q_value) for s in range(config.n_services)]
            if trigger:
                try:
                    sol = solve(problem)
                except Infeasible as exc:
                    log.debug("re-solve at t=%s infeasible: %s", t, exc)
                    failed = True
                else:
                    placement = sol.placement
                    table = initialize(table, sol, t)
                    reoptimized = True
        else:
            rows = [(0.0, 1.0)] * config.n_services

        # the tick reports the delay served under the placement that was active during it
        per_service = tuple(
            ServiceTick(served.host(s), snap.count(s), delays[s], thresholds[s], rows[s][0], rows[s][1])
            for s in range(config.n_services)
        )
        records.append(TickRecord(t, per_service, _edge_ticks(config, served), reoptimized, failed))
    return records


def demand_profile(config: ScenarioConfig, seed: int) -> DemandProfile:
    m = config.mobility
    return DemandProfile(
        config.n_services, m.churn_rate, seed,
        hotspot_radius=m.hotspot_radius, hotspot_speed=m.hotspot_speed,
        hotspot_floor=m.hotspot_floor, area=m.area,
    )


def trial_trace(config: ScenarioConfig, seed: int) -> list[TraceSample]:
    m = config.mobility
    return generate_synthetic(
        m.area, config.vehicle_count, config.horizon, config.monitor_interval, m.speed_range, seed
    )


@dataclass
class TrialResults:
    ticks: list[list[TickRecord]]
    summaries: list[TrialSummary]
    average: TrialSummary


def run_trials(
    config: ScenarioConfig,
    policy: PolicyKind,
    objective: ObjectiveKind,
    n_trials: int = 5,
    base_seed: int = 0,
    trace: Sequence[TraceSample] | None = None,
) -> TrialResults:
    """Run ``n_trials`` trials; trial k uses seed ``base_seed + k`` for mobility and demand.

    A fixed ``trace`` replaces synthetic mobility; demand is still reseeded per trial.
    """
    if n_trials < 1:
        raise ValueError("n_trials must be >= 1")
    index = TraceIndex(trace) if trace is not None else None
    ticks, summaries = [], []
    for k in range(n_trials):
        seed = base_seed + k
        tr = index if index is not None else TraceIndex(trial_trace(config, seed))
        records = run(config, tr, policy, objective, demand_profile(config, seed))
        ticks.append(records)
        summaries.append(summarize(records, config, policy.value, objective.value, k + 1))
    return TrialResults(ticks, summaries, average_summaries(summaries))
