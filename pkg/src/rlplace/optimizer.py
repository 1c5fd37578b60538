"""Exact service-to-edge placement under the delay or utilization objective.

Every constraint is either structural (each service on one edge, at most one
service per edge) or a per-pair admissibility test (delay under threshold,
resource fit, UE limit), so the problem is a rectangular assignment with
forbidden pairs. ``solve`` runs depth-first branch-and-bound in lexicographic
order with a min-cost-matching bound; ``brute_force_solve`` enumerates every
injective assignment and is kept as an independent oracle.
"""

from __future__ import annotations

from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
import enum
import itertools
import math

import numpy as np
from scipy.optimize import linear_sum_assignment

from .delay import delay_matrix as compute_delay_matrix
from .domain import (
    DelayModelParams,
    DemandVector,
    EdgeNode,
    Placement,
    RequestSnapshot,
    ServiceSpec,
)

BRUTE_FORCE_LIMIT = 8

C_SINGLE_HOST = "single_host"
C_UNIQUE = "unique_service"
C_DELAY = "delay_threshold"
C_CAPACITY = "capacity"
C_UE_LIMIT = "ue_limit"
CONSTRAINTS = (C_SINGLE_HOST, C_UNIQUE, C_DELAY, C_CAPACITY, C_UE_LIMIT)


class ObjectiveKind(enum.Enum):
    D_OPT = "delay"
    SU_OPT = "su"


class PlacementError(Exception):
    pass


class DimensionMismatch(PlacementError):
    pass


class UnknownService(PlacementError):
    pass


class UnknownEdge(PlacementError):
    pass


class TooLarge(PlacementError):
    pass


class Infeasible(PlacementError):
    """No placement satisfies the constraints; ``solution.report`` says why."""

    def __init__(self, solution: PlacementSolution):
        self.solution = solution
        super().__init__(solution.report.summary())


@dataclass(frozen=True)
class ConstraintReport:
    """Per-constraint outcome. ``failures[name]`` lists offending (service, edge) pairs.

    An edge of ``None`` means the failure is not tied to a single pair.
    """

    failures: Mapping[str, tuple[tuple[int, int | None], ...]] = field(default_factory=dict)
    note: str = ""

    def passed(self, constraint: str) -> bool:
        return not self.failures.get(constraint)

    @property
    def feasible(self) -> bool:
        return all(self.passed(c) for c in CONSTRAINTS)

    @property
    def first_failure(self) -> str | None:
        for c in CONSTRAINTS:
            if not self.passed(c):
                return c
        return None

    def summary(self) -> str:
        if self.feasible:
            return "feasible"
        parts = [f"{c}: {list(self.failures[c])}" for c in CONSTRAINTS if not self.passed(c)]
        msg = "infeasible; " + "; ".join(parts)
        return f"{msg} ({self.note})" if self.note else msg


@dataclass(frozen=True)
class PlacementProblem:
    services: tuple[ServiceSpec, ...]
    edges: tuple[EdgeNode, ...]
    demand: DemandVector
    delay_matrix: np.ndarray  # ms, (n_services, n_edges); NaN rows mean no requesters
    objective: ObjectiveKind
    balance_offset: float = 0.1
    snapshot: RequestSnapshot | None = None

    def __post_init__(self):
        dm = np.asarray(self.delay_matrix, dtype=float)
        object.__setattr__(self, "delay_matrix", dm)
        n_s, n_e = len(self.services), len(self.edges)
        if dm.shape != (n_s, n_e):
            raise DimensionMismatch(f"delay matrix is {dm.shape}, expected {(n_s, n_e)}")
        if len(self.demand) != n_s:
            raise DimensionMismatch(f"demand has {len(self.demand)} entries for {n_s} services")
        if [s.id for s in self.services] != list(range(n_s)):
            raise DimensionMismatch("service ids must be 0..n-1 in order")
        if [e.id for e in self.edges] != list(range(n_e)):
            raise DimensionMismatch("edge ids must be 0..n-1 in order")

    @classmethod
    def from_snapshot(
        cls,
        services: Sequence[ServiceSpec],
        edges: Sequence[EdgeNode],
        snapshot: RequestSnapshot,
        objective: ObjectiveKind,
        balance_offset: float = 0.1,
        delay_params: DelayModelParams | None = None,
    ) -> PlacementProblem:
        params = delay_params or DelayModelParams()
        dm = compute_delay_matrix(snapshot, len(services), edges, params)
        return cls(
            tuple(services),
            tuple(edges),
            snapshot.demand(len(services)),
            dm,
            objective,
            balance_offset,
            snapshot,
        )

    @property
    def n_services(self) -> int:
        return len(self.services)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def utilization(self) -> np.ndarray:
        """Resource ratio R_s / C_i for every pair."""
        r = np.array([s.resource_demand for s in self.services], dtype=float)
        c = np.array([e.capacity for e in self.edges], dtype=float)
        return r[:, None] / c[None, :]

    def cost_matrix(self) -> np.ndarray:
        """Objective contribution of placing service s on edge i."""
        if self.objective is ObjectiveKind.D_OPT:
            # services nobody requests cost nothing
            return np.nan_to_num(self.delay_matrix, nan=0.0)
        weight = np.array(self.demand.count_by_service, dtype=float) + self.balance_offset
        return self.utilization() * weight[:, None]

    def pair_checks(self) -> dict[str, np.ndarray]:
        """Boolean (n_services, n_edges) masks for the per-pair constraints."""
        thresholds = np.array([s.delay_threshold for s in self.services], dtype=float)
        r = np.array([s.resource_demand for s in self.services], dtype=float)
        c = np.array([e.capacity for e in self.edges], dtype=float)
        u = np.array(self.demand.count_by_service, dtype=float)
        n = np.array([e.ue_limit for e in self.edges], dtype=float)
        no_demand = np.isnan(self.delay_matrix)
        with np.errstate(invalid="ignore"):
            delay_ok = no_demand | (self.delay_matrix < thresholds[:, None])
        return {
            C_DELAY: delay_ok,
            C_CAPACITY: r[:, None] <= c[None, :],
            C_UE_LIMIT: u[:, None] <= n[None, :],
        }

    def allowed(self) -> np.ndarray:
        checks = self.pair_checks()
        return checks[C_DELAY] & checks[C_CAPACITY] & checks[C_UE_LIMIT]


@dataclass(frozen=True)
class PlacementSolution:
    placement: Placement | None
    objective_value: float
    feasible: bool
    report: ConstraintReport
    service_delays: tuple[float | None, ...] = ()  # ms under the chosen hosts; None = no requesters
    examined: int = 0  # leaves (brute force) or search nodes (branch-and-bound)


def _hosts_of(problem: PlacementProblem, placement: Placement | Mapping[int, int]) -> dict[int, int]:
    hosts = placement.as_dict() if isinstance(placement, Placement) else dict(placement)
    for s, i in hosts.items():
        if not 0 <= s < problem.n_services:
            raise UnknownService(f"service {s} is not in the problem")
        if not 0 <= i < problem.n_edges:
            raise UnknownEdge(f"edge {i} is not in the problem")
    return hosts


def objective_value(problem: PlacementProblem, placement: Placement | Mapping[int, int]) -> float:
    hosts = _hosts_of(problem, placement)
    cost = problem.cost_matrix()
    total = 0.0
    # summation order (by service id) is shared with the solvers so equal placements compare exactly
    for s in range(problem.n_services):
        if s in hosts:
            total += float(cost[s, hosts[s]])
    return total


def check_feasibility(problem: PlacementProblem, placement: Placement | Mapping[int, int]) -> ConstraintReport:
    hosts = _hosts_of(problem, placement)
    failures: dict[str, list[tuple[int, int | None]]] = {c: [] for c in CONSTRAINTS}
    for s in range(problem.n_services):
        if s not in hosts:
            failures[C_SINGLE_HOST].append((s, None))
    by_edge: dict[int, list[int]] = {}
    for s, i in sorted(hosts.items()):
        by_edge.setdefault(i, []).append(s)
    for i, ss in sorted(by_edge.items()):
        if len(ss) > 1:
            failures[C_UNIQUE].extend((s, i) for s in ss)
    checks = problem.pair_checks()
    for name in (C_DELAY, C_CAPACITY, C_UE_LIMIT):
        for s, i in sorted(hosts.items()):
            if not checks[name][s, i]:
                failures[name].append((s, i))
    return ConstraintReport({c: tuple(v) for c, v in failures.items()})


def service_delays(problem: PlacementProblem, placement: Placement) -> tuple[float | None, ...]:
    out = []
    for s, i in enumerate(placement.hosts):
        d = problem.delay_matrix[s, i]
        out.append(None if math.isnan(d) else float(d))
    return tuple(out)


def diagnose_infeasibility(problem: PlacementProblem) -> ConstraintReport:
    """Name the first constraint that rules out every placement."""
    n_s, n_e = problem.n_services, problem.n_edges
    if n_s > n_e:
        return ConstraintReport(
            {C_UNIQUE: tuple((s, None) for s in range(n_e, n_s))},
            note=f"{n_s} services cannot sit on {n_e} edges one-to-one",
        )
    checks = problem.pair_checks()
    order = (C_DELAY, C_CAPACITY, C_UE_LIMIT)
    for s in range(n_s):
        for name in order:
            if not checks[name][s].any():
                return ConstraintReport({name: ((s, None),)}, note=f"no edge admits service {s}")
    for s in range(n_s):
        remaining = np.ones(n_e, dtype=bool)
        for name in order:
            remaining &= checks[name][s]
            if not remaining.any():
                return ConstraintReport(
                    {name: ((s, None),)}, note=f"no single edge meets every limit of service {s}"
                )
    return ConstraintReport(
        {C_UNIQUE: tuple((s, None) for s in range(n_s))},
        note="admissible edges exist per service but no one-to-one matching covers them all",
    )


def _infeasible(problem: PlacementProblem, examined: int) -> Infeasible:
    report = diagnose_infeasibility(problem)
    return Infeasible(PlacementSolution(None, math.inf, False, report, examined=examined))


def _finish(problem: PlacementProblem, hosts: Sequence[int], value: float, examined: int) -> PlacementSolution:
    placement = Placement(tuple(hosts))
    report = check_feasibility(problem, placement)
    return PlacementSolution(placement, value, report.feasible, report, service_delays(problem, placement), examined)


_BIG = 1e12


def _matching_bound(cost: np.ndarray, allowed: np.ndarray, rows: range, free: list[int]) -> float:
    """Cheapest completion of ``rows`` onto ``free`` edges; inf if none is admissible."""
    if len(rows) == 0:
        return 0.0
    if len(rows) > len(free):
        return math.inf
    sub_allowed = allowed[rows.start:, free]
    sub = np.where(sub_allowed, cost[rows.start:, free], _BIG)
    r, c = linear_sum_assignment(sub)
    if not sub_allowed[r, c].all():
        return math.inf
    return float(sub[r, c].sum())


def solve(problem: PlacementProblem) -> PlacementSolution:
    """Minimum-objective feasible placement; ties go to the lexicographically smallest host vector.

    Raises Infeasible when no placement satisfies every constraint.
    """
    n_s, n_e = problem.n_services, problem.n_edges
    if n_s > n_e:
        raise _infeasible(problem, 0)
    cost = problem.cost_matrix()
    allowed = problem.allowed()
    cost_rows = [[float(x) for x in row] for row in cost]
    allowed_rows = allowed.tolist()

    best_value = math.inf
    best_hosts: list[int] | None = None
    nodes = 0
    used = [False] * n_e
    hosts: list[int] = []

    def slack(value: float) -> float:
        return 1e-9 * (1.0 + abs(value))

    def dfs(s: int, partial: float) -> None:
        nonlocal best_value, best_hosts, nodes
        nodes += 1
        if s == n_s:
            if partial < best_value:
                best_value, best_hosts = partial, list(hosts)
            return
        for i in range(n_e):
            if used[i] or not allowed_rows[s][i]:
                continue
            value = partial + cost_rows[s][i]
            used[i] = True
            free = [j for j in range(n_e) if not used[j]]
            bound = value + _matching_bound(cost, allowed, range(s + 1, n_s), free)
            # only prune when no leaf below can be strictly better than the incumbent
            if bound < math.inf and not (best_value < math.inf and bound >= best_value + slack(best_value)):
                hosts.append(i)
                dfs(s + 1, value)
                hosts.pop()
            used[i] = False

    if _matching_bound(cost, allowed, range(0, n_s), list(range(n_e))) < math.inf:
        dfs(0, 0.0)
    if best_hosts is None:
        raise _infeasible(problem, nodes)
    return _finish(problem, best_hosts, best_value, nodes)


def _pair_terms(problem: PlacementProblem) -> tuple[list[list[bool]], list[list[float]]]:
    """Admissibility and cost per pair, derived from the raw fields one scalar at a time.

    Deliberately independent of ``pair_checks`` and ``cost_matrix`` so the
    enumeration below checks the solver rather than sharing its inputs.
    """
    ok, cost = [], []
    for svc in problem.services:
        s = svc.id
        demand = problem.demand[s]
        ok_row, cost_row = [], []
        for edge in problem.edges:
            d = float(problem.delay_matrix[s, edge.id])
            requested = not math.isnan(d)
            ok_row.append(
                (not requested or d < svc.delay_threshold)
                and svc.resource_demand <= edge.capacity
                and demand <= edge.ue_limit
            )
            if problem.objective is ObjectiveKind.D_OPT:
                cost_row.append(d if requested else 0.0)
            else:
                cost_row.append((svc.resource_demand / edge.capacity) * (demand + problem.balance_offset))
        ok.append(ok_row)
        cost.append(cost_row)
    return ok, cost


def brute_force_solve(problem: PlacementProblem) -> PlacementSolution:
    """Enumerate every injective assignment; same tie-break as ``solve``."""
    n_s, n_e = problem.n_services, problem.n_edges
    if n_s > BRUTE_FORCE_LIMIT:
        raise TooLarge(f"{n_s} services exceeds the enumeration limit of {BRUTE_FORCE_LIMIT}")
    ok, cost = _pair_terms(problem)
    best_value = math.inf
    best_hosts = None
    examined = 0
    # permutations() yields in lexicographic order, so keeping the first strict minimum is the tie-break
    for hosts in itertools.permutations(range(n_e), n_s):
        examined += 1
        if not all(ok[s][i] for s, i in enumerate(hosts)):
            continue
        value = 0.0
        for s, i in enumerate(hosts):
            value += cost[s][i]
        if value < best_value:
            best_value, best_hosts = value, hosts
    if best_hosts is None:
        raise _infeasible(problem, examined)
    return _finish(problem, best_hosts, best_value, examined)
