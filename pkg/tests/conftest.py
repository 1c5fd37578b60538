import numpy as np
import pytest

from rlplace.config import default_config
from rlplace.domain import (
    DelayModelParams,
    DemandVector,
    EdgeNode,
    RequestSnapshot,
    ServiceRequest,
    ServiceSpec,
)
from rlplace.optimizer import ObjectiveKind, PlacementProblem

# the unit examples are stated for these coefficients, whatever the scenario default is
UNIT_DELAY = DelayModelParams(base_delay=1.0, access_coeff=1.0, backhaul_coeff=0.5)


@pytest.fixture
def cfg():
    return default_config()


def line_edges(xs, capacity=100.0, ue_limit=100):
    return tuple(EdgeNode(k, (float(x), 0.0), capacity, ue_limit) for k, x in enumerate(xs))


def snapshot(time, rows):
    """rows: (vehicle_id, x, y, service_id)"""
    return RequestSnapshot.from_requests(
        time, [ServiceRequest(v, (float(x), float(y)), time, s) for v, x, y, s in rows]
    )


def random_problem(rng, objective, n_s=6, n_e=6, zero_prob=0.15):
    """Instance drawn around the default scenario's parameter ranges."""
    services = tuple(
        ServiceSpec(s, float(rng.choice([20, 40, 50, 60, 70])), float(rng.choice([4.0, 4.5, 5.0, 5.5])))
        for s in range(n_s)
    )
    edges = tuple(
        EdgeNode(i, tuple(rng.uniform(0, 1732, 2)), float(rng.choice([60, 70, 80, 90, 100])), int(rng.integers(20, 101)))
        for i in range(n_e)
    )
    counts = [0 if rng.random() < zero_prob else int(rng.integers(1, 40)) for _ in range(n_s)]
    dm = rng.uniform(1.0, 6.5, size=(n_s, n_e))
    for s, c in enumerate(counts):
        if c == 0:
            dm[s] = np.nan
    return PlacementProblem(services, edges, DemandVector(tuple(counts)), dm, objective, 0.1)


ALL_OBJECTIVES = tuple(ObjectiveKind)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
