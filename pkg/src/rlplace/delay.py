"""Per-vehicle and per-service access delay under a two-hop distance model."""

from __future__ import annotations

from collections.abc import Sequence
import math

import numpy as np

from .domain import DelayModelParams, EdgeNode, RequestSnapshot, ServiceRequest

M_PER_KM = 1000.0


def _dist_km(a, b) -> float:
    return math.hypot(a[0] - b[0], a[1] - b[1]) / M_PER_KM


def nearest_edge(location, edges: Sequence[EdgeNode]) -> EdgeNode:
    # ties go to the lowest id
    return min(edges, key=lambda e: (_dist_km(location, e.position), e.id))


def vehicle_delay(
    request: ServiceRequest,
    host: EdgeNode,
    edges: Sequence[EdgeNode],
    params: DelayModelParams,
) -> float:
    """Delay in ms seen by one vehicle whose service runs on ``host``."""
    if not edges:
        raise ValueError("edges must be non-empty")
    if params.direct_distance:
        return params.base_delay + params.access_coeff * _dist_km(request.location, host.position)
    attach = nearest_edge(request.location, edges)
    return (
        params.base_delay
        + params.access_coeff * _dist_km(request.location, attach.position)
        + params.backhaul_coeff * _dist_km(attach.position, host.position)
    )


def average_service_delay(
    snapshot: RequestSnapshot,
    service_id: int,
    host: EdgeNode,
    edges: Sequence[EdgeNode],
    params: DelayModelParams,
) -> float | None:
    """Mean delay over the requesters of ``service_id``; ``None`` when nobody asks for it."""
    reqs = snapshot.requests(service_id)
    if not reqs:
        return None
    return sum(vehicle_delay(r, host, edges, params) for r in reqs) / len(reqs)


def delay_matrix(
    snapshot: RequestSnapshot,
    n_services: int,
    edges: Sequence[EdgeNode],
    params: DelayModelParams,
) -> np.ndarray:
    """Average delay for every (service, host) pair, vectorized.

    Rows of services without requesters are NaN.
    """
    out = np.full((n_services, len(edges)), np.nan)
    if not edges:
        return out
    epos = np.array([e.position for e in edges], dtype=float)
    # edges are not assumed sorted by id; argmin must break ties by id
    order = np.argsort([e.id for e in edges], kind="stable")
    epos_sorted = epos[order]
    hop = np.linalg.norm(epos_sorted[:, None, :] - epos_sorted[None, :, :], axis=2) / M_PER_KM
    for s in range(n_services):
        reqs = snapshot.requests(s)
        if not reqs:
            continue
        vpos = np.array([r.location for r in reqs], dtype=float)
        to_edge = np.linalg.norm(vpos[:, None, :] - epos_sorted[None, :, :], axis=2) / M_PER_KM
        if params.direct_distance:
            per_vehicle = params.base_delay + params.access_coeff * to_edge
        else:
            attach = np.argmin(to_edge, axis=1)
            access = to_edge[np.arange(len(reqs)), attach]
            per_vehicle = (
                params.base_delay
                + params.access_coeff * access[:, None]
                + params.backhaul_coeff * hop[attach]
            )
        out[s, order] = per_vehicle.mean(axis=0)
    return out
