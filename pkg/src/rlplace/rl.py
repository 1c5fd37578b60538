"""Per-service Q-table that decides when the placement must be recomputed.

The controller never explores: it keeps the optimizer's placement, scores
delay feedback each monitoring tick, and asks for a fresh global solve when a
service's Q-value drops on two consecutive updates or its delay breaks the
threshold.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from .domain import ScenarioConfig
from .optimizer import PlacementSolution

REWARD_DECREASED = 1.0
REWARD_INCREASED = 0.5
TRIGGER_AFTER = 2


class UnknownService(KeyError):
    pass


class InfeasibleSolution(ValueError):
    pass


@dataclass(frozen=True)
class QRecord:
    service_id: int
    action: int  # edge currently hosting the service
    q_value: float = 1.0
    last_reward: float = 0.0
    prev_feedback_delay: float = 0.0  # ms
    consecutive_decrements: int = 0


@dataclass
class QTable:
    records: dict[int, QRecord] = field(default_factory=dict)
    last_update_time: float = 0.0

    def __getitem__(self, service_id: int) -> QRecord:
        try:
            return self.records[service_id]
        except KeyError:
            raise UnknownService(service_id) from None

    def __len__(self) -> int:
        return len(self.records)

    def rows(self) -> list[tuple[int, int, float, float, int]]:
        """``(service_id, action, q, reward, counter)`` per service, in id order."""
        return [
            (r.service_id, r.action, r.q_value, r.last_reward, r.consecutive_decrements)
            for _, r in sorted(self.records.items())
        ]


def reward(prev_delay: float, curr_delay: float | None, threshold: float, penalty: float = -10.0) -> float:
    """Score the latest delay feedback against the previous one.

    A stable delay counts as a decrease. ``curr_delay=None`` (nobody asked for
    the service) scores as a decrease to zero.
    """
    if threshold <= 0:
        raise ValueError("threshold must be positive")
    if curr_delay is None:
        return REWARD_DECREASED
    if curr_delay >= threshold:
        return penalty
    if prev_delay >= curr_delay:
        return REWARD_DECREASED
    return REWARD_INCREASED


def q_update(old_q: float, reward_value: float, max_future_q: float, alpha: float, gamma: float) -> float:
    if not 0 < alpha <= 1:
        raise ValueError(f"alpha must lie in (0, 1], got {alpha}")
    if not 0 <= gamma < 1:
        raise ValueError(f"gamma must lie in [0, 1), got {gamma}")
    return alpha * reward_value + gamma * max_future_q + (1 - alpha) * old_q


def observe_feedback(
    table: QTable,
    service_id: int,
    curr_delay: float | None,
    threshold: float,
    config: ScenarioConfig,
    time: float | None = None,
) -> tuple[QRecord, bool]:
    """Apply one feedback observation; returns the stored record and whether to re-optimize."""
    rec = table[service_id]
    r = reward(rec.prev_feedback_delay, curr_delay, threshold, config.violation_penalty)
    # no next-state enumeration exists; the service's own current value stands in (irrelevant at gamma=0)
    new_q = q_update(rec.q_value, r, rec.q_value, config.learning_rate, config.discount)
    counter = rec.consecutive_decrements + 1 if new_q < rec.q_value else 0
    violated = curr_delay is not None and curr_delay >= threshold
    trigger = counter >= TRIGGER_AFTER or violated
    if counter >= TRIGGER_AFTER:
        counter = 0
    rec = replace(
        rec,
        q_value=new_q,
        last_reward=r,
        prev_feedback_delay=0.0 if curr_delay is None else curr_delay,
        consecutive_decrements=counter,
    )
    table.records[service_id] = rec
    if time is not None:
        table.last_update_time = time
    return rec, trigger


def initialize(table: QTable | None, solution: PlacementSolution, time: float) -> QTable:
    """Seed (or refresh) one record per service from a feasible solution.

    Every record gets q = 1 (its decision-matrix entry), a zero reward and
    counter, and the solution's delay as the baseline for the next reward.
    """
    if not solution.feasible or solution.placement is None:
        raise InfeasibleSolution("cannot build a Q-table from an infeasible solution")
    records = dict(table.records) if table is not None else {}
    for s, host in enumerate(solution.placement.hosts):
        delay = solution.service_delays[s] if s < len(solution.service_delays) else None
        records[s] = QRecord(
            service_id=s,
            action=host,
            q_value=1.0,
            last_reward=0.0,
            prev_feedback_delay=0.0 if delay is None else delay,
            consecutive_decrements=0,
        )
    return QTable(records, time)
