from fractions import Fraction

from hypothesis import given, strategies as st
import pytest

from rlplace.domain import Placement
from rlplace.optimizer import ConstraintReport, PlacementSolution
from rlplace.rl import (
    InfeasibleSolution,
    QRecord,
    QTable,
    UnknownService,
    initialize,
    observe_feedback,
    q_update,
    reward,
)


def solution(hosts, delays=None):
    delays = delays if delays is not None else tuple(2.0 for _ in hosts)
    return PlacementSolution(Placement(tuple(hosts)), 0.0, True, ConstraintReport(), tuple(delays))


def fresh(cfg, prev=3.0, q=1.0):
    return QTable({0: QRecord(0, 0, q_value=q, prev_feedback_delay=prev)})


@pytest.mark.parametrize(
    "prev, curr, expected",
    [(3, 2, 1.0), (2, 3, 0.5), (3, 5.5, -10.0), (2, 2, 1.0)],
)
def test_reward_cases(prev, curr, expected):
    assert reward(prev, curr, 5, -10) == expected


def test_reward_at_threshold_is_violation():
    assert reward(4.0, 5.0, 5.0) == -10.0
    assert reward(6.0, 5.0, 5.0, penalty=-3) == -3


def test_reward_no_demand():
    assert reward(3.0, None, 5.0) == 1.0


def test_reward_rejects_bad_threshold():
    with pytest.raises(ValueError):
        reward(1, 1, 0)


def test_q_update_examples():
    assert q_update(0, 1, 123.0, 0.75, 0) == 0.75
    assert q_update(1, 1, 123.0, 0.75, 0) == 1.0
    assert q_update(1, -10, 123.0, 0.75, 0) == -7.25


def test_q_update_with_discount():
    assert q_update(1, 1, 2.0, 0.5, 0.5) == pytest.approx(0.5 + 1.0 + 0.5)


def test_q_update_ranges():
    with pytest.raises(ValueError):
        q_update(1, 1, 1, 0.0, 0)
    with pytest.raises(ValueError):
        q_update(1, 1, 1, 0.5, 1.0)


def test_two_increases_trigger_on_second(cfg):
    table = fresh(cfg, prev=2.0)
    rec, trig = observe_feedback(table, 0, 2.5, 5.0, cfg)
    # 0.75 * 0.5 + 0.25 * 1
    assert rec.q_value == 0.625 and rec.consecutive_decrements == 1 and not trig
    rec, trig = observe_feedback(table, 0, 3.0, 5.0, cfg)
    # 0.75 * 0.5 + 0.25 * 0.625
    assert rec.q_value == 0.53125 and trig
    assert rec.consecutive_decrements == 0
    assert rec.prev_feedback_delay == 3.0 and rec.last_reward == 0.5


def test_sequence_matches_exact_rationals(cfg):
    table = fresh(cfg, prev=1.0)
    q = Fraction(1)
    alpha = Fraction(3, 4)
    for d in (1.5, 2.0, 1.0, 1.0, 4.0, 3.0):
        rec, _ = observe_feedback(table, 0, d, 5.0, cfg)
        r = Fraction(rec.last_reward)
        q = alpha * r + (1 - alpha) * q
        assert rec.q_value == float(q)


def test_violation_triggers_immediately(cfg):
    table = fresh(cfg, prev=3.0)
    rec, trig = observe_feedback(table, 0, 5.2, 5.0, cfg, time=7.0)
    assert trig
    assert rec.q_value == 0.75 * -10 + 0.25 * 1.0
    assert rec.last_reward == -10.0
    assert table.last_update_time == 7.0


def test_violation_triggers_regardless_of_counter(cfg):
    table = QTable({0: QRecord(0, 0, q_value=0.5, prev_feedback_delay=1.0, consecutive_decrements=0)})
    # q rising from 0.5 towards 1 does not count as a decrement
    rec, trig = observe_feedback(table, 0, 0.5, 5.0, cfg)
    assert rec.consecutive_decrements == 0 and not trig
    _, trig = observe_feedback(table, 0, 9.0, 5.0, cfg)
    assert trig


def test_alternating_never_triggers(cfg):
    table = QTable({0: QRecord(0, 0, q_value=0.9, prev_feedback_delay=2.0)})
    triggers = []
    for d in (2.5, 2.0, 2.5, 2.0):
        rec, trig = observe_feedback(table, 0, d, 5.0, cfg)
        triggers.append(trig)
        assert rec.consecutive_decrements in (0, 1)
    assert triggers == [False] * 4


def test_unknown_service(cfg):
    with pytest.raises(UnknownService):
        observe_feedback(QTable(), 3, 1.0, 5.0, cfg)


def test_initialize_sets_q_to_one():
    table = initialize(None, solution((2, 0, 1, 5, 4, 3), (1.0, 2.0, None, 3.0, 4.0, 5.0)), 1.0)
    assert len(table) == 6
    assert all(r.q_value == 1.0 and r.consecutive_decrements == 0 and r.last_reward == 0.0 for r in table.records.values())
    assert [table[s].action for s in range(6)] == [2, 0, 1, 5, 4, 3]
    assert table[2].prev_feedback_delay == 0.0 and table[3].prev_feedback_delay == 3.0
    assert table.rows()[0] == (0, 2, 1.0, 0.0, 0)


def test_reinitialize_refreshes_records(cfg):
    table = initialize(None, solution((0, 1)), 1.0)
    observe_feedback(table, 0, 2.5, 5.0, cfg)
    observe_feedback(table, 1, 9.0, 5.0, cfg)
    table = initialize(table, solution((1, 0), (1.5, 1.7)), 2.0)
    assert table[0].action == 1 and table[1].action == 0
    assert table[0].q_value == table[1].q_value == 1.0
    assert table[0].consecutive_decrements == 0
    assert table[0].prev_feedback_delay == 1.5 and table.last_update_time == 2.0


def test_initialize_empty_and_infeasible():
    assert len(initialize(None, solution(()), 0.0)) == 0
    bad = PlacementSolution(None, float("inf"), False, ConstraintReport({"capacity": ((0, None),)}))
    with pytest.raises(InfeasibleSolution):
        initialize(None, bad, 0.0)


@given(
    st.floats(-5, 5),
    st.lists(st.sampled_from([0.5, 1.0]), max_size=40),
)
def test_boundedness_without_violations(q0, rewards):
    q = q0
    for r in rewards:
        q = q_update(q, r, q, 0.75, 0.0)
        assert min(q0, 0.5) - 1e-12 <= q <= max(q0, 1.0) + 1e-12


@given(st.floats(-20, 20), st.sampled_from([0.5, 1.0, -10.0]), st.integers(0, 30), st.sampled_from([0.25, 0.5, 0.75, 1.0]))
def test_convergence_rate(q0, r, t, alpha):
    q = q0
    for _ in range(t):
        q = q_update(q, r, q, alpha, 0.0)
    assert abs(q - r) == pytest.approx((1 - alpha) ** t * abs(q0 - r), rel=1e-9, abs=1e-9)
