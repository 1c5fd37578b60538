import csv
from fractions import Fraction
import io
import math

from hypothesis import given, strategies as st
import numpy as np
import pytest

from rlplace.metrics import (
    AllZero,
    Empty,
    EmptyInput,
    MetricsError,
    MissingArm,
    TrialSummary,
    average_summaries,
    compare_report,
    delay_series_csv,
    jain_index,
    read_ticks_csv,
    summarize,
    summary_csv,
    ticks_csv,
)
from rlplace.sim import EdgeTick, ServiceTick, TickRecord

IDENTITY_RATIOS = [60 / 60, 20 / 60, 60 / 70, 40 / 80, 50 / 90, 70 / 100]


def identity_tick(cfg, t=1.0, delays=(2.0, 3.0, None, 4.0, 4.9, 5.6)):
    per_service = tuple(
        ServiceTick(s, 0 if d is None else 5, d, cfg.services[s].delay_threshold, 1.0, 1.0)
        for s, d in enumerate(delays)
    )
    per_edge = tuple(EdgeTick(i, IDENTITY_RATIOS[i]) for i in range(6))
    return TickRecord(t, per_service, per_edge)


def test_jain_equal_shares():
    for u in (0.1, 1.0, 7.3):
        assert jain_index([u] * 4) == 1.0


def test_jain_single_user():
    assert jain_index([1, 0, 0, 0, 0, 0]) == 1 / 6


def test_jain_identity_ratios():
    exact = Fraction(1545049, 1723209)
    v = [Fraction(60, 60), Fraction(20, 60), Fraction(60, 70), Fraction(40, 80), Fraction(50, 90), Fraction(70, 100)]
    assert sum(v) ** 2 / (6 * sum(x * x for x in v)) == exact
    assert jain_index(IDENTITY_RATIOS) == pytest.approx(float(exact), abs=1e-12)
    assert jain_index(IDENTITY_RATIOS) == pytest.approx(0.8966114963419991, abs=1e-12)


def test_jain_errors():
    with pytest.raises(Empty):
        jain_index([])
    with pytest.raises(AllZero):
        jain_index([0, 0, 0])
    with pytest.raises(MetricsError):
        jain_index([1, -1])


def test_jain_invariances_on_random_vectors():
    rng = np.random.default_rng(2024)
    for _ in range(1000):
        n = int(rng.integers(1, 20))
        v = rng.uniform(0, 1, n)
        v[rng.random(n) < 0.2] = 0.0
        if not v.any():
            v[0] = 0.5
        base = jain_index(v)
        c = float(rng.uniform(1e-3, 1e3))
        assert abs(jain_index(v * c) - base) <= 1e-12
        assert abs(jain_index(rng.permutation(v)) - base) <= 1e-12
        assert 1 / n - 1e-12 <= base <= 1 + 1e-12


@given(st.lists(st.floats(0, 1e6), min_size=1, max_size=30).filter(any))
def test_jain_bounds(v):
    j = jain_index(v)
    assert 1 / len(v) - 1e-12 <= j <= 1 + 1e-12


def test_summarize_single_identity_tick(cfg):
    s = summarize([identity_tick(cfg)], cfg, "static", "delay", 1)
    assert s.per_edge_mean_utilization == tuple(IDENTITY_RATIOS)
    assert s.jain_index == jain_index(IDENTITY_RATIOS)
    assert s.mean_utilization_pct == pytest.approx(100 * sum(IDENTITY_RATIOS) / 6, abs=1e-12)
    assert s.per_service_mean_delay == (2.0, 3.0, None, 4.0, 4.9, 5.6)
    # only service 5 breaches (5.6 >= 5.5)
    assert s.violation_ticks == 1 and s.per_service_violation_ticks == (0, 0, 0, 0, 0, 1)


def test_summarize_constant_sequence(cfg):
    one = summarize([identity_tick(cfg)], cfg)
    many = summarize([identity_tick(cfg, t) for t in range(1, 11)], cfg)
    assert many.per_edge_mean_utilization == pytest.approx(one.per_edge_mean_utilization, abs=1e-15)
    assert many.jain_index == pytest.approx(one.jain_index, abs=1e-12)
    assert many.per_service_mean_delay == pytest.approx(one.per_service_mean_delay, abs=1e-12)
    assert many.violation_ticks == 10 and many.ticks == 10


def test_no_demand_ticks_excluded_from_mean(cfg):
    a = identity_tick(cfg, 1.0, (2.0, 2.0, 2.0, 2.0, 2.0, 2.0))
    b = identity_tick(cfg, 2.0, (4.0, None, 2.0, 2.0, 2.0, 2.0))
    s = summarize([a, b], cfg)
    assert s.per_service_mean_delay[0] == 3.0
    assert s.per_service_mean_delay[1] == 2.0


def test_idle_edges_in_jain_not_in_mean(cfg):
    per_service = tuple(ServiceTick(s, 1, 1.0, 5.0, 1.0, 1.0) for s in range(2))
    per_edge = (EdgeTick(0, 0.5), EdgeTick(1, 1.0), EdgeTick(None, 0.0))
    from rlplace.config import from_dict

    c = from_dict({"resource_demand": [10, 10], "delay_threshold": [5, 5], "capacity": [20, 10, 30]})
    s = summarize([TickRecord(1.0, per_service, per_edge)], c)
    assert s.mean_utilization_pct == 75.0
    assert s.jain_index == pytest.approx(1.5**2 / (3 * 1.25))


def test_summarize_empty(cfg):
    with pytest.raises(EmptyInput):
        summarize([], cfg)
    with pytest.raises(EmptyInput):
        average_summaries([])


def _summary(policy, objective, trial, jain, util):
    return TrialSummary(policy, objective, trial, (1.0, None), (0.5, 0.5), jain, util, 0, 0, (0, 0), 10, 0)


def test_average_skips_missing_delays():
    a = TrialSummary("rl", "su", 1, (1.0, None), (0.2, 0.4), 0.9, 60.0, 2, 3, (1, 1), 10, 0)
    b = TrialSummary("rl", "su", 2, (3.0, 5.0), (0.4, 0.6), 0.7, 70.0, 4, 5, (2, 3), 10, 0)
    m = average_summaries([a, b])
    assert m.trial == "mean"
    assert m.per_service_mean_delay == (2.0, 5.0)
    assert m.per_edge_mean_utilization == pytest.approx((0.3, 0.5))
    assert m.jain_index == pytest.approx(0.8) and m.mean_utilization_pct == 65.0
    assert m.reopt_count == 4.0


def test_summary_csv_columns():
    text = summary_csv([_summary("rl", "su", 1, 0.9, 60.0)])
    rows = list(csv.reader(io.StringIO(text)))
    assert rows[0] == ["trial", "policy", "objective", "jain", "mean_util_pct",
                       "mean_delay_s0", "mean_delay_s1", "violations", "reopts"]
    assert rows[1][:3] == ["1", "rl", "su"] and rows[1][6] == ""


def test_ticks_csv_round_trip(cfg):
    ticks = [identity_tick(cfg, t) for t in (1.0, 2.0)]
    text = ticks_csv(ticks)
    assert text.splitlines()[0].split(",")[:5] == ["time", "service_id", "host", "requesters", "avg_delay_ms"]
    path = io.StringIO(text)
    import tempfile, os

    with tempfile.NamedTemporaryFile("w", suffix=".csv", delete=False) as fh:
        fh.write(path.getvalue())
    try:
        back = read_ticks_csv(fh.name, cfg)
    finally:
        os.unlink(fh.name)
    assert summarize(back, cfg) == summarize(ticks, cfg)


def test_delay_series_columns(cfg):
    text = delay_series_csv([identity_tick(cfg)])
    lines = text.splitlines()
    assert lines[0] == "time,service_id,avg_delay_ms,threshold_ms"
    assert lines[1] == "1.0,0,2.0,5.0"
    assert lines[3] == "1.0,2,,4.5"


def test_compare_report_full(tmp_path, cfg):
    arms = [("static", "delay"), ("rl", "delay"), ("static", "su"), ("rl", "su")]
    summaries = {a: [_summary(*a, k + 1, 0.8 + 0.01 * k, 60.0 + k) for k in range(5)] for a in arms}
    ticks = {a: [[identity_tick(cfg)] for _ in range(5)] for a in arms}
    res = compare_report(summaries, ticks, tmp_path, require=arms)
    assert len(res.fairness) == 6 and len(res.utilization) == 6
    assert res.fairness[-1][0] == "mean"
    assert res.fairness[-1][1] == pytest.approx(0.82)
    series = sorted(p.name for p in tmp_path.glob("delay_*.csv"))
    assert len(series) == 20
    assert "delay_rl_su_5.csv" in series
    header = (tmp_path / "fairness.csv").read_text().splitlines()[0]
    assert header == "trial,D-Opt Static,D-Opt RL-Dynamic,SU-Opt Static,SU-Opt RL-Dynamic"
    # paired arms share tick times
    a = (tmp_path / "delay_static_su_1.csv").read_text().splitlines()
    b = (tmp_path / "delay_rl_su_1.csv").read_text().splitlines()
    assert [x.split(",")[0] for x in a] == [x.split(",")[0] for x in b]


def test_compare_report_single_arm():
    res = compare_report({("rl", "su"): [_summary("rl", "su", 1, 0.9, 60.0)]})
    assert res.fairness[0] == [1, None, None, None, 0.9]
    with pytest.raises(MissingArm) as exc:
        compare_report({("rl", "su"): [_summary("rl", "su", 1, 0.9, 60.0)]}, require=[("static", "delay")])
    assert "static" in str(exc.value) and "delay" in str(exc.value)
    with pytest.raises(MissingArm):
        compare_report({})


def test_nan_jain_when_all_idle(cfg):
    per_edge = tuple(EdgeTick(None, 0.0) for _ in range(6))
    rec = TickRecord(1.0, (), per_edge)
    assert math.isnan(summarize([rec], cfg).jain_index)
