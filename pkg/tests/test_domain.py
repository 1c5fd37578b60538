from dataclasses import replace

from hypothesis import given, settings, strategies as st
import pytest

from rlplace import config as scenario_config
from rlplace.config import ConfigError, dumps, from_dict, loads, to_dict
from rlplace.domain import (
    DemandVector,
    EdgeNode,
    Placement,
    RequestSnapshot,
    ScenarioError,
    ServiceRequest,
    ServiceSpec,
    validate_scenario,
)


def test_defaults_match_reference_table(cfg):
    assert cfg.n_services == 6 and cfg.n_edges == 6 and cfg.vehicle_count == 100
    assert [s.resource_demand for s in cfg.services] == [60, 20, 60, 40, 50, 70]
    assert [e.capacity for e in cfg.edges] == [60, 60, 70, 80, 90, 100]
    assert [s.delay_threshold for s in cfg.services] == [5, 4, 4.5, 5, 5, 5.5]
    assert all(e.ue_limit == 100 for e in cfg.edges)
    assert (cfg.learning_rate, cfg.balance_offset, cfg.discount, cfg.violation_penalty) == (0.75, 0.1, 0.0, -10.0)
    assert cfg.ticks()[0] == 1.0 and cfg.ticks()[-1] == 500.0 and len(cfg.ticks()) == 500
    assert validate_scenario(cfg) is cfg


def test_alpha_zero_rejected(cfg):
    with pytest.raises(ScenarioError) as exc:
        validate_scenario(replace(cfg, learning_rate=0.0))
    assert exc.value.codes == ["AlphaOutOfRange"]


def test_alpha_one_accepted_gamma_one_rejected(cfg):
    validate_scenario(replace(cfg, learning_rate=1.0))
    with pytest.raises(ScenarioError) as exc:
        validate_scenario(replace(cfg, discount=1.0))
    assert "GammaOutOfRange" in exc.value.codes


def test_duplicate_service_id(cfg):
    services = list(cfg.services)
    services[2] = replace(services[2], id=3)
    with pytest.raises(ScenarioError) as exc:
        validate_scenario(replace(cfg, services=tuple(services)))
    assert exc.value.codes == ["DuplicateId"]
    assert "services[id=3]" in str(exc.value)


def test_empty_and_nonpositive_reported_together(cfg):
    bad = replace(cfg, services=(), edges=(replace(cfg.edges[0], capacity=0.0),))
    with pytest.raises(ScenarioError) as exc:
        validate_scenario(bad)
    assert set(exc.value.codes) == {"EmptyServices", "NonPositiveParameter"}
    with pytest.raises(ScenarioError) as exc:
        validate_scenario(replace(cfg, edges=()))
    assert "EmptyEdges" in exc.value.codes


def test_edge_outside_area(cfg):
    edges = list(cfg.edges)
    edges[0] = replace(edges[0], position=(-1.0, 10.0))
    with pytest.raises(ScenarioError) as exc:
        validate_scenario(replace(cfg, edges=tuple(edges)))
    assert exc.value.codes == ["OutOfBounds"]


def test_non_dense_ids(cfg):
    services = tuple(replace(s, id=s.id + 1) for s in cfg.services)
    with pytest.raises(ScenarioError) as exc:
        validate_scenario(replace(cfg, services=services))
    assert exc.value.codes == ["NonDenseIds"]


def test_placement_rejects_non_injective():
    with pytest.raises(ValueError):
        Placement((0, 1, 1))
    with pytest.raises(ValueError):
        Placement.from_mapping({0: 2, 1: 2})
    with pytest.raises(ValueError):
        Placement.from_mapping({0: 1, 2: 0})
    p = Placement.from_mapping({1: 0, 0: 3})
    assert p.hosts == (3, 0) and p.service_on(0) == 1 and p.service_on(5) is None
    assert p.as_dict() == {0: 3, 1: 0}


@given(st.lists(st.integers(0, 9), min_size=1, max_size=8))
def test_placement_injectivity_property(hosts):
    if len(set(hosts)) == len(hosts):
        assert Placement(tuple(hosts)).hosts == tuple(hosts)
    else:
        with pytest.raises(ValueError):
            Placement(tuple(hosts))


def test_snapshot_invariants():
    r = ServiceRequest("v0", (0.0, 0.0), 2.0, 1)
    with pytest.raises(ValueError):
        RequestSnapshot(1.0, {1: (r,)})
    with pytest.raises(ValueError):
        RequestSnapshot(2.0, {0: (r,)})
    with pytest.raises(ValueError):
        RequestSnapshot(2.0, {1: (r, r)})
    snap = RequestSnapshot.from_requests(2.0, [r, ServiceRequest("v1", (1.0, 1.0), 2.0, 1)])
    assert snap.count(1) == 2 and snap.count(0) == 0 and len(snap) == 2
    assert snap.demand(3) == DemandVector((0, 2, 0))


def test_demand_vector_nonnegative():
    with pytest.raises(ValueError):
        DemandVector((1, -1))
    assert DemandVector((3, 4)).total == 7


def test_empty_config_file_is_default(cfg):
    assert loads("") == cfg
    assert loads("{}") == cfg


def test_config_unknown_key():
    with pytest.raises(ConfigError):
        from_dict({"learning_rte": 0.5})
    with pytest.raises(ConfigError):
        from_dict({"delay": {"kappa": 1}})


def test_config_shorthand_and_explicit_positions():
    c = from_dict({"capacity": [70, 80], "ue_limit": [5, 6], "resource_demand": [10, 20], "delay_threshold": 3})
    assert [e.ue_limit for e in c.edges] == [5, 6]
    assert [s.delay_threshold for s in c.services] == [3.0, 3.0]
    c2 = from_dict({"edges": [{"id": 0, "position": [10, 20], "capacity": 50}]})
    assert c2.edges == (EdgeNode(0, (10.0, 20.0), 50.0, 100),)


def _configs():
    return st.builds(
        lambda n, alpha, beta, vc, bc: from_dict({
            "resource_demand": [10.0 * (k + 1) for k in range(n)],
            "delay_threshold": [4.0 + 0.5 * k for k in range(n)],
            "capacity": [100.0] * n,
            "learning_rate": alpha,
            "balance_offset": beta,
            "vehicle_count": vc,
            "delay": {"backhaul_coeff": bc},
        }),
        st.integers(1, 6),
        st.floats(0.01, 1.0),
        st.floats(0.001, 5.0),
        st.integers(1, 500),
        st.floats(0.0, 10.0),
    )


@settings(max_examples=50, deadline=None)
@given(_configs())
def test_config_round_trip(c):
    assert loads(dumps(c)) == c
    assert from_dict(to_dict(c)) == c


def test_config_file_round_trip(tmp_path, cfg):
    path = tmp_path / "scenario.yaml"
    scenario_config.dump(cfg, path)
    assert scenario_config.load(path) == cfg


def test_service_spec_fields():
    s = ServiceSpec(0, 60.0, 5.0)
    assert (s.resource_demand, s.delay_threshold) == (60.0, 5.0)
