import json

import numpy as np
import pytest

from isingfourier.core import Graph
from isingfourier.experiments import (
    ConfigError, ExperimentConfig, make_decision, make_model, montecarlo, recovery,
    replication_seeds, run_replication, simulate, summarize,
)


def test_defaults_match_protocol():
    cfg = ExperimentConfig()
    assert (cfg.n, cfg.m, cfg.p_edge, cfg.theta, cfg.gamma) == (35, 100, 0.05, 3.0, 0.25)
    f = make_decision(cfg)
    assert f.a0 == -0.6 and f.weights == (1 / 35,) * 35 and f.domain == "01"


@pytest.mark.parametrize("field,value,match", [
    ("p_edge", 1.5, "p_edge"), ("replications", 0, "replications"), ("n", 0, "n"),
    ("rho_grid", [2.0], "rho_grid"), ("a0_grid", [], "a0_grid"), ("domain", "x", "domain"),
    ("edges", [[0, 0]], "edges"),
])
def test_invalid_fields_named(field, value, match):
    with pytest.raises(ConfigError, match=match):
        ExperimentConfig.from_dict({field: value})


def test_unknown_field_rejected(tmp_path):
    with pytest.raises(ConfigError, match="bogus: unknown field"):
        ExperimentConfig.from_dict({"bogus": 1})
    p = tmp_path / "c.json"
    p.write_text("{not json")
    with pytest.raises(ConfigError, match="invalid JSON"):
        ExperimentConfig.from_json(p)


def test_config_round_trip_and_digest():
    cfg = ExperimentConfig(seed=5, n=10)
    back = ExperimentConfig.from_dict(json.loads(json.dumps(cfg.to_dict())))
    assert back == cfg and back.digest() == cfg.digest()
    assert ExperimentConfig(seed=6).digest() != ExperimentConfig(seed=5).digest()


def test_simulate_shape_and_determinism():
    cfg = ExperimentConfig(seed=3)
    m1, d1 = simulate(cfg)
    m2, d2 = simulate(cfg)
    assert d1.rows.shape == (100, 35) and d1.source_domain == "01"
    np.testing.assert_array_equal(d1.rows, d2.rows)
    assert m1.graph == m2.graph


def test_no_edges_means_independent():
    model = make_model(ExperimentConfig(p_edge=0.0), rng=0)
    assert model.graph.edges == () and np.all(model.interactions == 0)


def test_explicit_edges_and_incident_thresholds():
    cfg = ExperimentConfig(n=4, edges=[[0, 1], [1, 2]], theta=2.0)
    model = make_model(cfg)
    assert model.graph == Graph(4, ((0, 1), (1, 2)))
    np.testing.assert_allclose(model.thresholds, [-1.0, -2.0, -1.0, 0.0])


def test_recovery_metrics():
    true = Graph(4, ((0, 1), (1, 2), (2, 3)))
    est = Graph(4, ((0, 1), (0, 3)))
    assert recovery(true, est) == (0.5, pytest.approx(1 / 3))
    p, r = recovery(true, Graph(4))
    assert np.isnan(p) and r == 0.0


def test_replication_reproducible():
    cfg = ExperimentConfig(n=10, m=60, seed=1)
    s1, s2 = replication_seeds(cfg, 2), replication_seeds(cfg, 2)
    a = run_replication(cfg, 2.0, s1[0])
    b = run_replication(cfg, 2.0, s2[0])
    assert a.precision == b.precision or (np.isnan(a.precision) and np.isnan(b.precision))
    assert a.fourier_mad == b.fourier_mad
    assert not np.array_equal(replication_seeds(cfg, 1, 1)[0].generate_state(2),
                              replication_seeds(cfg, 1, 2)[0].generate_state(2))


def test_montecarlo_summary():
    cfg = ExperimentConfig(n=8, m=60, replications=2, theta_grid=[1.0, 3.0], seed=4)
    reps = montecarlo(cfg)
    assert len(reps) == 4
    rows = summarize(reps)
    assert {r.metric for r in rows} == {"precision", "recall", "prob_mad", "fourier_mad",
                                        "degree_corr"}
    assert {r.theta for r in rows} == {1.0, 3.0}
    with pytest.raises(ConfigError, match="at least 2"):
        montecarlo(ExperimentConfig(replications=1))
