import json

import pytest
from pydantic import ValidationError

from nonstat_glb.harness import (
    ExperimentConfig, budget_report, checkpoints, load_config, resolve_gamma, run_bob_sweep, run_experiment,
    worker_count,
)
from nonstat_glb.records import CSV_HEADER, read_csv


def _cfg(**over):
    data = {
        "schema_version": 1,
        "env": {"kind": "rotating", "T": 10, "d": 2},
        "policy": {"kind": "bvd_glm_ucb"},
        "seeds": [0],
    }
    data.update(over)
    return ExperimentConfig.model_validate(data)


def test_single_run_csv_shape(tmp_path):
    run_experiment(_cfg(), tmp_path)
    lines = (tmp_path / "bvd_glm_ucb.csv").read_text().splitlines()
    assert lines[0] == CSV_HEADER
    assert len(lines) == 11
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["checkpoints"] == [2, 5, 7, 10]
    assert set(summary["policies"]["bvd_glm_ucb"]["cum_regret"]) == {"2", "5", "7", "10"}


def test_rerun_is_byte_identical(tmp_path):
    cfg = _cfg(policy=[{"kind": "bvd_glm_ucb"}, {"kind": "oful"}], seeds=[0, 1], env={"T": 40})
    run_experiment(cfg, tmp_path / "a")
    run_experiment(cfg, tmp_path / "b")
    for name in ("bvd_glm_ucb.csv", "oful.csv", "summary.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_parallel_matches_serial(tmp_path, monkeypatch):
    cfg = _cfg(policy=[{"kind": "d_linucb"}, {"kind": "oful"}], seeds=[0, 1, 2], env={"T": 30})
    monkeypatch.setenv("NONSTAT_GLB_THREADS", "1")
    run_experiment(cfg, tmp_path / "s")
    monkeypatch.setenv("NONSTAT_GLB_THREADS", "3")
    run_experiment(cfg, tmp_path / "p")
    for name in ("d_linucb.csv", "oful.csv"):
        assert (tmp_path / "s" / name).read_bytes() == (tmp_path / "p" / name).read_bytes()


def test_worker_count_cap(monkeypatch):
    monkeypatch.setenv("NONSTAT_GLB_THREADS", "2")
    assert worker_count(10) == 2 and worker_count(1) == 1


def test_record_invariants(tmp_path):
    cfg = _cfg(policy=[{"kind": "bvd_glm_ucb"}, {"kind": "glm_ucb"}], seeds=[3, 4], env={"T": 60})
    run_experiment(cfg, tmp_path)
    for name in ("bvd_glm_ucb", "glm_ucb"):
        recs = read_csv(tmp_path / f"{name}.csv")
        for seed in (3, 4):
            rs = [r for r in recs if r.seed == seed]
            assert [r.t for r in rs] == list(range(1, 61))
            total = 0.0
            for r in rs:
                total += r.regret
                assert abs(r.cum_regret - total) <= 1e-9
                assert r.outside_theta == int(r.theta_hat_norm > 1.0)


def test_common_random_numbers_across_policy_sets(tmp_path):
    a = _cfg(policy=[{"kind": "oful"}], env={"T": 30})
    b = _cfg(policy=[{"kind": "bvd_glm_ucb"}, {"kind": "oful"}], env={"T": 30})
    run_experiment(a, tmp_path / "a")
    run_experiment(b, tmp_path / "b")
    assert (tmp_path / "a" / "oful.csv").read_bytes() == (tmp_path / "b" / "oful.csv").read_bytes()


@pytest.mark.parametrize("bad", [
    {"policy": {"kind": "bvd_glm_ucb", "gamma": 1.0}},
    {"policy": {"kind": "bvd_glm_ucb", "gamma": 0.0}},
    {"policy": {"kind": "bvd_glm_ucb", "lambda": 0.0}},
    {"policy": {"kind": "bvd_glm_ucb", "delta": 0.0}},
    {"policy": {"kind": "bvd_glm_ucb", "delta": 1.5}},
    {"policy": {"kind": "bvd_glm_ucb", "S": -1}},
    {"policy": {"kind": "bvd_glm_ucb", "sigma": 0}},
    {"policy": {"kind": "bvd_glm_ucb", "colour": "red"}},
    {"env": {"L": 0}},
    {"env": {"kind": "rotating", "d": 3}},
    {"surprise": 1},
    {"schema_version": 2},
    {"policy": [{"kind": "oful"}, {"kind": "oful"}]},
    {"bob": {"grid_override": [1.2]}},
])
def test_config_validation_rejects(bad):
    with pytest.raises(ValidationError):
        _cfg(**bad)


def test_gamma_resolution():
    cfg = _cfg(env={"T": 3000})
    env = cfg.env
    assert resolve_gamma(cfg.policies[0], env) == pytest.approx(0.995908, abs=1e-6)
    g = _cfg(policy={"kind": "glm_ucb"}).policies[0]
    assert resolve_gamma(g, env) == 1.0
    fixed = _cfg(policy={"kind": "d_linucb", "gamma": 0.97}).policies[0]
    assert resolve_gamma(fixed, env) == 0.97
    gen = _cfg(policy={"kind": "bvd_glm_ucb", "gamma_mode": "general", "budget": 1.5}).policies[0]
    assert resolve_gamma(gen, env) == pytest.approx(0.958372, abs=1e-6)


def test_overrides_and_loading(tmp_path):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"schema_version": 1, "policy": {"kind": "oful"}}))
    cfg = load_config(p).with_overrides(seeds=3, horizon=25, out="x")
    assert cfg.seeds == [0, 1, 2] and cfg.env.T == 25 and cfg.output == "x"
    assert cfg.hash() != load_config(p).hash()


def test_checkpoints():
    assert checkpoints(3000) == [750, 1500, 2250, 3000]
    assert checkpoints(2) == [1, 1, 1, 2]


def test_projection_audit_in_summary(tmp_path):
    s = run_experiment(_cfg(env={"T": 80}), tmp_path)
    audit = s["policies"]["bvd_glm_ucb"]["projection_audit"]
    assert audit["calls"] == 80 and audit["infeasible"] == 0 and audit["certificate_failures"] == 0


def test_bob_sweep_writes_outputs(tmp_path):
    cfg = _cfg(env={"T": 60}, seeds=[0, 1], bob={"H": 15})
    s = run_bob_sweep(cfg, tmp_path)
    assert len(read_csv(tmp_path / "bob.csv")) == 120
    js = json.loads((tmp_path / "bob_summary.json").read_text())
    assert js["H"] == 15 and len(js["blocks"]["0"]) == 4
    assert s["config_hash"] == cfg.hash()


def test_budget_report():
    r = budget_report("rotating", 3000, 2)
    assert r["B_T"] == pytest.approx(1.5708, abs=1e-4)
    assert r["gamma_orthogonal"] == pytest.approx(0.995908, abs=1e-6)
    assert budget_report("rotating", 3000, 2, 1.5)["gamma_orthogonal"] == pytest.approx(0.99603, abs=1e-5)
