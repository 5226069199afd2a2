import numpy as np
import pytest

from conftest import random_state
from nonstat_glb.design import DiscountedState
from nonstat_glb.diagnostics import (
    OracleRound, OracleTrace, check_confidence_coverage, check_determinant_trace, check_elliptical_potential,
    check_lemma4_dominance, check_outside_theta, collect_oracle_trace, p2_grid_oracle_1d, random_trajectory,
    solve_p2_exact_1d,
)
from nonstat_glb.envs import DriftSchedule, make_rng, rotating, stationary, variation_budget
from nonstat_glb.glm import make_link
from nonstat_glb.policies import tune_gamma
from nonstat_glb.problem import ProblemConfig
from nonstat_glb.projection import project
from nonstat_glb.records import RoundRecord

LOG = make_link("logistic")


def _cov_cfg():
    return ProblemConfig(d=2, gamma=tune_gamma(variation_budget(rotating(200)), 2, 200), delta=0.1)


def test_coverage_small_run_reports_every_checkpoint():
    rep = check_confidence_coverage(_cov_cfg(), 10, checkpoints=(20, 40))
    assert rep.checkpoints == [20, 40] and len(rep.coverage) == 2
    assert all(0 <= c <= 1 for c in rep.coverage)
    assert len(rep.config_hash) == 64


def test_coverage_noiseless_is_one():
    rep = check_confidence_coverage(_cov_cfg(), 20, noiseless=True)
    assert rep.coverage == [1.0, 1.0, 1.0]


def test_coverage_inflated_beta_is_one():
    rep = check_confidence_coverage(_cov_cfg(), 20, beta_scale=10.0)
    assert rep.coverage == [1.0, 1.0, 1.0]


def test_coverage_hash_tracks_settings():
    a = check_confidence_coverage(_cov_cfg(), 3, checkpoints=(10,))
    b = check_confidence_coverage(_cov_cfg(), 3, checkpoints=(10,), seed=1)
    assert a.config_hash != b.config_hash
    assert a.config_hash == check_confidence_coverage(_cov_cfg(), 3, checkpoints=(10,)).config_hash


def test_elliptical_single_step():
    rep = check_elliptical_potential(np.array([[0.6, 0.8]]), 0.9, 2.0, 1.0)
    assert rep.passed and rep.lhs == pytest.approx(1.0 / 2.0)


def test_elliptical_near_one_gamma():
    rng = make_rng(0, "policy")
    X = random_trajectory(rng, 500, 3, 1.0)
    rep = check_elliptical_potential(X, 1 - 1e-9, 1.0, 1.0)
    assert rep.passed and rep.lhs <= rep.rhs


def test_determinant_trace_equality_case_passes():
    # d = 1 and |x| = L gives equality in the bound at every t
    X = np.ones((200, 1))
    rep = check_determinant_trace(X, 0.95, 0.5, 1.0)
    assert rep.passed and abs(rep.lhs) <= 1e-10


def test_inequality_checks_reject_long_arms():
    with pytest.raises(ValueError):
        check_elliptical_potential(np.array([[2.0, 0.0]]), 0.9, 1.0, 1.0)


def test_checks_do_not_mutate_input():
    X = random_trajectory(make_rng(1, "policy"), 50, 2, 1.0)
    keep = X.copy()
    check_elliptical_potential(X, 0.9, 1.0, 1.0)
    check_determinant_trace(X, 0.9, 1.0, 1.0)
    assert np.array_equal(X, keep)


def test_exact_1d_solver_matches_grid_oracle(rng):
    for _ in range(10):
        s = random_state(rng, 1, int(rng.integers(1, 40)))
        th, b = float(rng.choice([-1, 1]) * rng.uniform(1.1, 5)), float(rng.uniform(0.05, 2))
        _, _, exact = solve_p2_exact_1d(s, LOG, 0.2, th, b, 1.0)
        assert abs(exact - p2_grid_oracle_1d(s, LOG, 0.2, th, b, 1.0)) <= 1e-7
        assert exact <= project(s, LOG, 0.2, [th], b, 1.0).objective + 1e-12


def test_dominance_fast_path_rounds_are_excluded():
    rounds = (OracleRound(2, True, True, 0.0, 0.0, 0.1, 1.0, 0.5),
              OracleRound(3, True, False, 0.5, 1.0, 0.1, 1.0, 1.5),
              OracleRound(4, False, False, 5.0, 1.0, 2.0, 1.0, 1.5),
              OracleRound(5, True, False, 2.0, 1.0, 0.1, 1.0, 1.5))
    rep = check_lemma4_dominance(OracleTrace("h", rounds))
    assert (rep.event_rounds, rep.checked, rep.satisfied) == (3, 2, 1)
    assert rep.rate == 0.5 and rep.worst_excess == pytest.approx(1.0) and rep.config_hash == "h"


def test_dominance_exact_1d_rate_one():
    T = 200
    sched = DriftSchedule("piecewise_constant", T, 1, switches=(1, 101), thetas=((0.9,), (-0.9,)))
    cfg = ProblemConfig(d=1, gamma=tune_gamma(1.8, 1, T))
    rep = check_lemma4_dominance(collect_oracle_trace(cfg, sched, 0, solver="exact1d"))
    assert rep.checked > 0 and rep.rate == 1.0


def test_dominance_orthogonal_reported():
    T = 150
    sched = rotating(T)
    cfg = ProblemConfig(d=2, gamma=tune_gamma(variation_budget(sched), 2, T))
    rep = check_lemma4_dominance(collect_oracle_trace(cfg, sched, 1, arm_mode="orthogonal"))
    assert rep.rounds == T - 1 and 0.0 <= rep.rate <= 1.0
    with pytest.raises(ValueError):
        collect_oracle_trace(cfg, sched, 1, solver="slsqp")


def _rec(seed, t, norm):
    return RoundRecord(seed, t, "x", 0, 0.0, 0.0, 0.0, norm, int(norm > 1))


def test_outside_theta_split_and_large_S():
    sched = rotating(9)
    recs = [_rec(0, t, 2.0 if t in (2, 5) else 0.5) for t in range(1, 10)]
    recs += [_rec(1, t, 0.5) for t in range(1, 10)]
    rep = check_outside_theta(recs, sched, 1.0, "abc")
    assert rep.outside == {"pre": 1, "drift": 1, "post": 0}
    assert rep.frequency["drift"] == pytest.approx(1 / 6)
    assert rep.seeds_with_drift_outside == 1 and rep.seeds == 2 and rep.config_hash == "abc"
    big = check_outside_theta(recs, sched, 1e3)
    assert sum(big.outside.values()) == 0


def test_reports_serialise():
    rep = check_elliptical_potential(np.array([[0.1, 0.2]]), 0.9, 1.0, 1.0)
    d = rep.to_dict()
    assert set(d) >= {"config_hash", "passed", "lhs", "rhs"}
