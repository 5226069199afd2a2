import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nonstat_glb.bob import (
    Exp3State, default_block_length, exp3_alpha, exp3_probabilities, exp3_update, grid_size, make_grid, run_bob,
)
from nonstat_glb.envs import Environment, rotating
from nonstat_glb.problem import ProblemConfig


def test_grid_size_small_example():
    assert grid_size(1.0, 2) == 3


def test_grid_first_value_and_doubling():
    g = make_grid(1.0, 2, 3000)
    mu1 = 0.5 / (3000 * 2 ** (4 / 3))
    assert 1 - g[0] == pytest.approx(mu1, rel=1e-12)
    assert 1 - g[0] == pytest.approx(6.6146e-5, rel=1e-4)
    assert g[0] == pytest.approx(0.9999339, abs=1e-7)
    gaps = [(1 - b) / (1 - a) for a, b in zip(g, g[1:])]
    assert np.allclose(gaps, 2.0, rtol=1e-9)
    assert len(g) == grid_size(1.0, 3000)


@pytest.mark.parametrize("S", [0.5, 1.0, 3.0])
@pytest.mark.parametrize("d", [1, 2, 5])
def test_grid_values_are_discounts(S, d):
    for T in (2, 3, 17, 100, 3000, 10**5):
        g = make_grid(S, d, T)
        assert len(g) == grid_size(S, T)
        assert all(0 < x < 1 for x in g)
        assert g == sorted(g, reverse=True)


def test_grid_rejects_bad_input():
    with pytest.raises(ValueError):
        make_grid(1.0, 2, 1)
    with pytest.raises(ValueError):
        make_grid(0.0, 2, 100)


def test_initial_probabilities_uniform():
    s = Exp3State(grid=[0.9, 0.99, 0.999, 0.9999], H=10, T=1000, sigma=0.5)
    assert np.allclose(exp3_probabilities(s), 0.25, atol=1e-12)


def test_alpha_one_is_uniform():
    s = Exp3State(grid=[0.9, 0.99, 0.999], H=10, T=100, sigma=0.5, s_weights=np.array([5.0, 1.0, 0.1]), alpha=1.0)
    assert np.allclose(exp3_probabilities(s), 1 / 3, atol=1e-15)


def test_probability_example():
    s = Exp3State(grid=[0.9, 0.99, 0.999], H=10, T=100, sigma=0.5, s_weights=np.array([2.0, 1.0, 1.0]), alpha=0.1)
    assert exp3_probabilities(s) == pytest.approx([0.48333, 0.25833, 0.25833], abs=1e-5)


def test_alpha_formula():
    N, T, H = 8, 3000, 109
    assert exp3_alpha(N, T, H) == pytest.approx(min(1, math.sqrt(N * math.log(N) / ((math.e - 1) * 28))))
    assert exp3_alpha(1, T, H) == 1.0


def test_zero_reward_leaves_weights():
    s = Exp3State(grid=[0.9, 0.99], H=10, T=100, sigma=0.5)
    before = s.s_weights.copy()
    exp3_update(s, 1, 0.0)
    assert np.array_equal(s.s_weights, before) and s.block_index == 1


def test_update_example():
    s = Exp3State(grid=[0.9, 0.99], H=10, T=100, sigma=0.5, alpha=0.5)
    exp3_update(s, 0, 10.0)
    assert s.s_weights[0] == pytest.approx(math.exp(0.5), rel=1e-12)
    assert s.s_weights[0] == pytest.approx(1.64872, abs=1e-5)
    assert s.s_weights[1] == 1.0


def test_updates_compose_multiplicatively():
    s = Exp3State(grid=[0.9, 0.99], H=10, T=100, sigma=0.5, alpha=1.0)  # alpha = 1 keeps p fixed
    exp3_update(s, 0, 10.0)
    exp3_update(s, 0, 10.0)
    assert s.s_weights[0] == pytest.approx(math.exp(1.0) ** 2, rel=1e-12)


def test_update_rejects_out_of_range_sum():
    s = Exp3State(grid=[0.9, 0.99], H=10, T=100, sigma=0.5)
    with pytest.raises(ValueError):
        exp3_update(s, 0, 10.5)
    with pytest.raises(ValueError):
        exp3_update(s, 0, -0.1)


@settings(max_examples=50, deadline=None)
@given(N=st.integers(1, 12), blocks=st.lists(st.tuples(st.integers(0, 100), st.floats(0, 1)), max_size=200))
def test_simplex_and_floor_property(N, blocks):
    s = Exp3State(grid=list(np.linspace(0.5, 0.99, N)), H=7, T=700, sigma=0.5)
    for j, frac in blocks:
        p = exp3_probabilities(s)
        assert abs(p.sum() - 1) <= 1e-12
        assert np.all(p >= s.alpha / s.N - 1e-15)
        exp3_update(s, j % N, frac * 7)
        assert np.all(s.s_weights > 0) and np.all(np.isfinite(s.s_weights))


def _cfg():
    return ProblemConfig(d=2, S=1.0)


def test_single_block_when_T_le_H():
    env = Environment(rotating(30), seed=0)
    run = run_bob(_cfg(), env, 0, H=50)
    assert len(run.blocks) == 1 and len(run.records) == 30


def test_two_blocks_reset_worker():
    env = Environment(rotating(40), seed=0)
    run = run_bob(_cfg(), env, 0, H=20)
    assert len(run.blocks) == 2
    assert [b.worker_first_t for b in run.blocks] == [1, 1]
    assert [b.worker_last_t for b in run.blocks] == [20, 20]
    assert [r.t for r in run.records] == list(range(1, 41))
    for b, lo in zip(run.blocks, (0, 20)):
        assert b.reward_sum == pytest.approx(sum(r.reward for r in run.records[lo:lo + 20]))


def test_default_block_length():
    assert default_block_length(2, 2000) == math.floor(2 * math.sqrt(2000))
    env = Environment(rotating(100), seed=0)
    assert run_bob(_cfg(), env, 0).H == 20


def test_bob_reproducible_and_seed_sensitive():
    a = run_bob(_cfg(), Environment(rotating(120), seed=3), 3, H=10)
    b = run_bob(_cfg(), Environment(rotating(120), seed=3), 3, H=10)
    assert a.records == b.records and [x.chosen for x in a.blocks] == [x.chosen for x in b.blocks]
    c = run_bob(_cfg(), Environment(rotating(120), seed=3), 4, H=10)
    assert [x.chosen for x in a.blocks] != [x.chosen for x in c.blocks]


def test_grid_override_used():
    run = run_bob(_cfg(), Environment(rotating(50), seed=1), 1, H=10, grid=[0.95])
    assert run.grid == [0.95] and all(b.gamma == 0.95 for b in run.blocks)
