"""Bandit-over-Bandit: an EXP3 master choosing the discount factor per block."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .envs import Environment, make_rng
from .policies import BvdGlmUcb
from .problem import ProblemConfig
from .records import RoundRecord

# rescale s when it grows this large; probabilities only depend on ratios
S_RESCALE = 1e100


def grid_size(S: float, T: int) -> int:
    return math.ceil((2 / 3) * math.log2(2 * S * T**1.5)) + 1


def make_grid(S: float, d: int, T: int) -> list[float]:
    """Discount grid gamma_i = 1 - mu_i, mu_i = 2^(i-1) / (2 d^(2/3) T (2S)^(2/3)).

    Values with mu_i >= 1 are dropped.
    """
    if S <= 0 or T < 2:
        raise ValueError("need S > 0 and T >= 2")
    base = 0.5 / (d ** (2 / 3) * T * (2 * S) ** (2 / 3))
    out = []
    for i in range(1, grid_size(S, T) + 1):
        m = base * 2.0 ** (i - 1)
        if m < 1:
            out.append(1.0 - m)
    return out


def default_block_length(d: int, T: int) -> int:
    return max(1, math.floor(d * math.sqrt(T)))


def exp3_alpha(N: int, T: int, H: int) -> float:
    if N <= 1:
        return 1.0
    return min(1.0, math.sqrt(N * math.log(N) / ((math.e - 1) * math.ceil(T / H))))


@dataclass
class Exp3State:
    grid: list[float]
    H: int
    T: int
    sigma: float
    s_weights: np.ndarray = field(default=None)
    alpha: float = field(default=None)
    block_index: int = 0

    def __post_init__(self):
        if self.H < 1 or self.T < 1:
            raise ValueError("H and T must be >= 1")
        if not self.grid:
            raise ValueError("empty discount grid")
        if self.s_weights is None:
            self.s_weights = np.ones(len(self.grid))
        if self.alpha is None:
            self.alpha = exp3_alpha(len(self.grid), self.T, self.H)

    @property
    def N(self) -> int:
        return len(self.grid)

    @property
    def n_blocks(self) -> int:
        return math.ceil(self.T / self.H)


def exp3_probabilities(state: Exp3State) -> np.ndarray:
    s = state.s_weights
    return (1 - state.alpha) * s / s.sum() + state.alpha / state.N


def exp3_update(state: Exp3State, chosen_j: int, block_reward_sum: float) -> Exp3State:
    """Importance-weighted multiplicative update of the chosen expert only."""
    cap = 2 * state.sigma * state.H
    if not 0.0 <= block_reward_sum <= cap * (1 + 1e-12):
        raise ValueError(f"block reward sum {block_reward_sum} outside [0, {cap}]")
    p = exp3_probabilities(state)[chosen_j]
    state.s_weights[chosen_j] *= math.exp(state.alpha / (state.N * p) * block_reward_sum / cap)
    if state.s_weights.max() > S_RESCALE:
        state.s_weights /= state.s_weights.max()
    state.block_index += 1
    return state


@dataclass
class BlockLog:
    index: int
    chosen: int
    gamma: float
    probabilities: np.ndarray
    reward_sum: float
    rounds: int
    worker_first_t: int
    worker_last_t: int


@dataclass
class BobRun:
    records: list[RoundRecord]
    blocks: list[BlockLog]
    grid: list[float]
    H: int
    alpha: float


def run_bob(
    cfg: ProblemConfig,
    env: Environment,
    seed: int,
    *,
    H: int | None = None,
    grid: list[float] | None = None,
    link: str = "logistic",
    algo: str = "bob_bvd_glm_ucb",
    **policy_kw,
) -> BobRun:
    """Run BOB-BVD-GLM-UCB for ``env.T`` rounds.

    Each block draws gamma_j from the EXP3 distribution, starts a fresh
    BVD-GLM-UCB worker with that discount and feeds the block's raw reward
    sum back to the master.  Master randomness uses the "exp3" stream of
    ``seed`` and never touches the environment's streams.
    """
    T = env.T
    H = default_block_length(cfg.d, T) if H is None else int(H)
    grid = make_grid(cfg.S, cfg.d, T) if grid is None else list(grid)
    master = Exp3State(grid=grid, H=H, T=T, sigma=cfg.sigma)
    rng = make_rng(seed, "exp3")
    env.reset()

    records: list[RoundRecord] = []
    blocks: list[BlockLog] = []
    cum = 0.0
    t = 1
    while t <= T:
        probs = exp3_probabilities(master)
        j = int(rng.choice(master.N, p=probs))
        worker = BvdGlmUcb(cfg.with_(gamma=grid[j]), link, **policy_kw)
        first_t = worker.t
        n = min(H, T - t + 1)
        total = 0.0
        for _ in range(n):
            arms = env.draw_arms()
            th_norm = float(np.linalg.norm(worker.theta_hat))
            i = worker.choose(arms)
            r = env.sample_reward(arms[i])
            reg = env.instantaneous_regret(arms, i)
            cum += reg
            records.append(RoundRecord(seed, t, algo, i, r, reg, cum, th_norm, int(th_norm > cfg.S)))
            worker.observe(arms[i], r)
            env.advance()
            total += r
            t += 1
        blocks.append(BlockLog(len(blocks), j, grid[j], probs, total, n, first_t, worker.t - 1))
        exp3_update(master, j, total)
    return BobRun(records=records, blocks=blocks, grid=grid, H=H, alpha=master.alpha)
