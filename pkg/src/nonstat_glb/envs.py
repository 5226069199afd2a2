"""Drifting environments, reward sampling and variation-budget accounting.

Random streams are derived from ``(seed, stream name)`` by :func:`make_rng`.
Arm sets and reward-noise uniforms are drawn one per round independently
of the actions played, so every policy run on the same seed faces the
same arm sets and the same noise (common random numbers).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .glm import make_link

STREAMS = {"arms": 0, "noise": 1, "exp3": 2, "policy": 3}
ARM_MODES = ("random_sphere", "orthogonal")
SCHEDULE_KINDS = ("rotating", "piecewise_constant", "stationary")


def make_rng(seed: int, stream: str) -> np.random.Generator:
    """Independent generator for one named stream of one run seed."""
    return np.random.default_rng(np.random.SeedSequence(entropy=int(seed), spawn_key=(STREAMS[stream],)))


@dataclass(frozen=True)
class DriftSchedule:
    """Hidden parameter path theta*_t, t = 1..T.

    rotating: (0,1) up to T/3, constant angular speed down to (1,0) at 2T/3,
    then held at (1,0).  ``radius`` scales the unit circle.
    piecewise_constant: ``thetas[k]`` is active from ``switches[k]`` (switches[0] == 1).
    stationary: ``thetas[0]`` throughout.
    """

    kind: str
    T: int
    d: int = 2
    radius: float = 1.0
    start_angle: float = math.pi / 2
    end_angle: float = 0.0
    switches: tuple[int, ...] = ()
    thetas: tuple[tuple[float, ...], ...] = ()

    def __post_init__(self):
        if self.kind not in SCHEDULE_KINDS:
            raise ValueError(f"unknown schedule kind {self.kind!r}")
        if self.T < 1:
            raise ValueError("T must be >= 1")
        if self.kind == "rotating" and self.d != 2:
            raise ValueError("rotating schedule requires d = 2")
        if self.kind == "stationary" and len(self.thetas) != 1:
            raise ValueError("stationary schedule needs exactly one theta")
        if self.kind == "piecewise_constant":
            if not self.thetas or len(self.switches) != len(self.thetas) or self.switches[0] != 1:
                raise ValueError("piecewise_constant needs switches starting at 1, one per theta")
            if any(b <= a for a, b in zip(self.switches, self.switches[1:])):
                raise ValueError("switch times must increase")
        for th in self.thetas:
            if len(th) != self.d:
                raise ValueError("theta dimension does not match d")

    def max_norm(self) -> float:
        if self.kind == "rotating":
            return self.radius
        return max(float(np.linalg.norm(th)) for th in self.thetas)

    def angle(self, t):
        t = np.asarray(t, dtype=float)
        T = self.T
        frac = np.clip((t - T / 3) / (T / 3), 0.0, 1.0)
        return self.start_angle + frac * (self.end_angle - self.start_angle)

    def path(self) -> np.ndarray:
        """All parameters as a (T, d) array, row t-1 holding theta*_t."""
        t = np.arange(1, self.T + 1)
        if self.kind == "rotating":
            phi = self.angle(t)
            return self.radius * np.column_stack([np.cos(phi), np.sin(phi)])
        thetas = np.asarray(self.thetas, dtype=float)
        if self.kind == "stationary":
            return np.repeat(thetas, self.T, axis=0)
        idx = np.searchsorted(np.asarray(self.switches), t, side="right") - 1
        return thetas[idx]

    def phase(self, t: int) -> str:
        if t <= self.T / 3:
            return "pre"
        if t <= 2 * self.T / 3:
            return "drift"
        return "post"


def rotating(T: int, radius: float = 1.0) -> DriftSchedule:
    return DriftSchedule("rotating", T, 2, radius=radius)


def stationary(theta, T: int) -> DriftSchedule:
    theta = tuple(float(v) for v in np.atleast_1d(theta))
    return DriftSchedule("stationary", T, len(theta), thetas=(theta,))


def theta_star(schedule: DriftSchedule, t: int) -> np.ndarray:
    if not 1 <= t <= schedule.T:
        raise ValueError(f"t={t} outside [1, {schedule.T}]")
    if schedule.kind == "rotating":
        phi = float(schedule.angle(t))
        return schedule.radius * np.array([math.cos(phi), math.sin(phi)])
    return schedule.path()[t - 1]


def variation_budget(schedule: DriftSchedule) -> float:
    """sum_{t=1}^{T-1} |theta*_{t+1} - theta*_t|"""
    P = schedule.path()
    if len(P) < 2:
        return 0.0
    return float(np.linalg.norm(np.diff(P, axis=0), axis=1).sum())


def rotating_budget_closed_form(T: int) -> float:
    return (2 * T / 3) * math.sin(3 * math.pi / (4 * T))


@dataclass
class Environment:
    """One seeded realisation of a drifting GLM world.

    The environment owns the hidden path; policies only ever receive the
    arm set and the realised reward.
    """

    schedule: DriftSchedule
    seed: int = 0
    K: int = 10
    arm_mode: str = "random_sphere"
    L: float = 1.0
    link_kind: str = "logistic"
    t: int = field(default=1, init=False)

    def __post_init__(self):
        if self.arm_mode not in ARM_MODES:
            raise ValueError(f"unknown arm mode {self.arm_mode!r}")
        self.link = make_link(self.link_kind)
        self.d = self.schedule.d
        self.sigma = 0.5  # rewards lie in [0, 1] for both worlds
        self._path = self.schedule.path()
        self.reset()

    def reset(self) -> None:
        self.t = 1
        self._arm_rng = make_rng(self.seed, "arms")
        self._noise_rng = make_rng(self.seed, "noise")
        self._arms = None
        self._u = None

    @property
    def T(self) -> int:
        return self.schedule.T

    @property
    def theta(self) -> np.ndarray:
        return self._path[self.t - 1]

    def draw_arms(self) -> np.ndarray:
        """Arm set of the current round as a (n_arms, d) array (drawn once per round)."""
        if self._arms is None:
            self._arms = self._sample_arm_set(self._arm_rng)
            self._u = float(self._noise_rng.random())
        return self._arms

    def _sample_arm_set(self, rng) -> np.ndarray:
        d, L = self.d, self.L
        if self.arm_mode == "orthogonal":
            return np.diag(rng.uniform(L / 2, L, size=d))
        if d == 2:
            phi = rng.uniform(0.0, 2 * math.pi, size=self.K)
            return L * np.column_stack([np.cos(phi), np.sin(phi)])
        G = rng.standard_normal((self.K, d))
        return L * G / np.linalg.norm(G, axis=1, keepdims=True)

    def mean_reward(self, arms) -> np.ndarray:
        z = np.asarray(arms, dtype=float) @ self.theta
        if self.link_kind == "identity":
            return np.clip(z, 0.0, 1.0)
        return self.link.mu(z)

    def sample_reward(self, arm) -> float:
        self.draw_arms()
        m = float(self.mean_reward(arm))
        return noisy_reward(m, self._u, self.link_kind)

    def instantaneous_regret(self, arm_set, chosen: int) -> float:
        means = self.mean_reward(arm_set)
        return float(means.max() - means[chosen])

    def advance(self) -> None:
        self.draw_arms()  # keep the streams aligned even if a round was skipped
        self.t += 1
        self._arms = None
        self._u = None


def noisy_reward(mean: float, u: float, link_kind: str) -> float:
    """Reward in [0, 1] with the given mean, driven by one uniform draw.

    Logistic worlds: Bernoulli(mean).  Identity worlds: mean plus symmetric
    uniform noise truncated so the reward stays inside [0, 1].
    """
    if link_kind == "identity":
        return mean + (2 * u - 1) * min(mean, 1 - mean)
    return 1.0 if u < mean else 0.0
