"""Numeric checks that use oracle access to the hidden environment state.

Every report carries ``config_hash``, the hash of the settings that
produced the trace it inspected.  Checks never mutate their inputs.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .design import DiscountedState
from .envs import DriftSchedule, Environment, make_rng, rotating, variation_budget
from .estimator import fit_qmle, g_inverse, g_map, theta_bar_oracle
from .glm import compute_constants, make_link
from .policies import BvdGlmUcb, tune_gamma
from .problem import ProblemConfig
from .projection import ProjectionOutcome, beta as beta_radius
from .records import RoundRecord, config_hash

LEMMA4_RTOL = 1e-6
LEMMA4_ATOL = 1e-12
DET_LOG_TOL = 1e-10


def _report_dict(report) -> dict:
    out = asdict(report)
    for k, v in out.items():
        if isinstance(v, np.ndarray):
            out[k] = v.tolist()
    return out


# -- Lemma 1: confidence coverage -------------------------------------------

@dataclass
class CoverageReport:
    config_hash: str
    checkpoints: list[int]
    coverage: list[float]
    replications: int
    delta: float
    gamma: float
    beta_scale: float
    noiseless: bool
    max_ratio: list[float] = field(default_factory=list)

    def to_dict(self) -> dict:
        return _report_dict(self)


def check_confidence_coverage(
    cfg: ProblemConfig,
    M: int = 200,
    *,
    checkpoints=(50, 100, 200),
    seed: int = 0,
    beta_scale: float = 1.0,
    noiseless: bool = False,
    K: int = 10,
    link: str = "logistic",
) -> CoverageReport:
    """Empirical per-checkpoint frequency of |g(theta_bar) - g(theta_hat)|_{Vtilde^-1} <= beta_t.

    Each replication plays the rotating world (horizon = last checkpoint)
    with a uniformly random arm choice; replication m uses seed ``seed + m``.
    In noiseless mode the expected reward is fed back instead of a sample
    and beta is computed with sigma = 0.
    """
    checkpoints = sorted(int(c) for c in checkpoints)
    if checkpoints[0] < 1:
        raise ValueError("checkpoints must be >= 1")
    T = checkpoints[-1]
    schedule = rotating(T, radius=cfg.S)
    lk = make_link(link)
    c_mu = compute_constants(lk, cfg.S, cfg.L).c_mu
    beta_cfg = cfg.with_(sigma=0.0) if noiseless else cfg
    betas = [beta_scale * beta_radius(t, beta_cfg, c_mu).beta for t in checkpoints]
    path = schedule.path()

    hits = np.zeros(len(checkpoints))
    worst = np.zeros(len(checkpoints))
    for m in range(M):
        env = Environment(schedule, seed=seed + m, K=K, L=cfg.L, link_kind=link)
        pick = make_rng(seed + m, "policy")
        state = DiscountedState(cfg.d, cfg.lam, cfg.gamma)
        theta_hat = np.zeros(cfg.d)
        k = 0
        for t in range(1, T + 1):
            if t == checkpoints[k]:
                theta_hat = fit_qmle(state, lk, c_mu, theta0=theta_hat).theta_hat
                bar = theta_bar_oracle(state, lk, c_mu, path[state.rounds - 1], path[t - 1])
                dev = state.mahalanobis_tilde_inv(g_map(state, lk, c_mu, bar) - g_map(state, lk, c_mu, theta_hat))
                hits[k] += dev <= betas[k]
                worst[k] = max(worst[k], dev / betas[k])
                k += 1
                if k == len(checkpoints):
                    break
            arms = env.draw_arms()
            i = int(pick.integers(len(arms)))
            r = float(env.mean_reward(arms[i])) if noiseless else env.sample_reward(arms[i])
            state.update(arms[i], r)
            env.advance()

    settings = dict(problem=asdict(cfg), M=M, checkpoints=checkpoints, seed=seed, beta_scale=beta_scale,
                    noiseless=noiseless, K=K, link=link, env="rotating")
    return CoverageReport(
        config_hash=config_hash(settings), checkpoints=checkpoints, coverage=(hits / M).tolist(),
        replications=M, delta=cfg.delta, gamma=cfg.gamma, beta_scale=beta_scale, noiseless=noiseless,
        max_ratio=worst.tolist(),
    )


# -- Projection oracles for d = 1 --------------------------------------------

def solve_p2_exact_1d(state: DiscountedState, link, c_mu: float, theta_hat: float, beta: float, S: float):
    """Global optimum of the projection program in d = 1.

    Scans theta' on a grid that contains both endpoints and minimises over
    eta in closed form.  g is increasing, so the reachable values
    g(theta') + beta sqrt(Vtilde) eta form an interval whose ends are hit at
    theta' = +-S, eta = +-1; the endpoint grid points make the scan exact.
    Returns (theta_prime, eta, objective).
    """
    if state.d != 1:
        raise ValueError("d = 1 only")
    q = math.sqrt(state.Vtilde[0, 0])
    v = state.V[0, 0]
    g_hat = float(g_map(state, link, c_mu, np.array([theta_hat]))[0])
    grid = np.linspace(-S, S, 2001)
    gv = np.array([g_map(state, link, c_mu, np.array([th]))[0] for th in grid])
    eta = np.clip((g_hat - gv) / (beta * q), -1.0, 1.0)
    obj = np.abs(gv + beta * q * eta - g_hat) / v
    j = int(np.argmin(obj))
    return float(grid[j]), float(eta[j]), float(obj[j])


def p2_grid_oracle_1d(
    state: DiscountedState, link, c_mu: float, theta_hat: float, beta: float, S: float,
    n: int = 2001, levels: int = 5,
) -> float:
    """Brute-force joint (theta', eta) grid search, refined by zooming around the incumbent.

    The first pass uses an n x n grid of the box [-S, S] x [-1, 1] (spacing
    1e-3 for S = 1, n = 2001); each later pass re-grids a 4-cell window.
    """
    if state.d != 1:
        raise ValueError("d = 1 only")
    q = math.sqrt(state.Vtilde[0, 0])
    v = state.V[0, 0]
    g_hat = float(g_map(state, link, c_mu, np.array([theta_hat]))[0])
    X, w = state.X[:, 0], state.weights
    lo_t, hi_t, lo_e, hi_e = -S, S, -1.0, 1.0
    best = math.inf
    for _ in range(levels):
        th = np.linspace(lo_t, hi_t, n)
        et = np.linspace(lo_e, hi_e, n)
        gth = (w * link.mu(np.outer(th, X)) * X).sum(axis=1) + state.lam * c_mu * th
        obj = np.abs(gth[:, None] + beta * q * et[None, :] - g_hat) / v
        i, j = np.unravel_index(np.argmin(obj), obj.shape)
        best = min(best, float(obj[i, j]))
        dt, de = 2 * (hi_t - lo_t) / (n - 1), 2 * (hi_e - lo_e) / (n - 1)
        lo_t, hi_t = max(-S, th[i] - dt), min(S, th[i] + dt)
        lo_e, hi_e = max(-1.0, et[j] - de), min(1.0, et[j] + de)
    return best


class ExactProjectionBvd(BvdGlmUcb):
    """BVD-GLM-UCB whose projection step is the exact d = 1 solver (diagnostics only)."""

    name = "bvd_glm_ucb_exact1d"

    def _project(self) -> np.ndarray:
        th = float(self._theta_hat[0])
        if abs(th) <= self.cfg.S:
            out = ProjectionOutcome(self._theta_hat.copy(), np.zeros(1), 0.0, self._theta_hat.copy(),
                                    0, True, True, self.beta)
        else:
            tp, eta, obj = solve_p2_exact_1d(self.state, self.link, self.c_mu, th, self.beta, self.cfg.S)
            target = g_map(self.state, self.link, self.c_mu, np.array([tp])) + self.beta * math.sqrt(
                self.state.Vtilde[0, 0]) * eta
            theta_p = g_inverse(self.state, self.link, self.c_mu, target, theta0=self._theta_hat)
            out = ProjectionOutcome(np.array([tp]), np.array([eta]), obj, theta_p, 2001, True, False, self.beta)
        self.last_projection = out
        return out.theta_tilde


# -- Lemma 4: projection dominance --------------------------------------------

@dataclass(frozen=True)
class OracleRound:
    t: int
    event: bool
    fast_path: bool
    lhs: float  # |g(theta_p) - g(theta_hat)|_{V^-2}
    rhs: float  # |g(theta_bar) - g(theta*_t)|_{V^-2}
    learning_dev: float  # |g(theta_bar) - g(theta_hat)|_{Vtilde^-1}
    beta: float
    theta_hat_norm: float


@dataclass(frozen=True)
class OracleTrace:
    config_hash: str
    rounds: tuple[OracleRound, ...]


def collect_oracle_trace(
    cfg: ProblemConfig,
    schedule: DriftSchedule,
    seed: int = 0,
    *,
    solver: str = "spg",
    K: int = 10,
    arm_mode: str = "random_sphere",
    link: str = "logistic",
) -> OracleTrace:
    """Play BVD-GLM-UCB and record, every round t >= 2, the quantities of the dominance check.

    ``solver="exact1d"`` swaps in the exact d = 1 projection.
    """
    env = Environment(schedule, seed=seed, K=K, arm_mode=arm_mode, L=cfg.L, link_kind=link)
    if solver == "spg":
        pol = BvdGlmUcb(cfg, link)
    elif solver == "exact1d":
        pol = ExactProjectionBvd(cfg, link)
    else:
        raise ValueError(f"unknown solver {solver!r}")
    path = schedule.path()
    st, lk, c = pol.state, pol.link, pol.c_mu
    rounds = []
    for t in range(1, schedule.T + 1):
        arms = env.draw_arms()
        if t >= 2:
            out = pol.last_projection
            bar = theta_bar_oracle(st, lk, c, path[st.rounds - 1], path[t - 1])
            g_hat = g_map(st, lk, c, pol.theta_hat)
            g_bar = g_map(st, lk, c, bar)
            dev = st.mahalanobis_tilde_inv(g_bar - g_hat)
            lhs = 0.0 if out.fast_path else out.objective
            rhs = st.mahalanobis_inv2(g_bar - g_map(st, lk, c, path[t - 1]))
            rounds.append(OracleRound(t, bool(dev <= pol.beta), out.fast_path, lhs, rhs, dev, pol.beta,
                                      float(np.linalg.norm(pol.theta_hat))))
        i = pol.choose(arms)
        pol.observe(arms[i], env.sample_reward(arms[i]))
        env.advance()
    settings = dict(problem=asdict(cfg), schedule=asdict(schedule), seed=seed, solver=solver, K=K,
                    arm_mode=arm_mode, link=link)
    return OracleTrace(config_hash(settings), tuple(rounds))


@dataclass
class DominanceReport:
    config_hash: str
    rounds: int
    event_rounds: int
    checked: int  # event holds and projection was not the fast path
    satisfied: int
    rate: float
    worst_excess: float

    def to_dict(self) -> dict:
        return _report_dict(self)


def check_lemma4_dominance(trace: OracleTrace) -> DominanceReport:
    checked = satisfied = events = 0
    worst = 0.0
    for r in trace.rounds:
        if not r.event:
            continue
        events += 1
        if r.fast_path:
            continue
        checked += 1
        ok = r.lhs <= r.rhs * (1 + LEMMA4_RTOL) + LEMMA4_ATOL
        satisfied += ok
        worst = max(worst, r.lhs - r.rhs)
    rate = satisfied / checked if checked else 1.0
    return DominanceReport(trace.config_hash, len(trace.rounds), events, checked, satisfied, rate, worst)


# -- Figure-2b phenomenon -----------------------------------------------------

@dataclass
class OutsideReport:
    config_hash: str
    S: float
    rounds: dict
    outside: dict
    frequency: dict
    seeds_with_drift_outside: int
    seeds: int

    def to_dict(self) -> dict:
        return _report_dict(self)


def check_outside_theta(records: list[RoundRecord], schedule: DriftSchedule, S: float,
                        run_hash: str = "") -> OutsideReport:
    """Frequency of |theta_hat_t| > S per phase, plus how many seeds hit it during the drift."""
    phases = ("pre", "drift", "post")
    n = dict.fromkeys(phases, 0)
    k = dict.fromkeys(phases, 0)
    drift_seeds, seeds = set(), set()
    for rec in records:
        ph = schedule.phase(rec.t)
        out = rec.theta_hat_norm > S
        n[ph] += 1
        k[ph] += out
        seeds.add(rec.seed)
        if out and ph == "drift":
            drift_seeds.add(rec.seed)
    freq = {p: (k[p] / n[p] if n[p] else 0.0) for p in phases}
    return OutsideReport(run_hash, S, n, k, freq, len(drift_seeds), len(seeds))


# -- Deterministic matrix inequalities ----------------------------------------

@dataclass
class InequalityReport:
    config_hash: str
    passed: bool
    lhs: float
    rhs: float
    T: int
    gamma: float

    def to_dict(self) -> dict:
        return _report_dict(self)


def _trajectory(arms, L):
    X = np.asarray(arms, dtype=float)
    if X.ndim != 2 or len(X) == 0:
        raise ValueError("trajectory must be a non-empty (T, d) array")
    if np.any(np.linalg.norm(X, axis=1) > L * (1 + 1e-12)):
        raise ValueError("arm norm exceeds L")
    return X


def _traj_hash(X, gamma, lam, L):
    return config_hash(dict(arms=X.tolist(), gamma=gamma, lam=lam, L=L))


def check_elliptical_potential(arms, gamma: float, lam: float, L: float) -> InequalityReport:
    """sum_t |x_t|^2_{V_t^-1} <= 2 max(1, L^2/lam) (d T log(1/gamma) + log(det V_{T+1} / lam^d))."""
    X = _trajectory(arms, L)
    T, d = X.shape
    st = DiscountedState(d, lam, gamma)
    lhs = 0.0
    for x in X:
        lhs += st.mahalanobis_inv(x) ** 2
        st.update(x, 0.0)
    _, logdet = np.linalg.slogdet(st.V)
    rhs = 2 * max(1.0, L**2 / lam) * (d * T * math.log(1 / gamma) + logdet - d * math.log(lam))
    return InequalityReport(_traj_hash(X, gamma, lam, L), bool(lhs <= rhs), float(lhs), float(rhs), T, gamma)


def check_determinant_trace(arms, gamma: float, lam: float, L: float) -> InequalityReport:
    """det V_{t+1} <= (lam + L^2 (1 - gamma^t) / (d (1 - gamma)))^d for every t, compared in log space.

    Reports the worst slack as lhs - rhs = max_t (log det - log bound), rhs = 0.
    """
    X = _trajectory(arms, L)
    T, d = X.shape
    st = DiscountedState(d, lam, gamma)
    worst = -math.inf
    for t, x in enumerate(X, start=1):
        st.update(x, 0.0)
        _, logdet = np.linalg.slogdet(st.V)
        geo = -math.expm1(t * math.log(gamma)) / -math.expm1(math.log(gamma)) if gamma < 1 else float(t)
        bound = d * math.log(lam + L**2 * geo / d)
        worst = max(worst, logdet - bound)
    return InequalityReport(_traj_hash(X, gamma, lam, L), bool(worst <= DET_LOG_TOL), float(worst), 0.0, T, gamma)


def random_trajectory(rng: np.random.Generator, T: int, d: int, L: float) -> np.ndarray:
    """Arms with uniform directions and norms uniform in [0, L]."""
    G = rng.standard_normal((T, d))
    G /= np.linalg.norm(G, axis=1, keepdims=True)
    return G * (L * rng.uniform(0.0, 1.0, size=(T, 1)))


# -- Suite used by the CLI ----------------------------------------------------

def run_suite(*, M: int = 200, seed: int = 0, trajectories: int = 100, horizon: int = 300) -> dict:
    """All diagnostics at their default settings, as JSON-ready dicts."""
    out = {}
    T_cov = 200
    sched = rotating(T_cov)
    g = tune_gamma(variation_budget(sched), 2, T_cov)
    cfg = ProblemConfig(d=2, gamma=g, delta=0.1)
    out["coverage"] = check_confidence_coverage(cfg, M, seed=seed).to_dict()

    rng = make_rng(seed, "policy")
    ell, det = [], []
    for gamma in (0.9, 0.99, 0.999):
        for _ in range(trajectories):
            d = int(rng.integers(1, 6))
            lam = float(rng.uniform(0.1, 2.0))
            X = random_trajectory(rng, 500, d, 1.0)
            ell.append(check_elliptical_potential(X, gamma, lam, 1.0))
            det.append(check_determinant_trace(X, gamma, lam, 1.0))
    out["elliptical_potential"] = {"runs": len(ell), "failures": sum(not r.passed for r in ell),
                                   "config_hash": config_hash([r.config_hash for r in ell])}
    out["determinant_trace"] = {"runs": len(det), "failures": sum(not r.passed for r in det),
                                "config_hash": config_hash([r.config_hash for r in det])}

    one_d = DriftSchedule("piecewise_constant", horizon, 1, switches=(1, horizon // 2 + 1), thetas=((0.9,), (-0.9,)))
    cfg1 = ProblemConfig(d=1, gamma=tune_gamma(1.8, 1, horizon))
    out["lemma4_exact1d"] = check_lemma4_dominance(collect_oracle_trace(cfg1, one_d, seed, solver="exact1d")).to_dict()
    sched2 = rotating(horizon)
    cfg2 = ProblemConfig(d=2, gamma=tune_gamma(variation_budget(sched2), 2, horizon))
    out["lemma4_orthogonal"] = check_lemma4_dominance(
        collect_oracle_trace(cfg2, sched2, seed, arm_mode="orthogonal")).to_dict()
    return out
