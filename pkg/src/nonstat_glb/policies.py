"""BVD-GLM-UCB and the GLM-UCB / OFUL / D-LinUCB baselines."""
from __future__ import annotations

import logging
import math

import numpy as np

from .design import DiscountedState
from .estimator import fit_qmle
from .glm import LinkSpec, compute_constants, make_link
from .problem import ProblemConfig
from .projection import PG_MAX_ITER, PG_TOL, ProjectionOutcome, beta, project, project_p0

log = logging.getLogger(__name__)

GAMMA_FLOOR = 0.5
GAMMA_CEIL = 1 - 1e-6


def tune_gamma(B_T: float, d: int, T: int, mode: str = "orthogonal") -> float:
    """Discount factor recommended by the regret analysis, clamped to [0.5, 1 - 1e-6]."""
    if not B_T > 0:
        raise ValueError("B_T must be > 0")
    if T < 1:
        raise ValueError("T must be >= 1")
    if mode == "orthogonal":
        g = 1 - (B_T / (d * T)) ** (2 / 3)
    elif mode == "general":
        g = 1 - (B_T / (math.sqrt(d) * T)) ** (2 / 5)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return min(max(g, GAMMA_FLOOR), GAMMA_CEIL)


def _as_arm_matrix(arms, d: int, L: float) -> np.ndarray:
    A = np.asarray(arms, dtype=float)
    if A.ndim == 1:
        A = A.reshape(-1, d)
    if A.shape[0] == 0:
        raise ValueError("empty arm set")
    if A.shape[1] != d:
        raise ValueError(f"arms have dimension {A.shape[1]}, expected {d}")
    if np.any(np.linalg.norm(A, axis=1) > L * (1 + 1e-12)):
        raise ValueError(f"arm norm exceeds L={L}")
    return A


class Policy:
    """Common interface: ``choose(arm_set) -> index`` then ``observe(arm, reward)``.

    Ties in ``choose`` go to the lowest index.
    """

    name = "policy"

    def __init__(self, cfg: ProblemConfig):
        self.cfg = cfg
        self.t = 1

    def scores(self, arms: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def choose(self, arm_set) -> int:
        A = _as_arm_matrix(arm_set, self.cfg.d, self.cfg.L)
        return int(np.argmax(self.scores(A)))

    def observe(self, arm, reward: float) -> None:
        raise NotImplementedError

    @property
    def theta_hat(self) -> np.ndarray:
        raise NotImplementedError


class BvdGlmUcb(Policy):
    """Optimistic GLM policy with discounted quasi-MLE and the generalized projection.

    Arms are scored as mu(<x, theta_tilde>) + 2 R_mu beta_t ||x||_{V^{-1}}, where
    theta_tilde is the admissible parameter returned by the projection step.
    """

    name = "bvd_glm_ucb"

    def __init__(
        self,
        cfg: ProblemConfig,
        link: LinkSpec | str = "logistic",
        *,
        projection_tol: float = PG_TOL,
        projection_max_iter: int = PG_MAX_ITER,
        weight_floor: float | None = None,
    ):
        super().__init__(cfg)
        self.link = make_link(link) if isinstance(link, str) else link
        self.constants = compute_constants(self.link, cfg.S, cfg.L)
        self.c_mu = self.constants.c_mu
        self.r_mu = self.constants.r_mu
        self.projection_tol = projection_tol
        self.projection_max_iter = projection_max_iter
        self.state = DiscountedState(
            cfg.d, cfg.lam, cfg.gamma, reward_max=2 * cfg.sigma, arm_bound=cfg.L, weight_floor=weight_floor
        )
        self._theta_hat = np.zeros(cfg.d)
        self.theta_tilde = np.zeros(cfg.d)
        self.last_projection: ProjectionOutcome | None = None
        self.last_fit = None
        self.unconverged_fits = 0
        self.beta = beta(1, cfg, self.c_mu).beta

    @property
    def theta_hat(self) -> np.ndarray:
        return self._theta_hat

    @property
    def bonus_scale(self) -> float:
        return 2 * self.r_mu * self.beta

    def scores(self, arms: np.ndarray) -> np.ndarray:
        means = self.link.mu(arms @ self.theta_tilde)
        return means + self.bonus_scale * self.state.mahalanobis_inv(arms)

    def observe(self, arm, reward: float) -> None:
        self.state.update(arm, reward)
        self.t = self.state.t
        fit = fit_qmle(self.state, self.link, self.c_mu, theta0=self._theta_hat)
        if not fit.converged:
            self.unconverged_fits += 1
            log.warning("%s: QMLE not converged at t=%d (|grad|=%.2e after %d its)",
                        self.name, self.t, fit.grad_norm, fit.iterations)
        self.last_fit = fit
        self._theta_hat = fit.theta_hat
        self.beta = beta(self.t, self.cfg, self.c_mu).beta
        self.theta_tilde = self._project()

    def _project(self) -> np.ndarray:
        out = project(
            self.state, self.link, self.c_mu, self._theta_hat, self.beta, self.cfg.S,
            tol=self.projection_tol, max_iter=self.projection_max_iter,
        )
        self.last_projection = out
        return out.theta_tilde


class GlmUcb(BvdGlmUcb):
    """Undiscounted GLM-UCB: gamma = 1 and projection onto the S-ball in the Vtilde^{-1} g-metric."""

    name = "glm_ucb"

    def __init__(self, cfg: ProblemConfig, link: LinkSpec | str = "logistic", **kw):
        super().__init__(cfg.with_(gamma=1.0), link, **kw)

    def _project(self) -> np.ndarray:
        th, _ = project_p0(
            self.state, self.link, self.c_mu, self._theta_hat, self.cfg.S,
            tol=self.projection_tol, max_iter=self.projection_max_iter,
        )
        return th


class LinUcb(Policy):
    """Discounted ridge regression with optimistic bonus (D-LinUCB; OFUL when gamma = 1).

    The bonus is beta_t ||x||_{V^{-1} Vtilde V^{-1}}, computed with k_mu = c_mu = 1.
    At gamma = 1, Vtilde = V and this is exactly the OFUL bonus beta_t ||x||_{V^{-1}}.
    """

    name = "d_linucb"

    def __init__(self, cfg: ProblemConfig):
        super().__init__(cfg)
        self.state = DiscountedState(cfg.d, cfg.lam, cfg.gamma, reward_max=2 * cfg.sigma, arm_bound=cfg.L)
        self._theta_hat = np.zeros(cfg.d)
        self.beta = beta(1, cfg, 1.0).beta

    @property
    def theta_hat(self) -> np.ndarray:
        return self._theta_hat

    @property
    def theta_tilde(self) -> np.ndarray:
        return self._theta_hat

    @property
    def bonus_scale(self) -> float:
        return self.beta

    def scores(self, arms: np.ndarray) -> np.ndarray:
        Y = self.state.solve_V(arms.T)  # columns V^{-1} x
        width = np.sqrt(np.einsum("ij,ij->j", Y, self.state.Vtilde @ Y))
        return arms @ self._theta_hat + self.beta * width

    def observe(self, arm, reward: float) -> None:
        self.state.update(arm, reward)
        self.t = self.state.t
        self._theta_hat = self.state.solve_V(self.state.weighted_reward_sum)
        self.beta = beta(self.t, self.cfg, 1.0).beta


class Oful(LinUcb):
    name = "oful"

    def __init__(self, cfg: ProblemConfig):
        super().__init__(cfg.with_(gamma=1.0))


BASELINES = {"glm_ucb": GlmUcb, "oful": Oful, "d_linucb": LinUcb}


def make_baseline(kind: str, cfg: ProblemConfig, link: LinkSpec | str = "logistic", **kw) -> Policy:
    """Build one of the comparison policies.

    ``cfg.gamma`` is ignored by glm_ucb and oful (both undiscounted); d_linucb
    uses it as its discount.
    """
    if kind == "glm_ucb":
        return GlmUcb(cfg, link, **kw)
    if kind == "oful":
        return Oful(cfg)
    if kind == "d_linucb":
        return LinUcb(cfg)
    raise ValueError(f"unknown baseline {kind!r}; expected one of {sorted(BASELINES)}")


POLICY_KINDS = ("bvd_glm_ucb", "glm_ucb", "oful", "d_linucb")


def make_policy(kind: str, cfg: ProblemConfig, link: LinkSpec | str = "logistic", **kw) -> Policy:
    if kind == "bvd_glm_ucb":
        return BvdGlmUcb(cfg, link, **kw)
    return make_baseline(kind, cfg, link, **kw)
