"""Discounted design matrices and the weighted observation history."""
from __future__ import annotations

import numpy as np
from scipy.linalg import solve_triangular

MIN_LAMBDA = 1e-8


class AssumptionViolation(ValueError):
    """An arm or reward falls outside the bounds the model was configured with."""


class DiscountedState:
    """V_t, Vtilde_t and the history {(x_s, r_{s+1}, gamma^(t-1-s))}.

    V_t      = sum_s gamma^(t-1-s) x_s x_s^T + lam I
    Vtilde_t = sum_s gamma^(2(t-1-s)) x_s x_s^T + lam I

    Weights are stored as the integer round of each observation and
    materialised as gamma ** age on demand.  ``gamma == 1`` is accepted so
    that the stationary baselines can share the machinery.
    """

    def __init__(
        self,
        d: int,
        lam: float,
        gamma: float,
        *,
        reward_max: float | None = None,
        arm_bound: float | None = None,
        weight_floor: float | None = None,
    ):
        if d < 1:
            raise ValueError("d must be >= 1")
        if not lam > 0:
            raise ValueError("lambda must be > 0")
        if lam < MIN_LAMBDA:
            raise ValueError(f"lambda must be >= {MIN_LAMBDA}")
        if not 0.0 < gamma <= 1.0:
            raise ValueError("gamma must lie in (0, 1]")
        self.d = int(d)
        self.lam = float(lam)
        self.gamma = float(gamma)
        self.reward_max = reward_max
        self.arm_bound = arm_bound
        self.weight_floor = weight_floor

        self.t = 1
        self.V = lam * np.eye(d)
        self.Vtilde = lam * np.eye(d)
        self._X = np.empty((16, d))
        self._r = np.empty(16)
        self._s = np.empty(16, dtype=np.int64)
        self._n = 0
        self._start = 0
        self._cache: dict = {}

    # -- history views -------------------------------------------------
    @property
    def n_obs(self) -> int:
        return self._n - self._start

    @property
    def X(self) -> np.ndarray:
        return self._X[self._start:self._n]

    @property
    def rewards(self) -> np.ndarray:
        return self._r[self._start:self._n]

    @property
    def rounds(self) -> np.ndarray:
        return self._s[self._start:self._n]

    @property
    def weights(self) -> np.ndarray:
        w = self._cache.get("w")
        if w is None:
            ages = (self.t - 1) - self.rounds
            w = self.gamma ** ages.astype(float)
            self._cache["w"] = w
        return w

    @property
    def weighted_reward_sum(self) -> np.ndarray:
        """sum_s w_s r_{s+1} x_s"""
        return self.X.T @ (self.weights * self.rewards)

    # -- mutation --------------------------------------------------------
    def update(self, x, r: float) -> "DiscountedState":
        x = np.asarray(x, dtype=float).reshape(-1)
        if x.shape[0] != self.d:
            raise ValueError(f"arm has dimension {x.shape[0]}, expected {self.d}")
        if self.arm_bound is not None and np.linalg.norm(x) > self.arm_bound * (1 + 1e-12):
            raise AssumptionViolation(f"arm norm {np.linalg.norm(x):.6g} exceeds L={self.arm_bound}")
        if self.reward_max is not None and not (0.0 <= r <= self.reward_max):
            raise AssumptionViolation(f"reward {r} outside [0, {self.reward_max}]")

        g, lam = self.gamma, self.lam
        xx = np.outer(x, x)
        self.V = g * self.V + xx + (1.0 - g) * lam * np.eye(self.d)
        self.Vtilde = g * g * (self.Vtilde - lam * np.eye(self.d)) + xx + lam * np.eye(self.d)

        if self._n == self._X.shape[0]:
            self._grow()
        self._X[self._n] = x
        self._r[self._n] = r
        self._s[self._n] = self.t
        self._n += 1
        self.t += 1
        self._cache.clear()
        if self.weight_floor is not None:
            self._drop_light()
        return self

    def _grow(self):
        live = self._n - self._start
        cap = max(16, 2 * live)
        X, r, s = np.empty((cap, self.d)), np.empty(cap), np.empty(cap, dtype=np.int64)
        X[:live] = self.X
        r[:live] = self.rewards
        s[:live] = self.rounds
        self._X, self._r, self._s = X, r, s
        self._n, self._start = live, 0

    def _drop_light(self):
        w = self.weights
        k = int(np.searchsorted(w, self.weight_floor))  # weights increase along the history
        if k:
            self._start += k
            self._cache.clear()

    def copy(self) -> "DiscountedState":
        other = DiscountedState.__new__(DiscountedState)
        other.__dict__.update(self.__dict__)
        other.V = self.V.copy()
        other.Vtilde = self.Vtilde.copy()
        other._X = self._X.copy()
        other._r = self._r.copy()
        other._s = self._s.copy()
        other._cache = {}
        return other

    # -- from-scratch recomputation (used by invariants / tests) ---------
    def definitional_matrices(self) -> tuple[np.ndarray, np.ndarray]:
        X, w = self.X, self.weights
        eye = self.lam * np.eye(self.d)
        return X.T @ (w[:, None] * X) + eye, X.T @ ((w * w)[:, None] * X) + eye

    # -- factorizations --------------------------------------------------
    def _chol(self, key: str, M: np.ndarray) -> np.ndarray:
        c = self._cache.get(key)
        if c is None:
            c = np.linalg.cholesky(M)
            self._cache[key] = c
        return c

    @property
    def chol_V(self) -> np.ndarray:
        return self._chol("cV", self.V)

    @property
    def chol_Vtilde(self) -> np.ndarray:
        return self._chol("cVt", self.Vtilde)

    def _check_dim(self, v: np.ndarray, axis: int = -1):
        if v.shape[axis] != self.d:
            raise ValueError(f"vector has dimension {v.shape[-1]}, expected {self.d}")

    def _inv_quad(self, chol: np.ndarray, v) -> np.ndarray | float:
        v = np.asarray(v, dtype=float)
        self._check_dim(v)
        # ||v||_{M^{-1}} = ||C^{-1} v|| with M = C C^T
        z = solve_triangular(chol, v.T, lower=True, check_finite=False)
        out = np.sqrt(np.sum(z * z, axis=0))
        return float(out) if v.ndim == 1 else out

    def mahalanobis_inv(self, x) -> np.ndarray | float:
        """||x||_{V^{-1}}; accepts one vector or a stack of row vectors."""
        return self._inv_quad(self.chol_V, x)

    def mahalanobis_tilde_inv(self, v) -> np.ndarray | float:
        """||v||_{Vtilde^{-1}}"""
        return self._inv_quad(self.chol_Vtilde, v)

    def solve_V(self, v) -> np.ndarray:
        """V^{-1} v for a vector or for each column of a (d, k) matrix."""
        v = np.asarray(v, dtype=float)
        self._check_dim(v, axis=0)
        c = self.chol_V
        y = solve_triangular(c, v, lower=True, check_finite=False)
        return solve_triangular(c.T, y, lower=False, check_finite=False)

    def mahalanobis_inv2(self, v) -> float:
        """||v||_{V^{-2}} = ||V^{-1} v||_2"""
        return float(np.linalg.norm(self.solve_V(v)))

    def sqrt_tilde(self) -> np.ndarray:
        s = self._cache.get("sqrtVt")
        if s is None:
            evals, evecs = np.linalg.eigh(self.Vtilde)
            s = (evecs * np.sqrt(evals)) @ evecs.T
            s = 0.5 * (s + s.T)
            self._cache["sqrtVt"] = s
        return s

    def inv_sqrt_tilde(self) -> np.ndarray:
        s = self._cache.get("isqrtVt")
        if s is None:
            evals, evecs = np.linalg.eigh(self.Vtilde)
            s = (evecs / np.sqrt(evals)) @ evecs.T
            s = 0.5 * (s + s.T)
            self._cache["isqrtVt"] = s
        return s
