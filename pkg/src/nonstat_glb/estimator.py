"""Discounted quasi-maximum-likelihood estimation and the g_t map.

All functions are pure in the state: they read the history and the
design matrices of a :class:`DiscountedState` but never modify it.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .design import DiscountedState
from .glm import LinkSpec

GRAD_TOL = 1e-8
QMLE_MAX_ITER = 100
INVERSE_MAX_ITER = 200
ARMIJO_C = 1e-4


class ConvergenceError(RuntimeError):
    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (residual {residual:.3e})")
        self.residual = residual


@dataclass
class QmleResult:
    theta_hat: np.ndarray
    grad_norm: float
    iterations: int
    converged: bool


def g_map(state: DiscountedState, link: LinkSpec, c_mu: float, theta) -> np.ndarray:
    """g_t(theta) = sum_s w_s mu(<x_s, theta>) x_s + lam c_mu theta."""
    theta = np.asarray(theta, dtype=float)
    out = state.lam * c_mu * theta
    if state.n_obs:
        X = state.X
        out = out + X.T @ (state.weights * link.mu(X @ theta))
    return out


def g_jacobian(state: DiscountedState, link: LinkSpec, c_mu: float, theta) -> np.ndarray:
    """sum_s w_s mu'(<x_s, theta>) x_s x_s^T + lam c_mu I (also the QMLE Hessian)."""
    theta = np.asarray(theta, dtype=float)
    H = state.lam * c_mu * np.eye(state.d)
    if state.n_obs:
        X = state.X
        H = H + X.T @ ((state.weights * link.dmu(X @ theta))[:, None] * X)
    return H


def qmle_objective(state: DiscountedState, link: LinkSpec, c_mu: float, theta) -> float:
    theta = np.asarray(theta, dtype=float)
    val = 0.5 * state.lam * c_mu * float(theta @ theta)
    if state.n_obs:
        z = state.X @ theta
        val += float(state.weights @ (link.b(z) - state.rewards * z))
    return val


def _newton_minimize(state, link, c_mu, linear_term, theta0, max_iter):
    """Minimize sum_s w_s b(<x_s,theta>) + lam c_mu |theta|^2 / 2 - <linear_term, theta>.

    Newton with Armijo backtracking.  Returns (theta, grad_norm, iterations).
    """
    theta = np.array(theta0, dtype=float)
    lamc = state.lam * c_mu
    X, w = state.X, state.weights
    has_data = state.n_obs > 0

    def objective(th):
        val = 0.5 * lamc * float(th @ th) - float(linear_term @ th)
        if has_data:
            val += float(w @ link.b(X @ th))
        return val

    f = objective(theta)
    grad_norm = np.inf
    for it in range(max_iter + 1):
        z = X @ theta if has_data else None
        grad = lamc * theta - linear_term
        H = lamc * np.eye(state.d)
        if has_data:
            grad = grad + X.T @ (w * link.mu(z))
            H = H + X.T @ ((w * link.dmu(z))[:, None] * X)
        grad_norm = float(np.linalg.norm(grad))
        if grad_norm <= GRAD_TOL or it == max_iter:
            return theta, grad_norm, it
        step = -np.linalg.solve(H, grad)
        slope = float(grad @ step)
        if -slope <= 1e-13 * (1.0 + abs(f)):
            # predicted decrease below round-off: the line search cannot resolve it
            theta = theta + step
            f = objective(theta)
            continue
        a = 1.0
        while True:
            cand = theta + a * step
            fc = objective(cand)
            if fc <= f + ARMIJO_C * a * slope or a < 1e-12:
                break
            a *= 0.5
        theta, f = cand, fc
    return theta, grad_norm, max_iter


def fit_qmle(
    state: DiscountedState,
    link: LinkSpec,
    c_mu: float,
    theta0=None,
    max_iter: int = QMLE_MAX_ITER,
) -> QmleResult:
    """Discounted, ridge-penalised quasi-MLE.

    Minimizes sum_s w_s [b(<x_s,theta>) - r_{s+1} <x_s,theta>] + (lam c_mu / 2)|theta|^2,
    warm-started from ``theta0`` when given.
    """
    if theta0 is None:
        theta0 = np.zeros(state.d)
    target = state.weighted_reward_sum if state.n_obs else np.zeros(state.d)
    theta, gn, it = _newton_minimize(state, link, c_mu, target, theta0, max_iter)
    return QmleResult(theta_hat=theta, grad_norm=gn, iterations=it, converged=gn <= GRAD_TOL)


def g_inverse(state: DiscountedState, link: LinkSpec, c_mu: float, z, theta0=None) -> np.ndarray:
    """Solve g_t(theta) = z by damped Newton.

    Steps are halved until the residual norm decreases.  g_t is a bijection
    with Jacobian >= lam c_mu I, so failure to converge means a numerics bug.
    """
    z = np.asarray(z, dtype=float)
    lamc = state.lam * c_mu
    if not state.n_obs:
        return z / lamc
    theta = np.zeros(state.d) if theta0 is None else np.array(theta0, dtype=float)
    G = g_map(state, link, c_mu, theta) - z
    res = float(np.linalg.norm(G))
    for _ in range(INVERSE_MAX_ITER):
        if res <= GRAD_TOL:
            return theta
        step = -np.linalg.solve(g_jacobian(state, link, c_mu, theta), G)
        a = 1.0
        while True:
            cand = theta + a * step
            Gc = g_map(state, link, c_mu, cand) - z
            rc = float(np.linalg.norm(Gc))
            if rc < res or a < 1e-10:
                break
            a *= 0.5
        if rc >= res:
            # no decrease even for tiny steps: accept if at round-off level
            scale = 1.0 + float(np.linalg.norm(z)) + float(state.weights @ np.linalg.norm(state.X, axis=1))
            if res <= 1e-12 * scale:
                return theta
            raise ConvergenceError("g_inverse stalled", res)
        theta, G, res = cand, Gc, rc
    if res <= GRAD_TOL:
        return theta
    raise ConvergenceError("g_inverse did not converge", res)


def theta_bar_oracle(
    state: DiscountedState,
    link: LinkSpec,
    c_mu: float,
    true_params,
    theta_star_t,
) -> np.ndarray:
    """Noiseless tracking estimator.

    ``true_params[s]`` is the hidden parameter that generated the s-th stored
    observation.  Uses the stationarity identity
    g_t(theta_bar) = sum_s w_s mu(<x_s, theta*_s>) x_s + lam c_mu theta*_t.
    """
    P = np.asarray(true_params, dtype=float).reshape(-1, state.d) if len(true_params) else np.zeros((0, state.d))
    if P.shape[0] != state.n_obs:
        raise ValueError(f"got {P.shape[0]} true parameters for {state.n_obs} observations")
    theta_star_t = np.asarray(theta_star_t, dtype=float)
    z = state.lam * c_mu * theta_star_t
    if state.n_obs:
        X = state.X
        means = link.mu(np.einsum("ij,ij->i", X, P))
        z = z + X.T @ (state.weights * means)
    return g_inverse(state, link, c_mu, z, theta0=theta_star_t)
