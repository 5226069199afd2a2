"""Confidence radius, confidence-set membership and the projection programs.

The generalized projection solves

    min_{|theta'| <= S, |eta| <= 1}  | g_t(theta') + beta Vtilde^{1/2} eta - g_t(theta_hat) |_{V^{-2}}

jointly in (theta', eta).  The theta' component is an admissible parameter
lying in the confidence set of theta_p = g_t^{-1}(g_t(theta') + beta Vtilde^{1/2} eta),
and theta_p is reconstructed so callers can check that certificate.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .design import DiscountedState
from .estimator import g_inverse, g_jacobian, g_map
from .glm import LinkSpec
from .problem import ProblemConfig

PG_TOL = 1e-8
PG_MAX_ITER = 500
ARMIJO_C = 1e-4
STEP_MIN, STEP_MAX = 1e-10, 1e10
# relative projected-gradient level accepted once the objective is flat to machine precision
ROUNDOFF_PG = 1e-6


@dataclass(frozen=True)
class ConfidenceRadius:
    beta: float
    ridge: float
    deviation: float


def discounted_count(t: int, gamma: float) -> float:
    """(1 - gamma^(2t)) / (1 - gamma^2), with its limit t at gamma = 1."""
    if gamma >= 1.0:
        return float(t)
    lg = math.log(gamma)
    return math.expm1(2 * t * lg) / math.expm1(2 * lg)


def beta(t: int, cfg: ProblemConfig, c_mu: float) -> ConfidenceRadius:
    if t < 1:
        raise ValueError("t must be >= 1")
    ridge = math.sqrt(cfg.lam) * c_mu * cfg.S
    inner = 2 * math.log(1 / cfg.delta) + cfg.d * math.log1p(
        cfg.L**2 * discounted_count(t, cfg.gamma) / (cfg.lam * cfg.d)
    )
    dev = cfg.sigma * math.sqrt(inner)
    return ConfidenceRadius(beta=ridge + dev, ridge=ridge, deviation=dev)


def in_confidence_set(state: DiscountedState, link: LinkSpec, c_mu: float, center, candidate, beta: float) -> bool:
    gap = g_map(state, link, c_mu, candidate) - g_map(state, link, c_mu, center)
    return state.mahalanobis_tilde_inv(gap) <= beta


def project_ball(v: np.ndarray, radius: float) -> np.ndarray:
    n = float(np.linalg.norm(v))
    if n <= radius:
        return v
    return v * (radius / n)


@dataclass
class SolverTrace:
    objectives: list[float] = field(default_factory=list)
    iterations: int = 0
    converged: bool = False
    pg_norm: float = float("nan")


def spg_minimize(fun_grad, project, z0, tol=PG_TOL, max_iter=PG_MAX_ITER, step0=1.0):
    """Monotone spectral projected gradient with Armijo backtracking.

    ``fun_grad(z) -> (f, grad)``; ``project(z)`` is the Euclidean projection
    onto the (convex) feasible set.  The first trial step is ``step0`` and
    later ones are Barzilai-Borwein steps.  Stops when the projected-gradient
    norm drops below ``tol``, or when the objective stops changing at
    round-off level; the latter counts as converged only if the projected
    gradient is small relative to the gradient itself.  Returns (z, f, trace).
    """
    z = project(np.asarray(z0, dtype=float))
    f, grad = fun_grad(z)
    trace = SolverTrace(objectives=[f])
    alpha = step0

    def finish(it, z, grad):
        trace.pg_norm = float(np.linalg.norm(project(z - grad) - z))
        trace.iterations = it
        trace.converged = trace.pg_norm <= max(tol, ROUNDOFF_PG * float(np.linalg.norm(grad)))
        return trace

    for it in range(max_iter):
        pg_norm = float(np.linalg.norm(project(z - grad) - z))
        if pg_norm <= tol:
            trace.pg_norm, trace.iterations, trace.converged = pg_norm, it, True
            return z, f, trace
        d = project(z - alpha * grad) - z
        slope = float(grad @ d)
        if slope >= 0:
            return z, f, finish(it, z, grad)
        lam = 1.0
        while True:
            cand = z + lam * d
            fc, gc = fun_grad(cand)
            if fc <= f + ARMIJO_C * lam * slope:
                break
            lam *= 0.5
            if lam < 1e-14:
                return z, f, finish(it, z, grad)
        s, y = cand - z, gc - grad
        sy = float(s @ y)
        alpha = float(np.clip((s @ s) / sy, STEP_MIN, STEP_MAX)) if sy > 0 else STEP_MAX
        stalled = f - fc <= 1e-14 * abs(f)
        z, f, grad = cand, fc, gc
        trace.objectives.append(f)
        if stalled:
            return z, f, finish(it + 1, z, grad)
    return z, f, finish(max_iter, z, grad)


@dataclass
class ProjectionOutcome:
    theta_tilde: np.ndarray
    eta: np.ndarray
    objective: float
    theta_p: np.ndarray
    solver_iters: int
    converged: bool
    fast_path: bool
    beta: float
    trace: SolverTrace | None = None

    def certificate_gap(self, state: DiscountedState, link: LinkSpec, c_mu: float) -> float:
        """|g(theta_tilde) - g(theta_p)|_{Vtilde^{-1}} / beta; at most 1 when the certificate holds."""
        gap = g_map(state, link, c_mu, self.theta_tilde) - g_map(state, link, c_mu, self.theta_p)
        return state.mahalanobis_tilde_inv(gap) / self.beta


def p2_objective(state, link, c_mu, theta_hat, beta, theta_prime, eta) -> float:
    r = g_map(state, link, c_mu, theta_prime) + beta * (state.sqrt_tilde() @ eta) - g_map(state, link, c_mu, theta_hat)
    return state.mahalanobis_inv2(r)


def project(
    state: DiscountedState,
    link: LinkSpec,
    c_mu: float,
    theta_hat,
    beta: float,
    S: float,
    tol: float = PG_TOL,
    max_iter: int = PG_MAX_ITER,
) -> ProjectionOutcome:
    """Generalized projection of ``theta_hat`` onto the S-ball."""
    if not beta > 0:
        raise ValueError("beta must be > 0")
    theta_hat = np.asarray(theta_hat, dtype=float)
    d = state.d
    nrm = float(np.linalg.norm(theta_hat))
    if nrm <= S:
        return ProjectionOutcome(
            theta_tilde=theta_hat.copy(), eta=np.zeros(d), objective=0.0, theta_p=theta_hat.copy(),
            solver_iters=0, converged=True, fast_path=True, beta=beta,
        )

    Q = state.sqrt_tilde()
    g_hat = g_map(state, link, c_mu, theta_hat)

    def fun_grad(z):
        th, eta = z[:d], z[d:]
        r = g_map(state, link, c_mu, th) + beta * (Q @ eta) - g_hat
        u = state.solve_V(r)  # V^{-1} r
        w = state.solve_V(u)  # V^{-2} r
        J = g_jacobian(state, link, c_mu, th)
        return float(u @ u), np.concatenate([2.0 * (J @ w), 2.0 * beta * (Q @ w)])

    def proj(z):
        return np.concatenate([project_ball(z[:d], S), project_ball(z[d:], 1.0)])

    th0 = theta_hat * (S / nrm)
    eta0 = project_ball(state.inv_sqrt_tilde() @ (g_hat - g_map(state, link, c_mu, th0)) / beta, 1.0)
    z, f, trace = spg_minimize(fun_grad, proj, np.concatenate([th0, eta0]), tol=tol, max_iter=max_iter)
    theta_tilde, eta = z[:d], z[d:]
    target = g_map(state, link, c_mu, theta_tilde) + beta * (Q @ eta)
    theta_p = g_inverse(state, link, c_mu, target, theta0=theta_hat)
    return ProjectionOutcome(
        theta_tilde=theta_tilde, eta=eta, objective=math.sqrt(max(f, 0.0)), theta_p=theta_p,
        solver_iters=trace.iterations, converged=trace.converged, fast_path=False, beta=beta, trace=trace,
    )


def project_p0(
    state: DiscountedState,
    link: LinkSpec,
    c_mu: float,
    theta_hat,
    S: float,
    tol: float = PG_TOL,
    max_iter: int = PG_MAX_ITER,
) -> tuple[np.ndarray, SolverTrace | None]:
    """Stationary projection: argmin_{|theta| <= S} |g(theta) - g(theta_hat)|_{Vtilde^{-1}}."""
    theta_hat = np.asarray(theta_hat, dtype=float)
    nrm = float(np.linalg.norm(theta_hat))
    if nrm <= S:
        return theta_hat.copy(), None
    g_hat = g_map(state, link, c_mu, theta_hat)
    C = state.chol_Vtilde

    def fun_grad(th):
        r = g_map(state, link, c_mu, th) - g_hat
        w = np.linalg.solve(C.T, np.linalg.solve(C, r))  # Vtilde^{-1} r
        return float(r @ w), 2.0 * (g_jacobian(state, link, c_mu, th) @ w)

    th, _, trace = spg_minimize(fun_grad, lambda v: project_ball(v, S), theta_hat * (S / nrm), tol, max_iter)
    return th, trace
