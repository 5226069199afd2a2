"""Generalized linear bandits under parameter drift (BVD-GLM-UCB and baselines)."""
from .bob import Exp3State, exp3_probabilities, exp3_update, make_grid, run_bob
from .design import AssumptionViolation, DiscountedState
from .envs import DriftSchedule, Environment, rotating, theta_star, variation_budget
from .estimator import ConvergenceError, fit_qmle, g_inverse, g_map, theta_bar_oracle
from .glm import compute_constants, make_link
from .policies import BvdGlmUcb, GlmUcb, LinUcb, Oful, make_baseline, make_policy, tune_gamma
from .problem import ProblemConfig
from .projection import ProjectionOutcome, beta, project
from .records import RoundRecord

__version__ = "0.1.0"

__all__ = [
    "AssumptionViolation", "BvdGlmUcb", "ConvergenceError", "DiscountedState", "DriftSchedule", "Environment",
    "Exp3State", "GlmUcb", "LinUcb", "Oful", "ProblemConfig", "ProjectionOutcome", "RoundRecord", "beta",
    "compute_constants", "exp3_probabilities", "exp3_update", "fit_qmle", "g_inverse", "g_map", "make_baseline",
    "make_grid", "make_link", "make_policy", "project", "rotating", "run_bob", "theta_bar_oracle", "theta_star",
    "tune_gamma", "variation_budget",
]
