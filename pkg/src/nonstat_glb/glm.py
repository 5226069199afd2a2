"""Inverse link functions and the curvature constants k_mu, c_mu, R_mu."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.special import expit

LINK_KINDS = ("logistic", "identity")

# number of grid points for the derivative scan; odd so that z = 0 is on the grid
GRID_POINTS = 10_001


@dataclass(frozen=True)
class LinkSpec:
    kind: str
    mu: Callable[[np.ndarray], np.ndarray]
    dmu: Callable[[np.ndarray], np.ndarray]
    b: Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class LinkConstants:
    k_mu: float
    c_mu: float

    @property
    def r_mu(self) -> float:
        return self.k_mu / self.c_mu


def _logistic_dmu(z):
    # expit(z) * expit(-z) keeps full relative precision in the tails
    return expit(z) * expit(-np.asarray(z, dtype=float))


def _logistic_b(z):
    # max(z, 0) + log(1 + exp(-|z|)), overflow-free
    return np.logaddexp(0.0, z)


def _identity(z):
    return np.asarray(z, dtype=float) * 1.0


def _identity_dmu(z):
    return np.ones_like(np.asarray(z, dtype=float))


def _identity_b(z):
    z = np.asarray(z, dtype=float)
    return 0.5 * z * z


def make_link(kind: str) -> LinkSpec:
    if kind == "logistic":
        return LinkSpec("logistic", expit, _logistic_dmu, _logistic_b)
    if kind == "identity":
        return LinkSpec("identity", _identity, _identity_dmu, _identity_b)
    raise ValueError(f"unknown link kind {kind!r}; expected one of {LINK_KINDS}")


def scan_constants(link: LinkSpec, S: float, L: float, n: int = GRID_POINTS) -> LinkConstants:
    """Grid-scan sup and inf of the link derivative over [-S*L, S*L]."""
    z = np.linspace(-S * L, S * L, n)
    vals = link.dmu(z)
    c_mu = float(vals.min())
    if c_mu <= 0:
        raise ValueError(f"link {link.kind!r} has non-positive derivative on the box (min {c_mu})")
    return LinkConstants(k_mu=float(vals.max()), c_mu=c_mu)


def compute_constants(link: LinkSpec, S: float, L: float) -> LinkConstants:
    if S <= 0 or L <= 0:
        raise ValueError("S and L must be positive")
    if link.kind == "identity":
        return LinkConstants(1.0, 1.0)
    if link.kind == "logistic":
        # dmu is even and unimodal: max at 0, min at the edge of the box
        c_mu = float(_logistic_dmu(S * L))
        if c_mu <= 0:
            raise ValueError(f"logistic derivative underflows at S*L = {S * L}")
        return LinkConstants(k_mu=0.25, c_mu=c_mu)
    return scan_constants(link, S, L)
