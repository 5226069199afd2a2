from __future__ import annotations

from dataclasses import dataclass, replace


@dataclass(frozen=True)
class ProblemConfig:
    """Scalar hyperparameters shared by the estimator, the projection and the policies.

    ``gamma == 1`` denotes the undiscounted (stationary) machinery used by
    the GLM-UCB and OFUL baselines.
    """

    d: int
    S: float = 1.0
    L: float = 1.0
    sigma: float = 0.5
    lam: float = 1.0
    gamma: float = 0.99
    delta: float = 0.1
    T: int | None = None

    def __post_init__(self):
        if self.d < 1:
            raise ValueError("d must be >= 1")
        for name in ("S", "L", "lam"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")
        if not self.sigma >= 0:
            raise ValueError("sigma must be >= 0")
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError("gamma must lie in (0, 1]")
        if not 0.0 < self.delta <= 1.0:
            raise ValueError("delta must lie in (0, 1]")
        if self.T is not None and self.T < 1:
            raise ValueError("T must be >= 1")

    def with_(self, **changes) -> "ProblemConfig":
        return replace(self, **changes)
