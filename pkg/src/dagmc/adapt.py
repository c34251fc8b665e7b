"""Adaptation rules applied after each Metropolis step.

Covers the covariance recursions (plain and Rao-Blackwellised), the
acceptance-rate driven scaling rules, weight and mixing schedules and the
burn-in strategies that decide when any of it is switched on.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .linalg import chol_factor, rank1_update

__all__ = [
    "WeightSchedule",
    "MixSchedule",
    "BurninStrategy",
    "AlgorithmChoice",
    "AdaptState",
    "eta",
    "am_update",
    "rb_am_update",
    "ascm_update",
    "amcmc_scaling",
    "default_target_alpha",
    "mix_probability",
    "adaptation_active",
    "ALGORITHMS",
]


@dataclass(frozen=True)
class WeightSchedule:
    """Weights ``eta_n`` in (0, 1) for the stochastic-approximation updates.

    ``reciprocal`` gives ``1/(n+1)``, ``constant`` gives ``eta0`` and
    ``power`` gives ``(n+1)**-gamma``.
    """

    kind: str = "reciprocal"
    eta0: float = 0.01
    gamma: float = 0.6

    def __post_init__(self):
        if self.kind not in ("reciprocal", "constant", "power"):
            raise ValueError(f"unknown weight schedule {self.kind!r}")
        if self.kind == "constant" and not 0.0 < self.eta0 < 1.0:
            raise ValueError("constant weight must lie in (0, 1)")
        if self.kind == "power" and not 0.5 < self.gamma <= 1.0:
            raise ValueError("power schedule exponent must lie in (1/2, 1]")


@dataclass(frozen=True)
class MixSchedule:
    kind: str = "constant"
    p0: float = 0.0
    sequence: Optional[Callable[[int], float]] = field(default=None, compare=False)

    def __post_init__(self):
        if self.kind not in ("constant", "user_sequence"):
            raise ValueError(f"unknown mixing schedule {self.kind!r}")
        if self.kind == "constant" and not 0.0 <= self.p0 <= 1.0:
            raise ValueError("mixing probability must lie in [0, 1]")
        if self.kind == "user_sequence" and self.sequence is None:
            raise ValueError("user_sequence mixing needs a sequence function")


@dataclass(frozen=True)
class BurninStrategy:
    kind: str = "greedy"
    nburn: int = 0

    def __post_init__(self):
        if self.kind not in ("greedy", "traditional", "freeze"):
            raise ValueError(f"unknown burn-in strategy {self.kind!r}")
        if self.nburn < 0:
            raise ValueError("nburn must be non-negative")


# name -> (covariance rule, scaling rule)
ALGORITHMS = {
    "metropolis": ("none", "none"),
    "none": ("none", "none"),
    "am": ("am", "none"),
    "rbam": ("rb_am", "none"),
    "ascm": ("none", "ascm"),
    "am_ascm": ("am", "ascm"),
    "rbam_ascm": ("rb_am", "ascm"),
}


@dataclass(frozen=True)
class AlgorithmChoice:
    covariance_adapt: str = "none"
    scaling_adapt: str = "none"
    target_alpha: Optional[float] = None
    user_rule: Optional[Callable[[float, float, int, int], float]] = field(default=None, compare=False)

    def __post_init__(self):
        if self.covariance_adapt not in ("none", "am", "rb_am"):
            raise ValueError(f"unknown covariance adaptation {self.covariance_adapt!r}")
        if self.scaling_adapt not in ("none", "ascm", "amcmc_rule", "user_rule"):
            raise ValueError(f"unknown scaling adaptation {self.scaling_adapt!r}")
        if self.scaling_adapt == "user_rule" and self.user_rule is None:
            raise ValueError("scaling_adapt='user_rule' needs a rule")
        if self.target_alpha is not None and not 0.0 < self.target_alpha < 1.0:
            raise ValueError("target acceptance probability must lie in (0, 1)")

    @classmethod
    def from_name(cls, name: str, **kwargs) -> AlgorithmChoice:
        key = name.lower().replace("+", "_").replace("-", "_")
        if key not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {name!r}; expected one of {sorted(ALGORITHMS)}")
        cov, scale = ALGORITHMS[key]
        return cls(covariance_adapt=cov, scaling_adapt=scale, **kwargs)

    @property
    def adaptive(self) -> bool:
        return self.covariance_adapt != "none" or self.scaling_adapt != "none"


@dataclass
class AdaptState:
    """Per-block adaptation state.

    ``theta0`` and ``shape0`` keep the initial proposal, used by the
    mixture component and by the traditional burn-in.
    """

    theta: float
    shape: np.ndarray
    mean: np.ndarray
    step: int = 0
    theta0: float = None
    shape0: np.ndarray = None

    def __post_init__(self):
        self.shape = np.asarray(self.shape, dtype=float)
        self.mean = np.asarray(self.mean, dtype=float).reshape(-1)
        if self.shape.shape != (self.dim, self.dim):
            raise ValueError("shape and mean dimensions disagree")
        if self.theta0 is None:
            self.theta0 = self.theta
        if self.shape0 is None:
            self.shape0 = self.shape.copy()

    @property
    def dim(self) -> int:
        return self.mean.shape[0]

    @property
    def covariance(self) -> np.ndarray:
        return self.shape @ self.shape.T

    @classmethod
    def initial(cls, x0, theta0: float | None = None, cov0=None) -> AdaptState:
        """Start at ``M_0 = x0`` with ``theta0 = 2.38/sqrt(d)`` and identity shape by default."""
        x0 = np.array(x0, dtype=float).reshape(-1)
        d = x0.shape[0]
        if theta0 is None:
            theta0 = 2.38 / math.sqrt(d)
        if not theta0 > 0:
            raise ValueError("initial scaling must be positive")
        shape = np.eye(d) if cov0 is None else chol_factor(cov0)
        return cls(theta=float(theta0), shape=shape, mean=x0)


def eta(schedule: WeightSchedule, n: int) -> float:
    if schedule.kind == "reciprocal":
        return 1.0 / (n + 1)
    if schedule.kind == "constant":
        return schedule.eta0
    return (n + 1.0) ** (-schedule.gamma)


def am_update(state: AdaptState, x, eta_n: float) -> AdaptState:
    """Mean/covariance recursion with the innovation taken about the old mean."""
    x = np.asarray(x, dtype=float).reshape(-1)
    diff = x - state.mean
    mean = state.mean + eta_n * diff
    shape = rank1_update(state.shape, 1.0 - eta_n, eta_n, diff)
    return replace(state, mean=mean, shape=shape)


def rb_am_update(state: AdaptState, x_prev, y, alpha: float, eta_n: float) -> AdaptState:
    """Rao-Blackwellised recursion: both outcomes weighted by ``alpha``."""
    x_prev = np.asarray(x_prev, dtype=float).reshape(-1)
    y = np.asarray(y, dtype=float).reshape(-1)
    dy = y - state.mean
    dx = x_prev - state.mean
    mean = state.mean + eta_n * (alpha * dy + (1.0 - alpha) * dx)
    shape = rank1_update(state.shape, 1.0 - eta_n, eta_n * alpha, dy)
    shape = rank1_update(shape, 1.0, eta_n * (1.0 - alpha), dx)
    return replace(state, mean=mean, shape=shape)


def ascm_update(theta: float, alpha: float, eta_n: float, target_alpha: float) -> float:
    return theta * (1.0 + eta_n * (alpha / target_alpha - 1.0))


def amcmc_scaling(sc: float, alpha: float, k: int) -> float:
    """Fixed-size multiplicative step towards 44% acceptance, shrinking after 10^4 steps."""
    delta = 1.0 if alpha > 0.44 else -1.0
    return sc * math.exp(delta * min(0.01, 1.0 / math.sqrt(k + 1)))


def default_target_alpha(block_dim: int) -> float:
    return 0.44 if block_dim == 1 else 0.234


def mix_probability(schedule: MixSchedule, n: int) -> float:
    if schedule.kind == "constant":
        return schedule.p0
    p = float(schedule.sequence(n))
    if p != p:
        raise ValueError(f"mixing probability is NaN at n={n}")
    return min(1.0, max(0.0, p))


def adaptation_active(strategy: BurninStrategy, n: int) -> tuple[bool, bool]:
    """Return ``(update_params, use_initial_proposal)`` for iteration ``n``."""
    if strategy.kind == "greedy":
        return True, False
    burning = n <= strategy.nburn
    if strategy.kind == "traditional":
        return True, burning
    return burning, False
