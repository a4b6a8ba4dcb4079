"""Regret estimators and level-scoring functions.

Three approximations of per-level regret drive the curricula: the
antagonist-minus-protagonist return gap, its role-free absolute variant,
and the positive value loss computed from TD errors. ``true_regret``
measures the real thing against the exact oracle.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import oracle
from .levels import MazeLevel

ESTIMATORS = ("relative_regret", "flexible_regret", "positive_value_loss", "true_regret")


@dataclass(frozen=True)
class LevelScore:
    value: float
    estimator: str
    level_hash: int
    step: int

    def __post_init__(self):
        if self.estimator not in ESTIMATORS:
            raise ValueError(f"unknown estimator {self.estimator!r}")
        if not np.isfinite(self.value):
            raise ValueError(f"non-finite score {self.value}")


def relative_regret(return_a: float, return_p: float) -> float:
    """Antagonist return minus protagonist return; may be negative."""
    return return_a - return_p


def flexible_regret(return_a: float, return_p: float):
    """Role-free regret: absolute gap, antagonist role to the higher scorer.

    Ties assign the antagonist role to A.
    """
    score = abs(return_a - return_p)
    role = "A" if return_a >= return_p else "P"
    return score, role


def positive_value_loss(deltas, gamma: float, lam: float) -> float:
    """Mean positive part of the discounted TD-error suffix sums.

    The suffix sums are evaluated by backward recursion; the brute-force
    double loop in the oracle module is the independent reference.
    """
    deltas = np.asarray(deltas, dtype=np.float64)
    T = len(deltas)
    if T == 0:
        return 0.0
    suffix = np.empty(T)
    acc = 0.0
    for t in range(T - 1, -1, -1):
        acc = deltas[t] + gamma * lam * acc
        suffix[t] = acc
    return float(np.maximum(suffix, 0.0).mean())


def true_regret(level: MazeLevel, policy, tmax: int = 250) -> float:
    """Optimal return minus the policy's exact value on this level."""
    return oracle.optimal_return(level, tmax) - oracle.exact_policy_value(
        level, policy, tmax=tmax)
