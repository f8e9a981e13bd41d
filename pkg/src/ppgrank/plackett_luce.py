"""Plackett-Luce baseline: Gumbel-trick sampling, exact probability, and the
analytic log-derivative needed by the REINFORCE trainer.

Parameters are stored as log-strengths so that gradient steps can never
produce a non-positive strength.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .permutations import check_permutation

LOG_THETA_BOUND = 30.0


@dataclass(frozen=True)
class PlModel:
    """Sequential-softmax permutation distribution over n items."""

    log_theta: np.ndarray

    @property
    def n(self) -> int:
        return len(self.log_theta)

    @property
    def theta(self) -> np.ndarray:
        return np.exp(self.log_theta)

    @classmethod
    def uniform(cls, n: int) -> "PlModel":
        return cls(np.zeros(n))

    @classmethod
    def from_theta(cls, theta: Sequence[float]) -> "PlModel":
        arr = np.asarray(theta, dtype=float)
        if (arr <= 0).any() or not np.isfinite(arr).all():
            raise ValueError("strengths must be strictly positive and finite")
        return cls(np.log(arr))

    def deterministic_permutation(self) -> tuple[int, ...]:
        """Sort by strength, descending; ties keep index order."""
        return tuple(int(i) for i in np.argsort(-self.log_theta, kind="stable"))


def pl_log_probability(model: PlModel, b: Sequence[int]) -> float:
    perm = check_permutation(b)
    if len(perm) != model.n:
        raise ValueError(f"length mismatch: {len(perm)} vs {model.n}")
    theta = model.theta
    logp = 0.0
    remaining = float(theta.sum())
    for i in range(model.n - 1):
        logp += float(model.log_theta[perm[i]]) - math.log(remaining)
        remaining -= float(theta[perm[i]])
    return logp


def pl_probability(model: PlModel, b: Sequence[int]) -> float:
    """Product of stage-wise softmax picks; 1.0 for a single item."""
    return math.exp(pl_log_probability(model, b))


def pl_sample(model: PlModel, rng: np.random.Generator) -> tuple[int, ...]:
    """Draw one permutation: perturb log-strengths with Gumbel noise and sort."""
    keys = model.log_theta + rng.gumbel(size=model.n)
    return tuple(int(i) for i in np.argsort(-keys))


def pl_log_prob_gradient(model: PlModel, b: Sequence[int]) -> np.ndarray:
    """d log P(b) / d theta, one entry per item."""
    perm = check_permutation(b)
    if len(perm) != model.n:
        raise ValueError(f"length mismatch: {len(perm)} vs {model.n}")
    theta = model.theta
    grad = np.zeros(model.n)
    order = np.asarray(perm)
    suffix = float(theta.sum())
    for i in range(model.n - 1):
        grad[order[i]] += 1.0 / float(theta[order[i]])
        grad[order[i:]] -= 1.0 / suffix
        suffix -= float(theta[order[i]])
    return grad
