"""Fairness and ranking metrics over (multi-session) permutations.

A ranking policy is a sequence of sessions, each a permutation of the same
item list; exposure is the position discount an item collects, averaged over
sessions. Group fairness is measured either as the exposure-per-utility ratio
between two groups (optimal at 1) or as the distance between realized and
ideal group exposure (optimal at 0). Both are exposed as minimizable
black-box objectives over a sessions-concatenated permutation.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .optimize import Objective

Policy = Sequence[Sequence[int]]

METRIC_NAMES = ("dtr", "eel")


@dataclass(frozen=True)
class QueryItem:
    item_id: str
    score: float
    group: str
    true_relevance: int = 0
    utility_grade: int | None = None


@dataclass(frozen=True)
class QueryInstance:
    query_id: str
    items: tuple[QueryItem, ...]

    @property
    def n(self) -> int:
        return len(self.items)

    def utility_grades(self) -> np.ndarray:
        grades = [item.utility_grade for item in self.items]
        if any(g is None for g in grades):
            raise ValueError(f"query {self.query_id!r} has items without a utility grade")
        return np.asarray(grades, dtype=float)

    def relevance(self) -> np.ndarray:
        return np.asarray([item.true_relevance for item in self.items], dtype=float)

    def group_indices(self) -> dict[str, np.ndarray]:
        groups: dict[str, list[int]] = {}
        for idx, item in enumerate(self.items):
            groups.setdefault(item.group, []).append(idx)
        return {g: np.asarray(ix) for g, ix in sorted(groups.items())}


@dataclass(frozen=True)
class ExposureModel:
    """Position-discount family; "log" is 1/log2(rank+1), "inv" is 1/rank."""

    kind: str = "log"

    def discounts(self, n: int) -> np.ndarray:
        ranks = np.arange(1, n + 1, dtype=float)
        if self.kind == "log":
            return 1.0 / np.log2(ranks + 1.0)
        if self.kind == "inv":
            return 1.0 / ranks
        raise ValueError(f"unknown exposure model {self.kind!r}")


def expected_exposure(policy: Policy, model: ExposureModel | None = None) -> np.ndarray:
    """Per-item discount averaged over the policy's sessions."""
    model = model or ExposureModel()
    if not policy:
        raise ValueError("policy must contain at least one session")
    n = len(policy[0])
    disc = model.discounts(n)
    eps = np.zeros(n)
    for session in policy:
        if len(session) != n:
            raise ValueError("all sessions must rank the same items")
        eps[np.asarray(session)] += disc
    return eps / len(policy)


def target_exposure(instance: QueryInstance, model: ExposureModel | None = None) -> np.ndarray:
    """Ideal per-item exposure: grade blocks share the mean discount of their ranks."""
    model = model or ExposureModel()
    grades = instance.utility_grades()
    disc = model.discounts(len(grades))
    target = np.zeros(len(grades))
    start = 0
    for grade in sorted(set(grades.tolist()), reverse=True):
        members = np.flatnonzero(grades == grade)
        block = disc[start : start + len(members)]
        target[members] = block.mean()
        start += len(members)
    return target


def eel(policy: Policy, instance: QueryInstance, model: ExposureModel | None = None) -> float:
    """Distance between realized and ideal group exposure; 0 is optimal."""
    model = model or ExposureModel()
    eps = expected_exposure(policy, model)
    tgt = target_exposure(instance, model)
    groups = instance.group_indices()
    delta = np.asarray([eps[ix].sum() - tgt[ix].sum() for ix in groups.values()])
    return float(np.linalg.norm(delta))


def dtr(policy: Policy, instance: QueryInstance, model: ExposureModel | None = None) -> float:
    """Exposure-per-utility ratio between the two groups, oriented to be >= 1."""
    model = model or ExposureModel()
    groups = instance.group_indices()
    if len(groups) != 2:
        raise ValueError(f"ratio fairness needs exactly two groups, found {len(groups)}")
    grades = instance.utility_grades()
    eps = expected_exposure(policy, model)
    ratios = []
    for ix in groups.values():
        utility = float(grades[ix].mean())
        if utility <= 0.0:
            raise ValueError("a group with zero mean utility has undefined merit")
        ratios.append(float(eps[ix].sum()) / utility)
    return max(ratios[0] / ratios[1], ratios[1] / ratios[0])


def ndcg_at_k(permutation: Sequence[int], instance: QueryInstance, k: int = 10) -> float:
    """Gain 2^rel - 1 with logarithmic discount, against the sorted ideal; in [0, 1]."""
    rel = instance.relevance()
    gains = np.exp2(rel) - 1.0
    depth = min(k, len(rel))
    disc = 1.0 / np.log2(np.arange(2, depth + 2, dtype=float))
    order = np.asarray(permutation)
    dcg = float((gains[order[:depth]] * disc).sum())
    ideal = float((np.sort(gains)[::-1][:depth] * disc).sum())
    if ideal == 0.0:
        return 1.0
    return dcg / ideal


def split_into_sessions(perm: Sequence[int], n_items: int, sessions: int) -> list[tuple[int, ...]]:
    """Read an N-fold concatenated permutation as per-session rankings.

    Concatenated index k stands for item k % n_items in session k // n_items;
    each session's ranking is the relative order of its own indices.
    """
    arr = np.asarray(perm)
    if len(arr) != n_items * sessions:
        raise ValueError("permutation length does not match items * sessions")
    which = arr // n_items
    items = arr % n_items
    return [tuple(int(i) for i in items[which == s]) for s in range(sessions)]


def make_objective(
    metric: str,
    instance: QueryInstance,
    sessions: int = 1,
    model: ExposureModel | None = None,
) -> Objective:
    """Wrap a fairness metric as a minimizable objective over concatenated permutations.

    The ratio metric is shifted down by one so both objectives have optimum 0.
    """
    if metric not in METRIC_NAMES:
        raise ValueError(f"unknown metric {metric!r}")
    if sessions < 1:
        raise ValueError("sessions must be >= 1")
    model = model or ExposureModel()
    n = instance.n

    if metric == "eel":
        def evaluate(perm: Sequence[int]) -> float:
            return eel(split_into_sessions(perm, n, sessions), instance, model)
    else:
        def evaluate(perm: Sequence[int]) -> float:
            return dtr(split_into_sessions(perm, n, sessions), instance, model) - 1.0

    return Objective(n=n * sessions, evaluate=evaluate)


def exhaustive_minimum(
    metric: str,
    instance: QueryInstance,
    sessions: int = 1,
    model: ExposureModel | None = None,
) -> tuple[float, Policy]:
    """True metric minimum over every session-permutation combination.

    Enumerates (n!)^sessions policies with precomputed per-permutation group
    exposures; guarded to n <= 6 and sessions <= 2.
    """
    if metric not in METRIC_NAMES:
        raise ValueError(f"unknown metric {metric!r}")
    if instance.n > 6 or sessions > 2:
        raise ValueError("exhaustive search capped at n <= 6, sessions <= 2")
    model = model or ExposureModel()
    n = instance.n
    perms = list(itertools.permutations(range(n)))
    disc = model.discounts(n)
    expos = np.zeros((len(perms), n))
    for row, perm in enumerate(perms):
        expos[row, list(perm)] = disc
    groups = instance.group_indices()
    per_group = np.stack([expos[:, ix].sum(axis=1) for ix in groups.values()], axis=1)

    if metric == "eel":
        tgt = target_exposure(instance, model)
        tgt_group = np.asarray([tgt[ix].sum() for ix in groups.values()])
        if sessions == 1:
            values = np.linalg.norm(per_group - tgt_group, axis=1)
        else:
            mean = 0.5 * (per_group[:, None, :] + per_group[None, :, :])
            values = np.linalg.norm(mean - tgt_group, axis=2)
    else:
        if len(groups) != 2:
            raise ValueError(f"ratio fairness needs exactly two groups, found {len(groups)}")
        grades = instance.utility_grades()
        utility = np.asarray([grades[ix].mean() for ix in groups.values()])
        if (utility <= 0).any():
            raise ValueError("a group with zero mean utility has undefined merit")
        if sessions == 1:
            ratios = per_group / utility
        else:
            ratios = 0.5 * (per_group[:, None, :] + per_group[None, :, :]) / utility
        values = np.maximum(
            ratios[..., 0] / ratios[..., 1], ratios[..., 1] / ratios[..., 0]
        )

    flat = int(np.argmin(values))
    if sessions == 1:
        policy: Policy = (perms[flat],)
    else:
        policy = (perms[flat // len(perms)], perms[flat % len(perms)])
    return float(values.reshape(-1)[flat]), policy
