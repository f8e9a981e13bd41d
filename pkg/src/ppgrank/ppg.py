"""Probabilistic permutation graph: edge-weight model, exact probabilities,
samplers, and the log-derivative used by the REINFORCE trainer.

A model is a reference permutation plus a symmetric matrix of pairwise
inversion probabilities indexed by reference *positions*: weights[i, j] is
the probability that the items at reference positions i and j (i < j) end up
in swapped relative order. Sampling all pairs independently and keeping only
realizable outcomes defines a distribution over permutations; the exact_*
functions compute it by enumeration at small n, while merge_sample is the
fast divide-and-conquer sampler that always emits a realizable outcome.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

from .permutations import (
    Edge,
    all_pairs,
    all_valid_inversion_sets,
    check_permutation,
    is_valid_inversion_set,
    normalize_edges,
)

EXACT_MAX_N = 6
REJECTION_MAX_ATTEMPTS = 10_000_000


@dataclass(frozen=True)
class PpgModel:
    """Reference permutation, symmetric inversion weights, trainable mask."""

    reference: tuple[int, ...]
    weights: np.ndarray
    trainable: np.ndarray

    @property
    def n(self) -> int:
        return len(self.reference)

    def validate(self) -> None:
        n = self.n
        w, tr = self.weights, self.trainable
        if w.shape != (n, n) or tr.shape != (n, n):
            raise ValueError("weight/mask shape does not match the reference length")
        if not np.allclose(w, w.T):
            raise ValueError("weights must be symmetric")
        if (tr != tr.T).any():
            raise ValueError("trainable mask must be symmetric")
        off = ~np.eye(n, dtype=bool)
        if ((w < 0.0) | (w > 1.0))[off].any():
            raise ValueError("weights must lie in [0, 1]")


def uniform_model(reference: Sequence[int], weight: float = 0.5) -> PpgModel:
    """Fully trainable model with every pair at the same inversion weight."""
    ref = check_permutation(reference)
    n = len(ref)
    w = np.full((n, n), float(weight))
    np.fill_diagonal(w, 0.0)
    tr = ~np.eye(n, dtype=bool)
    model = PpgModel(ref, w, tr)
    model.validate()
    return model


@dataclass(frozen=True)
class SampleOutcome:
    """A sampled permutation together with its positively sampled edges."""

    permutation: tuple[int, ...]
    positive_edges: frozenset[Edge]


@dataclass
class SamplerStats:
    """Mutable counter threaded through samplers for complexity measurements."""

    bernoulli_trials: int = 0


def raw_outcome_probability(model: PpgModel, edges) -> float:
    """Product-form probability of one joint Bernoulli outcome over all pairs."""
    edge_set = normalize_edges(edges, model.n)
    w = model.weights
    p = 1.0
    for i, j in all_pairs(model.n):
        wij = float(w[i, j])
        p *= wij if (i, j) in edge_set else 1.0 - wij
    return p


def exact_rho(model: PpgModel) -> float:
    """Probability that independent edge sampling yields a realizable outcome."""
    if model.n > EXACT_MAX_N:
        raise ValueError(f"exact_rho enumerates n! outcomes; capped at n={EXACT_MAX_N}")
    return math.fsum(
        raw_outcome_probability(model, edges)
        for edges in all_valid_inversion_sets(model.n)
    )


def conditional_probability(model: PpgModel, edges) -> float:
    """Probability mass of a realizable outcome under the validity-conditioned law."""
    edge_set = normalize_edges(edges, model.n)
    if not is_valid_inversion_set(model.n, edge_set):
        raise ValueError("edge set is not a valid inversion set")
    return raw_outcome_probability(model, edge_set) / exact_rho(model)


def exact_beta(model: PpgModel, pair: Sequence[int]) -> float:
    """Log-derivative correction term for one edge, by exact enumeration.

    Splits the acceptance mass as rho = w_e*A + (1-w_e)*B, where A (resp. B)
    sums the outcome probabilities, excluding the w_e factor itself, of the
    realizable sets containing (resp. not containing) the edge. At uniform
    weights 0.5 the two counts coincide and the term vanishes.
    """
    if model.n > EXACT_MAX_N:
        raise ValueError(f"exact_beta enumerates n! outcomes; capped at n={EXACT_MAX_N}")
    (edge,) = normalize_edges([pair], model.n)
    w = model.weights
    terms_with, terms_without = [], []
    for edges in all_valid_inversion_sets(model.n):
        p = 1.0
        for other in all_pairs(model.n):
            if other == edge:
                continue
            wij = float(w[other[0], other[1]])
            p *= wij if other in edges else 1.0 - wij
        (terms_with if edge in edges else terms_without).append(p)
    a = math.fsum(terms_with)
    b = math.fsum(terms_without)
    w_e = float(w[edge[0], edge[1]])
    denom = w_e * (a - b) + b
    if denom == 0.0:
        raise ZeroDivisionError("acceptance mass is zero for this model")
    return (a - b) / denom


def log_prob_gradient(model: PpgModel, outcome: SampleOutcome) -> np.ndarray:
    """Per-edge log-derivative (indicator - w) / (w * (1 - w)); 0 where non-trainable."""
    n = model.n
    w = model.weights
    tr = model.trainable
    off = ~np.eye(n, dtype=bool)
    bad = tr & off & ((w <= 0.0) | (w >= 1.0))
    if bad.any():
        i, j = np.argwhere(bad)[0]
        raise ValueError(f"trainable weight at saturation: w[{i},{j}]={w[i, j]}")
    ind = np.zeros((n, n))
    for i, j in outcome.positive_edges:
        ind[i, j] = ind[j, i] = 1.0
    grad = np.zeros((n, n))
    sel = tr & off
    grad[sel] = (ind[sel] - w[sel]) / (w[sel] * (1.0 - w[sel]))
    return grad


@lru_cache(maxsize=None)
def _triple_checks(n: int) -> tuple[tuple[int, int, int], ...]:
    # bit masks (ij, jk, ik) per triple, over the all_pairs(n) bit layout
    index = {p: b for b, p in enumerate(all_pairs(n))}
    out = []
    for i in range(n):
        for j in range(i + 1, n):
            for k in range(j + 1, n):
                out.append((1 << index[(i, j)], 1 << index[(j, k)], 1 << index[(i, k)]))
    return tuple(out)


def rejection_sample(
    model: PpgModel, rng: np.random.Generator, max_attempts: int = REJECTION_MAX_ATTEMPTS
) -> SampleOutcome:
    """Exact draw: resample all pairs until the outcome is realizable.

    Runs in expected 1/rho attempts, so only intended for small n. Raises
    RuntimeError when the attempt cap is hit (acceptance mass near zero).
    """
    n = model.n
    pairs = all_pairs(n)
    weights = [float(model.weights[i, j]) for i, j in pairs]
    checks = _triple_checks(n)
    for _ in range(max_attempts):
        mask = 0
        bit = 1
        for w in weights:
            if rng.random() < w:
                mask |= bit
            bit <<= 1
        ok = True
        for ij, jk, ik in checks:
            if mask & ij:
                if mask & jk and not mask & ik:
                    ok = False
                    break
            elif not mask & jk and mask & ik:
                ok = False
                break
        if ok:
            edges = frozenset(p for b, p in enumerate(pairs) if mask & (1 << b))
            return SampleOutcome(_permutation_from_edges(model.reference, edges), edges)
    raise RuntimeError(
        f"no realizable outcome in {max_attempts} attempts; acceptance mass is near zero"
    )


def _permutation_from_edges(ref: tuple[int, ...], edges: frozenset[Edge]) -> tuple[int, ...]:
    n = len(ref)
    ranks = list(range(n))
    for i, j in edges:
        ranks[i] += 1
        ranks[j] -= 1
    out = [-1] * n
    for pos, rank in enumerate(ranks):
        out[rank] = ref[pos]
    return tuple(out)


def merge_sample(
    model: PpgModel, rng: np.random.Generator, stats: SamplerStats | None = None
) -> SampleOutcome:
    """Divide-and-conquer sampler that always produces a realizable outcome.

    The position range is split at the ceiling midpoint, each half is sampled
    recursively from its weight sub-block, and the halves are merged back to
    front: each top item sinks past bottom items while corrected Bernoulli
    draws succeed, and can never sink past the stopping point of the top item
    merged before it. The correction divides each weight by one minus the
    probability mass of outcomes the merge can no longer represent, treating
    the remaining edges as independent.

    The output is exact in neither direction (the merge order biases the
    distribution); validity and zero-weight constraints are guaranteed.
    """
    edges: list[Edge] = []
    order = _sample_block(0, model.n, model.weights, rng, edges, stats)
    perm = tuple(model.reference[p] for p in order)
    return SampleOutcome(perm, frozenset(edges))


def _sample_block(lo, hi, w, rng, edges, stats):
    size = hi - lo
    if size == 1:
        return [lo]
    if size == 2:
        if stats is not None:
            stats.bernoulli_trials += 1
        if rng.random() < w[lo, lo + 1]:
            edges.append((lo, lo + 1))
            return [lo + 1, lo]
        return [lo, lo + 1]
    mid = lo + (size + 1) // 2
    top = _sample_block(lo, mid, w, rng, edges, stats)
    bottom = _sample_block(mid, hi, w, rng, edges, stats)
    return _merge(top, bottom, w, rng, edges, stats)


def _merge(top, bottom, w, rng, edges, stats):
    n_top = len(top)
    depths = [0] * n_top
    b_last = len(bottom)
    for t in range(n_top - 1, -1, -1):
        if b_last == 0:
            break
        u = top[t]
        # survive[k] = prob that u passes none of bottom[k:b_last]
        survive = [1.0] * (b_last + 1)
        for k in range(b_last - 1, -1, -1):
            survive[k] = survive[k + 1] * (1.0 - w[u, bottom[k]])
        k = 0
        while k < b_last:
            v = bottom[k]
            w_uv = float(w[u, v])
            if stats is not None:
                stats.bernoulli_trials += 1
            if w_uv <= 0.0:
                break
            p_later = 1.0 - survive[k + 1]
            if t == 0:
                p_earlier = 0.0
            else:
                keep = 1.0
                for s in range(t):
                    keep *= 1.0 - w[top[s], v]
                p_earlier = 1.0 - keep
            blocked = (1.0 - w_uv) * (p_later + p_earlier - p_later * p_earlier)
            # draw with probability w_uv / (1 - blocked), division-free
            if rng.random() * (1.0 - blocked) >= w_uv:
                break
            edges.append((u, v))
            k += 1
        depths[t] = k
        b_last = k

    merged = []
    taken = 0
    for t in range(n_top):
        d = depths[t]
        merged.extend(bottom[taken:d])
        merged.append(top[t])
        taken = d
    merged.extend(bottom[taken:])
    return merged


def adjacent_sweep_sample(
    model: PpgModel, rng: np.random.Generator, stats: SamplerStats | None = None
) -> SampleOutcome:
    """Round-based adjacent-swap sampler kept for comparison with merge_sample.

    Each round visits the eligible positions in random order and Bernoulli
    samples the inversion of the adjacent item pair currently sitting there.
    A success swaps the items, knocks the neighbor positions out of the
    current round, and schedules them for the next one; rounds continue until
    no position is eligible. The positive edges are read off the final
    arrangement, since a pair toggled twice ends up not inverted.
    """
    n = model.n
    w = model.weights
    order = list(range(n))
    eligible = list(range(n - 1))
    while eligible:
        dropped: set[int] = set()
        scheduled: set[int] = set()
        for idx in rng.permutation(len(eligible)):
            i = eligible[idx]
            if i in dropped:
                continue
            a, b = order[i], order[i + 1]
            if stats is not None:
                stats.bernoulli_trials += 1
            if rng.random() < w[a, b]:
                order[i], order[i + 1] = b, a
                for nb in (i - 1, i + 1):
                    if 0 <= nb < n - 1:
                        dropped.add(nb)
                        scheduled.add(nb)
        eligible = sorted(scheduled)

    rank = [0] * n
    for r, pos in enumerate(order):
        rank[pos] = r
    pos_edges = frozenset(
        (i, j) for i in range(n) for j in range(i + 1, n) if rank[i] > rank[j]
    )
    perm = tuple(model.reference[p] for p in order)
    return SampleOutcome(perm, pos_edges)


def merge_tv_diagnostic(model: PpgModel, rng: np.random.Generator, draws: int = 50_000) -> float:
    """Empirical total-variation distance of merge_sample from the exact law.

    Diagnostic only: the merge sampler is known to be biased, and nothing in
    the package asserts how large the gap is.
    """
    counts: dict[tuple[int, ...], int] = {}
    for _ in range(draws):
        out = merge_sample(model, rng)
        counts[out.permutation] = counts.get(out.permutation, 0) + 1
    tv = 0.0
    ref = model.reference
    for edges in all_valid_inversion_sets(model.n):
        perm = _permutation_from_edges(ref, edges)
        exact = conditional_probability(model, edges)
        tv += abs(counts.get(perm, 0) / draws - exact)
    return 0.5 * tv
