"""Permutations, inversion sets, and permutation-graph recognition.

An inversion set is stored over *positions* of a reference permutation: the
pair (i, j) with i < j means that the items found at reference positions i
and j appear in the opposite relative order in the target. With positions as
vertices, these sets are exactly the edge sets of permutation graphs, and a
set of position pairs is realizable by some permutation iff it satisfies the
double-transitivity rule checked by :func:`is_valid_inversion_set`.

Everything here is a pure function over immutable values and is safe to call
concurrently.
"""

from __future__ import annotations

import itertools
from functools import lru_cache
from typing import Iterable, Sequence

Edge = tuple[int, int]

SUPPORT_EDGE_MAX_N = 6


def check_permutation(order: Sequence[int]) -> tuple[int, ...]:
    """Validate that `order` uses each of 0..n-1 exactly once; return a tuple."""
    perm = tuple(int(x) for x in order)
    if sorted(perm) != list(range(len(perm))):
        raise ValueError(f"not a permutation of 0..{len(perm) - 1}: {order!r}")
    return perm


def normalize_edges(edges: Iterable[Sequence[int]], n: int | None = None) -> frozenset[Edge]:
    """Canonicalize pairs to (small, large) tuples, rejecting self-pairs."""
    out = set()
    for pair in edges:
        i, j = int(pair[0]), int(pair[1])
        if i == j:
            raise ValueError(f"self-pair ({i}, {j}) is not an inversion")
        if i > j:
            i, j = j, i
        if i < 0 or (n is not None and j >= n):
            raise ValueError(f"pair ({i}, {j}) out of range for n={n}")
        out.add((i, j))
    return frozenset(out)


def all_pairs(n: int) -> list[Edge]:
    """All C(n, 2) position pairs (i, j) with i < j, in lexicographic order."""
    return [(i, j) for i in range(n) for j in range(i + 1, n)]


def inversion_set(reference: Sequence[int], target: Sequence[int]) -> frozenset[Edge]:
    """Position pairs of `reference` whose items swap relative order in `target`."""
    ref = check_permutation(reference)
    tgt = check_permutation(target)
    if len(ref) != len(tgt):
        raise ValueError(f"length mismatch: {len(ref)} vs {len(tgt)}")
    rank_in_target = {item: r for r, item in enumerate(tgt)}
    ranks = [rank_in_target[item] for item in ref]
    n = len(ref)
    return frozenset(
        (i, j) for i in range(n) for j in range(i + 1, n) if ranks[i] > ranks[j]
    )


def is_valid_inversion_set(n: int, edges: Iterable[Sequence[int]]) -> bool:
    """True iff `edges` is the inversion set of some permutation of n positions.

    Uses the O(n^3) double-transitivity characterization: for every i<j<k,
    (i,j) and (j,k) present forces (i,k) present, and both absent forces
    (i,k) absent.
    """
    edge_set = normalize_edges(edges, n)
    present = [[False] * n for _ in range(n)]
    for i, j in edge_set:
        present[i][j] = True
    for i in range(n):
        pi = present[i]
        for j in range(i + 1, n):
            ij = pi[j]
            pj = present[j]
            for k in range(j + 1, n):
                jk = pj[k]
                ik = pi[k]
                if ij and jk:
                    if not ik:
                        return False
                elif not ij and not jk:
                    if ik:
                        return False
    return True


def apply_inversion_set(reference: Sequence[int], edges: Iterable[Sequence[int]]) -> tuple[int, ...]:
    """Reconstruct the unique permutation whose inversion set over `reference` is `edges`."""
    ref = check_permutation(reference)
    n = len(ref)
    edge_set = normalize_edges(edges, n)
    if not is_valid_inversion_set(n, edge_set):
        raise ValueError("edge set is not a valid inversion set")
    return _apply_checked(ref, edge_set)


def _apply_checked(ref: tuple[int, ...], edge_set: frozenset[Edge]) -> tuple[int, ...]:
    # rank shift: each inversion with a later position pushes the item back,
    # each inversion with an earlier position pulls it forward
    n = len(ref)
    ranks = list(range(n))
    for i, j in edge_set:
        ranks[i] += 1
        ranks[j] -= 1
    out = [-1] * n
    for pos, rank in enumerate(ranks):
        out[rank] = ref[pos]
    return tuple(out)


def complement_inversion_set(n: int, edges: Iterable[Sequence[int]]) -> frozenset[Edge]:
    """Complement pair set; valid whenever the input is (full reversal symmetry)."""
    edge_set = normalize_edges(edges, n)
    if not is_valid_inversion_set(n, edge_set):
        raise ValueError("edge set is not a valid inversion set")
    return frozenset(p for p in all_pairs(n) if p not in edge_set)


def kendall_distance(a: Sequence[int], b: Sequence[int]) -> int:
    """Number of item pairs ranked in opposite order by the two permutations."""
    return len(inversion_set(a, b))


@lru_cache(maxsize=None)
def all_valid_inversion_sets(n: int) -> tuple[frozenset[Edge], ...]:
    """The n! inversion sets over n positions, one per permutation."""
    if n > 7:
        raise ValueError(f"enumeration of {n}! inversion sets refused")
    sets = []
    for perm in itertools.permutations(range(n)):
        rank = {p: r for r, p in enumerate(perm)}
        sets.append(
            frozenset(
                (i, j)
                for i in range(n)
                for j in range(i + 1, n)
                if rank[i] > rank[j]
            )
        )
    return tuple(sets)


def support_edges(n: int, pair: Sequence[int]) -> frozenset[frozenset[Edge]]:
    """Minimal sets of co-required inversions for `pair`, by exhaustive search.

    Enumerates every subset of the C(n,2) position pairs containing `pair`,
    keeps the valid ones that have no valid proper subset still containing
    `pair`, and strips `pair` from each. Exponential; guarded to n <= 6.
    """
    if n > SUPPORT_EDGE_MAX_N:
        raise ValueError(f"support_edges is exhaustive and capped at n={SUPPORT_EDGE_MAX_N}")
    (target,) = normalize_edges([pair], n)
    pairs = all_pairs(n)
    index = {p: b for b, p in enumerate(pairs)}
    target_bit = 1 << index[target]
    m = len(pairs)

    valid_with_target = []
    for mask in range(1 << m):
        if not mask & target_bit:
            continue
        subset = [pairs[b] for b in range(m) if mask & (1 << b)]
        if is_valid_inversion_set(n, subset):
            valid_with_target.append(mask)

    minimal = [
        mask
        for mask in valid_with_target
        if not any(o != mask and o & mask == o for o in valid_with_target)
    ]
    return frozenset(
        frozenset(pairs[b] for b in range(m) if mask & (1 << b) and pairs[b] != target)
        for mask in minimal
    )
