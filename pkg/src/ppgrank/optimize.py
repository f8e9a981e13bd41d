"""REINFORCE training loop over either permutation distribution, with
pairwise constraints, best-reference updates, and checkpointing.

The loop keeps the best permutation found so far. For the graph model the
best doubles as the reference permutation: on every strict improvement the
reference is replaced and the weight matrix is conjugated by the outcome's
permutation matrix, so each weight keeps following its item pair.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Hashable, Iterable, Mapping, Sequence

import numpy as np

from .permutations import check_permutation
from .plackett_luce import (
    LOG_THETA_BOUND,
    PlModel,
    pl_log_prob_gradient,
    pl_sample,
)
from .ppg import PpgModel, SampleOutcome, log_prob_gradient, merge_sample

CLIP_MIN = 0.01
CLIP_MAX = 0.99

INTRA_GROUP = "intra_group_fixed"
INTER_GROUP = "inter_group_fixed"


@dataclass(frozen=True)
class Objective:
    """Black-box function over permutations of n items; lower is better.

    Must be deterministic within one run: the trainer caches values by
    permutation.
    """

    n: int
    evaluate: Callable[[tuple[int, ...]], float]


@dataclass(frozen=True)
class ConstraintSpec:
    """Forbidden-inversion constraint, as groups of item indices.

    Intra-group: items sharing a group keep their reference order (groups may
    overlap). Inter-group: items from different groups keep their reference
    order (groups must be disjoint); ungrouped items stay free.
    """

    kind: str
    groups: tuple[tuple[Hashable, tuple[int, ...]], ...]

    @classmethod
    def intra(cls, groups: Mapping[Hashable, Iterable[int]]) -> "ConstraintSpec":
        return cls(INTRA_GROUP, _freeze_groups(groups))

    @classmethod
    def inter(cls, groups: Mapping[Hashable, Iterable[int]]) -> "ConstraintSpec":
        frozen = _freeze_groups(groups)
        seen: set[int] = set()
        for _, members in frozen:
            for item in members:
                if item in seen:
                    raise ValueError(f"inter-group constraint groups must be disjoint: item {item}")
                seen.add(item)
        return cls(INTER_GROUP, frozen)


def _freeze_groups(groups: Mapping[Hashable, Iterable[int]]):
    return tuple(sorted((gid, tuple(sorted(set(map(int, members))))) for gid, members in groups.items()))


GRADIENT_MODES = ("guided", "vanilla")


@dataclass(frozen=True)
class TrainConfig:
    """Knobs of the sampling loop; defaults sized for desk-scale runs.

    Two gradient modes drive the graph model:

    - "guided" (default): bounded sign rewards relative to the incumbent
      reference. Samples worse than the reference push their sampled edges
      down (narrowing the search around the incumbent), while improvements
      and cost-neutral ties push their full log-derivative up, re-warming
      the participating inversions and cooling the rest. Scale-free in the
      objective, so one learning rate fits objectives of any magnitude.
    - "vanilla": the plain score-function estimate (1/batch) * sum of
      f(b_i) * dlogP(b_i), optionally batch-mean centered. Kept for
      comparison; with large objective values it saturates the weights.

    The Plackett-Luce model always trains with the vanilla estimate (it has
    no reference permutation to compare against).
    """

    batch_size: int = 8
    learning_rate: float = 0.01
    patience: int = 20
    max_iters: int = 2000
    seed: int = 0
    gradient_mode: str = "guided"
    reward_centering: bool = False
    remap_gradients: bool = False
    improvement_gain: float = 2.0
    tie_gain: float = 2.0
    step_cap: float = 0.1

    def validate(self) -> None:
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.patience < 1:
            raise ValueError("patience must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.max_iters < 0:
            raise ValueError("max_iters must be >= 0")
        if self.gradient_mode not in GRADIENT_MODES:
            raise ValueError(f"gradient_mode must be one of {GRADIENT_MODES}")
        if self.step_cap <= 0:
            raise ValueError("step_cap must be positive")


@dataclass(frozen=True)
class TrainResult:
    best_permutation: tuple[int, ...]
    best_value: float
    final_model: PpgModel | PlModel
    history: tuple[tuple[int, float], ...]
    evaluations: int


@dataclass
class TrainState:
    """Mutable loop state shared across reinforce_step calls."""

    best_permutation: tuple[int, ...]
    best_value: float
    iteration: int = 0
    no_improve: int = 0
    evaluations: int = 0
    history: list[tuple[int, float]] = field(default_factory=list)
    cache: dict[tuple[int, ...], float] = field(default_factory=dict)

    def evaluate(self, objective: Objective, perm: tuple[int, ...]) -> float:
        value = self.cache.get(perm)
        if value is None:
            value = float(objective.evaluate(perm))
            self.cache[perm] = value
            self.evaluations += 1
        return value


def apply_constraints(model: PpgModel, spec: ConstraintSpec) -> PpgModel:
    """Zero out and freeze the weights of every pair the constraint forbids."""
    position = {item: pos for pos, item in enumerate(model.reference)}
    groups = []
    for gid, members in spec.groups:
        for item in members:
            if item not in position:
                raise ValueError(f"constraint group {gid!r} names unknown item {item}")
        groups.append([position[item] for item in members])

    pairs: set[tuple[int, int]] = set()
    if spec.kind == INTRA_GROUP:
        for members in groups:
            for a in range(len(members)):
                for b in range(a + 1, len(members)):
                    pairs.add((members[a], members[b]))
    elif spec.kind == INTER_GROUP:
        for ga in range(len(groups)):
            for gb in range(ga + 1, len(groups)):
                for i in groups[ga]:
                    for j in groups[gb]:
                        pairs.add((i, j))
    else:
        raise ValueError(f"unknown constraint kind {spec.kind!r}")

    if not pairs:
        return model
    w = model.weights.copy()
    tr = model.trainable.copy()
    for i, j in pairs:
        w[i, j] = w[j, i] = 0.0
        tr[i, j] = tr[j, i] = False
    return replace(model, weights=w, trainable=tr)


def update_reference(model: PpgModel, new_reference: SampleOutcome) -> PpgModel:
    """Rebase the model on a new reference, conjugating weights and mask."""
    perm = check_permutation(new_reference.permutation)
    old_pos = {item: pos for pos, item in enumerate(model.reference)}
    idx = np.asarray([old_pos[item] for item in perm])
    grid = np.ix_(idx, idx)
    return PpgModel(perm, model.weights[grid].copy(), model.trainable[grid].copy())


def _conjugate(matrix: np.ndarray, outcome: SampleOutcome, old_reference) -> np.ndarray:
    old_pos = {item: pos for pos, item in enumerate(old_reference)}
    idx = np.asarray([old_pos[item] for item in outcome.permutation])
    return matrix[np.ix_(idx, idx)]


def reinforce_step(
    model: PpgModel | PlModel,
    objective: Objective,
    config: TrainConfig,
    state: TrainState,
    rng: np.random.Generator,
) -> PpgModel | PlModel:
    """One iteration: draw a batch, update the best, take one gradient step."""
    if isinstance(model, PpgModel):
        model = _ppg_step(model, objective, config, state, rng)
    else:
        model = _pl_step(model, objective, config, state, rng)
    state.iteration += 1
    state.history.append((state.iteration, state.best_value))
    return model


def _ppg_step(model, objective, config, state, rng):
    n = model.n
    guided = config.gradient_mode == "guided"
    descend = np.zeros((n, n))  # guided mode accumulator
    weighted = np.zeros((n, n))  # vanilla mode accumulators
    plain = np.zeros((n, n))
    total = 0.0
    improved = False
    for _ in range(config.batch_size):
        outcome = merge_sample(model, rng)
        grad = log_prob_gradient(model, outcome)
        value = state.evaluate(objective, outcome.permutation)
        delta = value - state.best_value
        if guided:
            if delta > 0:
                sampled = np.zeros((n, n))
                for i, j in outcome.positive_edges:
                    sampled[i, j] = sampled[j, i] = 1.0
                descend += grad * sampled
            elif delta == 0:
                descend -= config.tie_gain * grad
            else:
                descend -= config.improvement_gain * grad
        else:
            weighted += value * grad
            plain += grad
            total += value
        if delta < 0:
            if config.remap_gradients:
                descend = _conjugate(descend, outcome, model.reference)
                weighted = _conjugate(weighted, outcome, model.reference)
                plain = _conjugate(plain, outcome, model.reference)
            model = update_reference(model, outcome)
            state.best_permutation = outcome.permutation
            state.best_value = value
            improved = True

    if guided:
        estimate = descend
    else:
        estimate = weighted
        if config.reward_centering:
            estimate = weighted - (total / config.batch_size) * plain
    step = config.learning_rate * (estimate / config.batch_size)
    if guided:
        step = np.clip(step, -config.step_cap, config.step_cap)

    w = model.weights.copy()
    sel = model.trainable
    w[sel] = np.clip(w[sel] - step[sel], CLIP_MIN, CLIP_MAX)
    state.no_improve = 0 if improved else state.no_improve + 1
    return replace(model, weights=w)


def _pl_step(model, objective, config, state, rng):
    theta = model.theta
    weighted = np.zeros(model.n)
    plain = np.zeros(model.n)
    total = 0.0
    improved = False
    for _ in range(config.batch_size):
        perm = pl_sample(model, rng)
        grad = theta * pl_log_prob_gradient(model, perm)  # w.r.t. log-strengths
        value = state.evaluate(objective, perm)
        if value < state.best_value:
            state.best_permutation = perm
            state.best_value = value
            improved = True
        weighted += value * grad
        plain += grad
        total += value

    estimate = weighted
    if config.reward_centering:
        estimate = weighted - (total / config.batch_size) * plain
    estimate /= config.batch_size

    log_theta = np.clip(
        model.log_theta - config.learning_rate * estimate, -LOG_THETA_BOUND, LOG_THETA_BOUND
    )
    state.no_improve = 0 if improved else state.no_improve + 1
    return PlModel(log_theta)


def train(
    model: PpgModel | PlModel,
    objective: Objective,
    config: TrainConfig | None = None,
    constraints: Sequence[ConstraintSpec] | ConstraintSpec | None = None,
    rng: np.random.Generator | None = None,
) -> TrainResult:
    """Run the sampling loop until the best stalls for `patience` iterations.

    Identical seeds produce identical results, including the final model.
    """
    config = config or TrainConfig()
    config.validate()
    if objective.n != model.n:
        raise ValueError(f"objective is over {objective.n} items, model over {model.n}")
    if constraints is not None:
        if isinstance(constraints, ConstraintSpec):
            constraints = [constraints]
        if not isinstance(model, PpgModel) and constraints:
            raise ValueError("pairwise constraints require the graph model")
        for spec in constraints:
            model = apply_constraints(model, spec)
    if rng is None:
        rng = np.random.default_rng(config.seed)

    if isinstance(model, PpgModel):
        start = model.reference
    else:
        start = model.deterministic_permutation()
    state = TrainState(best_permutation=start, best_value=math.inf)
    state.best_value = state.evaluate(objective, start)

    while state.iteration < config.max_iters and state.no_improve < config.patience:
        model = reinforce_step(model, objective, config, state, rng)

    return TrainResult(
        best_permutation=state.best_permutation,
        best_value=state.best_value,
        final_model=model,
        history=tuple(state.history),
        evaluations=state.evaluations,
    )


def concatenate_sessions(items: Sequence, copies: int):
    """Repeat an item list `copies` times with a session-blocking constraint.

    Returns the concatenated list and an inter-group constraint (one group
    per session, over concatenated indices) that forbids mixing sessions.
    """
    if copies < 1:
        raise ValueError("session count must be >= 1")
    n = len(items)
    concatenated = list(items) * copies
    spec = ConstraintSpec.inter(
        {s: range(s * n, (s + 1) * n) for s in range(copies)}
    )
    return concatenated, spec


CHECKPOINT_TAG = "ppg-checkpoint"
CHECKPOINT_VERSION = 1


def save_checkpoint(
    path,
    model: PpgModel,
    *,
    iterations: int = 0,
    seed: int = 0,
    best_value: float = math.inf,
) -> None:
    """Write a self-describing text snapshot of a graph model and run counters."""
    buf = io.StringIO()
    buf.write(f"{CHECKPOINT_TAG} {CHECKPOINT_VERSION}\n")
    buf.write(f"n {model.n}\n")
    buf.write(f"seed {seed}\n")
    buf.write(f"iterations {iterations}\n")
    buf.write(f"best_value {best_value!r}\n")
    buf.write("reference " + " ".join(str(i) for i in model.reference) + "\n")
    buf.write("weights\n")
    for row in model.weights:
        buf.write(" ".join(repr(float(x)) for x in row) + "\n")
    buf.write("trainable\n")
    for row in model.trainable:
        buf.write(" ".join("1" if x else "0" for x in row) + "\n")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(buf.getvalue())


def load_checkpoint(path) -> tuple[PpgModel, dict]:
    """Read a checkpoint back; returns the model and the run counters."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    header = lines[0].split()
    if header[0] != CHECKPOINT_TAG or int(header[1]) != CHECKPOINT_VERSION:
        raise ValueError(f"not a version-{CHECKPOINT_VERSION} checkpoint: {lines[0]!r}")
    meta = {}
    i = 1
    for key, cast in (("n", int), ("seed", int), ("iterations", int), ("best_value", float)):
        name, value = lines[i].split(maxsplit=1)
        if name != key:
            raise ValueError(f"expected {key!r}, found {name!r}")
        meta[key] = cast(value)
        i += 1
    n = meta["n"]
    reference = check_permutation(lines[i].split()[1:])
    i += 1
    if lines[i] != "weights":
        raise ValueError("missing weights section")
    weights = np.array([[float(x) for x in lines[i + 1 + r].split()] for r in range(n)])
    i += 1 + n
    if lines[i] != "trainable":
        raise ValueError("missing trainable section")
    trainable = np.array(
        [[cell == "1" for cell in lines[i + 1 + r].split()] for r in range(n)]
    )
    model = PpgModel(reference, weights, trainable)
    model.validate()
    return model, meta
