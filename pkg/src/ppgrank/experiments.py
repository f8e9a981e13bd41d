"""Experiment runner: per-query optimization over a dataset, result tables,
run manifests, aggregation, and the synthetic benchmark suite.

Every query gets an independent RNG stream derived from the run seed and the
query id, so worker count and processing order cannot change any result. The
result table is fully reproducible from the manifest, which is itself a
valid run config.
"""

from __future__ import annotations

import hashlib
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

from .dataio import discretize_grades, filter_queries, read_dataset
from .metrics import (
    ExposureModel,
    QueryInstance,
    QueryItem,
    dtr,
    eel,
    make_objective,
    ndcg_at_k,
    split_into_sessions,
)
from .optimize import ConstraintSpec, TrainConfig, concatenate_sessions, train
from .plackett_luce import PlModel
from .ppg import uniform_model

METHOD_NAMES = ("ppg", "ppg_intra", "pl", "rand")
METRIC_CHOICES = ("dtr", "eel")
ORDER_CHOICES = ("utility_sorted", "as_given")

TABLE_COLUMNS = ("query_id", "method", "metric", "sessions", "fairness", "ndcg_at_10", "evaluations")


class ConfigError(ValueError):
    """Invalid experiment configuration; maps to exit code 1."""


class DataError(ValueError):
    """Unreadable or unusable dataset; maps to exit code 2."""


@dataclass(frozen=True)
class ExperimentConfig:
    dataset: str
    output: str
    methods: tuple[str, ...] = METHOD_NAMES
    metric: str = "eel"
    sessions: tuple[int, ...] = (1, 2, 4)
    exposure: str = "log"
    seed: int = 0
    initial_order: str = "utility_sorted"
    workers: int = 1
    train: TrainConfig = field(default_factory=TrainConfig)

    def validate(self) -> None:
        for method in self.methods:
            if method not in METHOD_NAMES:
                raise ConfigError(f"unknown method {method!r} (choose from {', '.join(METHOD_NAMES)})")
        if self.metric not in METRIC_CHOICES:
            raise ConfigError(f"unknown metric {self.metric!r}")
        if not self.sessions or any(s < 1 for s in self.sessions):
            raise ConfigError("sessions must be a non-empty list of counts >= 1")
        if self.initial_order not in ORDER_CHOICES:
            raise ConfigError(f"initial_order must be one of {ORDER_CHOICES}")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        try:
            ExposureModel(self.exposure).discounts(2)
            self.train.validate()
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def to_dict(self) -> dict:
        out = asdict(self)
        out["methods"] = list(self.methods)
        out["sessions"] = list(self.sessions)
        return out

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        data = dict(raw)
        data.pop("generated", None)  # manifests carry run metadata under this key
        try:
            train_cfg = TrainConfig(**data.pop("train", {}))
            config = cls(
                dataset=str(data.pop("dataset")),
                output=str(data.pop("output")),
                methods=tuple(data.pop("methods", METHOD_NAMES)),
                metric=str(data.pop("metric", "eel")),
                sessions=tuple(int(s) for s in data.pop("sessions", (1, 2, 4))),
                exposure=str(data.pop("exposure", "log")),
                seed=int(data.pop("seed", 0)),
                initial_order=str(data.pop("initial_order", "utility_sorted")),
                workers=int(data.pop("workers", 1)),
                train=train_cfg,
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"bad config: {exc}") from exc
        if data:
            raise ConfigError(f"unknown config keys: {sorted(data)}")
        config.validate()
        return config


@dataclass(frozen=True)
class ResultRow:
    query_id: str
    method: str
    metric: str
    sessions: int
    fairness: float
    ndcg_at_10: float
    evaluations: int
    # carried for callers, kept out of the table: wall time would break the
    # byte-identical reproducibility contract
    wall_time_s: float
    policy: tuple[tuple[int, ...], ...]


def query_rng(seed: int, query_id: str, method: str, metric: str, sessions: int) -> np.random.Generator:
    """Deterministic per-(query, method, metric, N) stream, platform independent."""
    digest = hashlib.sha256(
        f"{seed}:{query_id}:{method}:{metric}:{sessions}".encode()
    ).digest()
    words = [int.from_bytes(digest[i : i + 4], "little") for i in range(0, 16, 4)]
    return np.random.default_rng(np.random.SeedSequence(words))


def sort_by_utility(instance: QueryInstance) -> QueryInstance:
    """Stable descending sort by utility grade: the canonical input ranking."""
    items = sorted(instance.items, key=lambda item: -(item.utility_grade or 0))
    return replace(instance, items=tuple(items))


def optimize_query(
    instance: QueryInstance,
    method: str,
    metric: str,
    sessions: int,
    exposure: ExposureModel,
    train_config: TrainConfig,
    rng: np.random.Generator,
) -> ResultRow:
    """Run one method on one query and score the resulting policy."""
    started = time.perf_counter()
    n = instance.n
    objective = make_objective(metric, instance, sessions, exposure)

    if method == "rand":
        policy = [tuple(int(i) for i in rng.permutation(n)) for _ in range(sessions)]
        evaluations = 1
    elif method in ("ppg", "ppg_intra"):
        _, session_spec = concatenate_sessions(range(n), sessions)
        constraints = [session_spec]
        if method == "ppg_intra":
            groups = {}
            for s in range(sessions):
                for gid, idx in instance.group_indices().items():
                    groups[(s, gid)] = [s * n + int(i) for i in idx]
            constraints.append(ConstraintSpec.intra(groups))
        model = uniform_model(range(n * sessions))
        result = train(model, objective, train_config, constraints, rng=rng)
        policy = split_into_sessions(result.best_permutation, n, sessions)
        evaluations = result.evaluations
    elif method == "pl":
        model = PlModel.uniform(n * sessions)
        result = train(model, objective, train_config, rng=rng)
        policy = split_into_sessions(result.best_permutation, n, sessions)
        evaluations = result.evaluations
    else:
        raise ConfigError(f"unknown method {method!r}")

    fairness = (dtr if metric == "dtr" else eel)(policy, instance, exposure)
    ndcg = float(np.mean([ndcg_at_k(session, instance) for session in policy]))
    return ResultRow(
        query_id=instance.query_id,
        method=method,
        metric=metric,
        sessions=sessions,
        fairness=fairness,
        ndcg_at_10=ndcg,
        evaluations=evaluations,
        wall_time_s=time.perf_counter() - started,
        policy=tuple(tuple(int(i) for i in session) for session in policy),
    )


def prepare_instances(instances: Sequence[QueryInstance]) -> list[QueryInstance]:
    """Discretize grades when missing, then apply the standard filters."""
    if any(item.utility_grade is None for inst in instances for item in inst.items):
        instances = discretize_grades(instances)
    instances = filter_queries(instances)
    if not instances:
        raise DataError("no query survived the filters")
    return instances


def load_instances(config: ExperimentConfig) -> list[QueryInstance]:
    try:
        instances = read_dataset(config.dataset)
    except OSError as exc:
        raise DataError(f"cannot read dataset {config.dataset!r}: {exc}") from exc
    except ValueError as exc:
        raise DataError(str(exc)) from exc
    return prepare_instances(instances)


@dataclass(frozen=True)
class RunOutput:
    table: str
    manifest: dict
    rows: tuple[ResultRow, ...]


def run_experiment(config: ExperimentConfig, instances: Sequence[QueryInstance] | None = None) -> RunOutput:
    """Run every (query, N, method) cell and render the result table."""
    config.validate()
    started = time.perf_counter()
    if instances is None:
        instances = load_instances(config)
    if config.initial_order == "utility_sorted":
        instances = [sort_by_utility(inst) for inst in instances]

    exposure = ExposureModel(config.exposure)
    cells = [
        (inst, sessions, method)
        for inst in instances
        for sessions in config.sessions
        for method in config.methods
    ]

    def run_cell(cell):
        inst, sessions, method = cell
        rng = query_rng(config.seed, inst.query_id, method, config.metric, sessions)
        try:
            return optimize_query(inst, method, config.metric, sessions, exposure, config.train, rng)
        except ValueError as exc:
            return (inst.query_id, method, sessions, str(exc))

    if config.workers > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            outcomes = list(pool.map(run_cell, cells))
    else:
        outcomes = [run_cell(cell) for cell in cells]

    rows, skipped = [], []
    for outcome in outcomes:
        if isinstance(outcome, ResultRow):
            rows.append(outcome)
        else:
            query_id, method, sessions, reason = outcome
            skipped.append(
                {"query_id": query_id, "method": method, "sessions": sessions, "reason": reason}
            )

    table = render_table(rows)
    manifest = config.to_dict()
    manifest["generated"] = {
        "queries": len(instances),
        "rows": len(rows),
        "skipped": skipped,
        "wall_time_s": time.perf_counter() - started,
        "cell_wall_time_s": {
            f"{r.query_id}/{r.method}/N={r.sessions}": round(r.wall_time_s, 6) for r in rows
        },
    }
    return RunOutput(table=table, manifest=manifest, rows=tuple(rows))


def render_table(rows: Iterable[ResultRow]) -> str:
    lines = ["\t".join(TABLE_COLUMNS)]
    for row in rows:
        lines.append(
            "\t".join(
                (
                    row.query_id,
                    row.method,
                    row.metric,
                    str(row.sessions),
                    repr(row.fairness),
                    repr(row.ndcg_at_10),
                    str(row.evaluations),
                )
            )
        )
    return "\n".join(lines) + "\n"


def parse_table(text: str) -> list[dict]:
    lines = [line for line in text.splitlines() if line.strip()]
    if not lines:
        raise DataError("empty result table")
    header = tuple(lines[0].split("\t"))
    if header != TABLE_COLUMNS:
        raise DataError(f"unexpected table schema: {header}")
    rows = []
    for line in lines[1:]:
        cells = line.split("\t")
        if len(cells) != len(TABLE_COLUMNS):
            raise DataError(f"malformed table row: {line!r}")
        rows.append(dict(zip(TABLE_COLUMNS, cells)))
    return rows


def aggregate(tables: Sequence[str]) -> tuple[str, str]:
    """Mean fairness and ranking quality per (method, metric, N).

    Returns the summary table and a plot-ready series file (one line per
    series point: series label, x, y).
    """
    if not tables:
        raise DataError("nothing to aggregate")
    rows = []
    for text in tables:
        rows.extend(parse_table(text))
    if not rows:
        raise DataError("result tables contain no rows")

    cells: dict[tuple[str, str, int], list[tuple[float, float]]] = {}
    for row in rows:
        key = (row["method"], row["metric"], int(row["sessions"]))
        cells.setdefault(key, []).append((float(row["fairness"]), float(row["ndcg_at_10"])))

    summary_lines = ["\t".join(("method", "metric", "sessions", "queries", "mean_fairness", "mean_ndcg_at_10"))]
    series_lines = ["\t".join(("series", "x", "y"))]
    for (method, metric, sessions), values in sorted(cells.items()):
        fairness = float(np.mean([v[0] for v in values]))
        ndcg = float(np.mean([v[1] for v in values]))
        summary_lines.append(
            "\t".join((method, metric, str(sessions), str(len(values)), repr(fairness), repr(ndcg)))
        )
        series_lines.append("\t".join((f"{method}:{metric}:fairness", str(sessions), repr(fairness))))
        series_lines.append("\t".join((f"{method}:{metric}:ndcg_at_10", str(sessions), repr(ndcg))))
    return "\n".join(summary_lines) + "\n", "\n".join(series_lines) + "\n"


def make_synthetic_suite(
    num_queries: int = 50, num_items: int = 8, seed: int = 0
) -> list[QueryInstance]:
    """Queries with distinct grades, balanced groups, and true labels as utilities.

    The list order is a random cross-group interleaving whose within-group
    order follows the grades, so intra-group constraints never block the
    ideal ranking; scores decrease along the list order.
    """
    rng = np.random.default_rng(seed)
    instances = []
    for q in range(num_queries):
        grades = list(rng.permutation(num_items))
        half = num_items // 2
        group_of = ["A"] * half + ["B"] * (num_items - half)
        rng.shuffle(group_of)

        by_group: dict[str, list[int]] = {"A": [], "B": []}
        for idx in range(num_items):
            by_group[group_of[idx]].append(idx)
        for members in by_group.values():
            members.sort(key=lambda idx: -grades[idx])

        order = []
        a, b = by_group["A"], by_group["B"]
        ai = bi = 0
        while ai < len(a) or bi < len(b):
            take_a = ai < len(a) and (bi >= len(b) or rng.random() < 0.5)
            order.append(a[ai] if take_a else b[bi])
            ai, bi = ai + (1 if take_a else 0), bi + (0 if take_a else 1)

        items = tuple(
            QueryItem(
                item_id=f"d{idx}",
                score=float(num_items - pos),
                group=group_of[idx],
                true_relevance=int(grades[idx]),
                utility_grade=int(grades[idx]),
            )
            for pos, idx in enumerate(order)
        )
        instances.append(QueryInstance(query_id=f"synth-{q:03d}", items=items))
    return instances
