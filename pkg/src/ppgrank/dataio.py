"""Ranked-list dataset ingestion: a line-delimited JSON format, per-query
grade discretization, and the standard query filters.

File format (one JSON object per line, UTF-8):

    {"format": "ranked-list-dataset", "version": 1}          <- header line
    {"query_id": "q1", "items": [{"item_id": "d1", "score": 1.7,
        "group": "A", "true_relevance": 3, "utility_grade": null}, ...]}

`utility_grade` may be omitted or null, in which case it is derived from the
scores by :func:`discretize_grades`. Converting MSLR- or TREC-style exports
means producing these columns: item scores are the ranker outputs (or the
relevance labels, for the accurate-utility setting), `true_relevance` the
graded labels, and `group` a precomputed label (e.g. the QualityScore2
threshold split for MSLR, or the h-index split for TREC); those pipelines
themselves are out of scope here.
"""

from __future__ import annotations

import json
import math
from dataclasses import replace
from typing import Iterable, Sequence

from .metrics import QueryInstance, QueryItem

FORMAT_NAME = "ranked-list-dataset"
FORMAT_VERSION = 1
MAX_ITEMS = 20
GRADE_LEVELS = 5


def write_dataset(path, instances: Iterable[QueryInstance]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps({"format": FORMAT_NAME, "version": FORMAT_VERSION}) + "\n")
        for inst in instances:
            fh.write(json.dumps(_to_payload(inst), sort_keys=True) + "\n")


def read_dataset(path) -> list[QueryInstance]:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_dataset(fh.read())


def parse_dataset(text: str) -> list[QueryInstance]:
    lines = [line for line in text.splitlines() if line.strip()]
    if not lines:
        raise ValueError("empty dataset")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise ValueError(f"bad dataset header: {exc}") from exc
    if header.get("format") != FORMAT_NAME or header.get("version") != FORMAT_VERSION:
        raise ValueError(f"unsupported dataset header: {lines[0]!r}")
    try:
        return [_from_payload(json.loads(line)) for line in lines[1:]]
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise ValueError(f"bad dataset record: {exc}") from exc


def _to_payload(inst: QueryInstance) -> dict:
    return {
        "query_id": inst.query_id,
        "items": [
            {
                "item_id": item.item_id,
                "score": item.score,
                "group": item.group,
                "true_relevance": item.true_relevance,
                "utility_grade": item.utility_grade,
            }
            for item in inst.items
        ],
    }


def _from_payload(payload: dict) -> QueryInstance:
    items = []
    seen = set()
    for raw in payload["items"]:
        item = QueryItem(
            item_id=str(raw["item_id"]),
            score=float(raw["score"]),
            group=str(raw["group"]),
            true_relevance=int(raw.get("true_relevance") or 0),
            utility_grade=None if raw.get("utility_grade") is None else int(raw["utility_grade"]),
        )
        if item.item_id in seen:
            raise ValueError(
                f"duplicate item {item.item_id!r} in query {payload['query_id']!r}"
            )
        seen.add(item.item_id)
        items.append(item)
    return QueryInstance(query_id=str(payload["query_id"]), items=tuple(items))


def discretize_grades(instances: Sequence[QueryInstance]) -> list[QueryInstance]:
    """Min-max normalize each query's scores onto [0, 5) and floor to grades 0..4.

    The span is inflated by a tiny epsilon so the maximum score lands in the
    top bin rather than on the excluded right edge; constant-score queries
    collapse to grade 0.
    """
    out = []
    for inst in instances:
        scores = [item.score for item in inst.items]
        lo, hi = min(scores), max(scores)
        span = (hi - lo) + 1e-9 * (hi - lo + 1.0)
        items = tuple(
            replace(item, utility_grade=int(math.floor(GRADE_LEVELS * (item.score - lo) / span)))
            for item in inst.items
        )
        out.append(replace(inst, items=items))
    return out


def filter_queries(instances: Sequence[QueryInstance], max_items: int = MAX_ITEMS) -> list[QueryInstance]:
    """Truncate to the top-scored items, then keep only usable queries.

    A query survives when its truncated list still contains a top-grade item
    and its relevant (grade > 0) items span at least two groups. Idempotent.
    """
    out = []
    for inst in instances:
        ranked = sorted(inst.items, key=lambda item: -item.score)[:max_items]
        grades = [item.utility_grade for item in ranked]
        if any(g is None for g in grades):
            raise ValueError(f"query {inst.query_id!r} has items without a utility grade")
        if max(grades) < GRADE_LEVELS - 1:
            continue
        relevant_groups = {item.group for item in ranked if item.utility_grade > 0}
        if len(relevant_groups) < 2:
            continue
        out.append(replace(inst, items=tuple(ranked)))
    return out
