"""Request/response models for the re-ranking service."""

from __future__ import annotations

from typing import Literal, Optional

from pydantic import BaseModel, Field


class HealthResponse(BaseModel):
    status: str
    version: str


class TrainSettings(BaseModel):
    batch_size: int = 8
    learning_rate: float = 0.01
    patience: int = 20
    max_iters: int = 2000
    gradient_mode: Literal["guided", "vanilla"] = "guided"
    reward_centering: bool = False
    remap_gradients: bool = False
    improvement_gain: float = 2.0
    tie_gain: float = 2.0
    step_cap: float = 0.1


class ItemPayload(BaseModel):
    item_id: str
    group: str
    score: float = 0.0
    true_relevance: int = 0
    utility_grade: Optional[int] = None


class RerankRequest(BaseModel):
    items: list[ItemPayload] = Field(min_length=1)
    metric: Literal["dtr", "eel"] = "eel"
    method: Literal["ppg", "ppg_intra", "pl", "rand"] = "ppg"
    sessions: int = Field(default=1, ge=1)
    exposure: Literal["log", "inv"] = "log"
    initial_order: Literal["utility_sorted", "as_given"] = "utility_sorted"
    seed: int = 0
    train: TrainSettings = Field(default_factory=TrainSettings)


class RerankResponse(BaseModel):
    query_id: str
    sessions: list[list[str]]
    fairness: float
    ndcg_at_10: float
    evaluations: int


class ExperimentRunRequest(BaseModel):
    config: dict
    dataset_text: str


class ExperimentRunResponse(BaseModel):
    table: str
    manifest: dict


class AggregateRequest(BaseModel):
    tables: list[str] = Field(min_length=1)


class AggregateResponse(BaseModel):
    summary: str
    series: str


class ErrorDetail(BaseModel):
    code: Literal["config_error", "data_error"]
    message: str
