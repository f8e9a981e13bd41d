"""FastAPI wrapper around the core package.

Config problems surface as HTTP 400 and dataset problems as HTTP 422, both
with a machine-readable `code` so thin clients can map them to exit codes.
"""

from __future__ import annotations

from fastapi import FastAPI, HTTPException

from .. import __version__
from ..dataio import discretize_grades, parse_dataset
from ..experiments import (
    ConfigError,
    DataError,
    ExperimentConfig,
    aggregate,
    optimize_query,
    prepare_instances,
    query_rng,
    run_experiment,
    sort_by_utility,
)
from ..metrics import ExposureModel, QueryInstance, QueryItem
from ..optimize import TrainConfig
from .schemas import (
    AggregateRequest,
    AggregateResponse,
    ExperimentRunRequest,
    ExperimentRunResponse,
    HealthResponse,
    RerankRequest,
    RerankResponse,
)


def _config_error(exc: Exception) -> HTTPException:
    return HTTPException(status_code=400, detail={"code": "config_error", "message": str(exc)})


def _data_error(exc: Exception) -> HTTPException:
    return HTTPException(status_code=422, detail={"code": "data_error", "message": str(exc)})


def create_app() -> FastAPI:
    app = FastAPI(title="ppgrank", version=__version__)

    @app.get("/health", response_model=HealthResponse)
    def health() -> HealthResponse:
        return HealthResponse(status="ok", version=__version__)

    @app.post("/rerank", response_model=RerankResponse)
    def rerank(request: RerankRequest) -> RerankResponse:
        if len({item.item_id for item in request.items}) != len(request.items):
            raise _data_error(ValueError("duplicate item ids"))
        instance = QueryInstance(
            query_id="adhoc",
            items=tuple(
                QueryItem(
                    item_id=item.item_id,
                    score=item.score,
                    group=item.group,
                    true_relevance=item.true_relevance,
                    utility_grade=item.utility_grade,
                )
                for item in request.items
            ),
        )
        if any(item.utility_grade is None for item in instance.items):
            instance = discretize_grades([instance])[0]
        if request.initial_order == "utility_sorted":
            instance = sort_by_utility(instance)
        train_config = TrainConfig(**request.train.model_dump())
        rng = query_rng(request.seed, instance.query_id, request.method, request.metric, request.sessions)
        try:
            row = optimize_query(
                instance,
                request.method,
                request.metric,
                request.sessions,
                ExposureModel(request.exposure),
                train_config,
                rng,
            )
        except ValueError as exc:
            raise _data_error(exc) from exc
        return RerankResponse(
            query_id=instance.query_id,
            sessions=[[instance.items[i].item_id for i in session] for session in row.policy],
            fairness=row.fairness,
            ndcg_at_10=row.ndcg_at_10,
            evaluations=row.evaluations,
        )

    @app.post("/experiments/run", response_model=ExperimentRunResponse)
    def experiments_run(request: ExperimentRunRequest) -> ExperimentRunResponse:
        try:
            config = ExperimentConfig.from_dict(request.config)
        except ConfigError as exc:
            raise _config_error(exc) from exc
        try:
            instances = prepare_instances(parse_dataset(request.dataset_text))
            output = run_experiment(config, instances=instances)
        except ConfigError as exc:
            raise _config_error(exc) from exc
        except ValueError as exc:
            raise _data_error(exc) from exc
        return ExperimentRunResponse(table=output.table, manifest=output.manifest)

    @app.post("/aggregate", response_model=AggregateResponse)
    def aggregate_tables(request: AggregateRequest) -> AggregateResponse:
        try:
            summary, series = aggregate(request.tables)
        except DataError as exc:
            raise _data_error(exc) from exc
        return AggregateResponse(summary=summary, series=series)

    return app


app = create_app()
