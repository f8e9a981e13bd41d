import pytest
from fastapi.testclient import TestClient

from ppgrank import __version__
from ppgrank.dataio import FORMAT_NAME, FORMAT_VERSION
from ppgrank.experiments import ExperimentConfig, make_synthetic_suite, run_experiment
from ppgrank.service.app import create_app


@pytest.fixture(scope="module")
def client():
    return TestClient(create_app())


def dataset_text(instances):
    import json

    lines = [json.dumps({"format": FORMAT_NAME, "version": FORMAT_VERSION})]
    for inst in instances:
        lines.append(
            json.dumps(
                {
                    "query_id": inst.query_id,
                    "items": [
                        {
                            "item_id": i.item_id,
                            "score": i.score,
                            "group": i.group,
                            "true_relevance": i.true_relevance,
                            "utility_grade": i.utility_grade,
                        }
                        for i in inst.items
                    ],
                }
            )
        )
    return "\n".join(lines) + "\n"


BASE_CONFIG = {
    "dataset": "synthetic.jsonl",
    "output": "results.tsv",
    "methods": ["ppg", "rand"],
    "metric": "eel",
    "sessions": [1],
    "seed": 3,
    "train": {"max_iters": 40, "patience": 10},
}


class TestHealth:
    def test_reports_version(self, client):
        response = client.get("/health")
        assert response.status_code == 200
        assert response.json() == {"status": "ok", "version": __version__}


class TestRerank:
    def test_optimizes_simple_query(self, client):
        items = [
            {"item_id": "a", "group": "A", "utility_grade": 4, "true_relevance": 4},
            {"item_id": "b", "group": "B", "utility_grade": 3, "true_relevance": 3},
            {"item_id": "c", "group": "A", "utility_grade": 2, "true_relevance": 2},
            {"item_id": "d", "group": "B", "utility_grade": 1, "true_relevance": 1},
        ]
        response = client.post(
            "/rerank",
            json={"items": items, "metric": "eel", "method": "ppg", "sessions": 2, "seed": 5},
        )
        assert response.status_code == 200
        body = response.json()
        assert len(body["sessions"]) == 2
        for session in body["sessions"]:
            assert sorted(session) == ["a", "b", "c", "d"]
        assert body["fairness"] >= 0.0
        assert 0.0 <= body["ndcg_at_10"] <= 1.0

    def test_deterministic_given_seed(self, client):
        items = [
            {"item_id": "a", "group": "A", "utility_grade": 3},
            {"item_id": "b", "group": "B", "utility_grade": 2},
            {"item_id": "c", "group": "A", "utility_grade": 1},
        ]
        payload = {"items": items, "method": "rand", "sessions": 2, "seed": 9}
        first = client.post("/rerank", json=payload).json()
        second = client.post("/rerank", json=payload).json()
        assert first == second

    def test_grades_discretized_from_scores(self, client):
        items = [
            {"item_id": "a", "group": "A", "score": 2.0},
            {"item_id": "b", "group": "B", "score": 1.0},
        ]
        response = client.post("/rerank", json={"items": items, "method": "rand"})
        assert response.status_code == 200

    def test_duplicate_ids_rejected(self, client):
        items = [
            {"item_id": "a", "group": "A", "utility_grade": 3},
            {"item_id": "a", "group": "B", "utility_grade": 1},
        ]
        response = client.post("/rerank", json={"items": items})
        assert response.status_code == 422
        assert response.json()["detail"]["code"] == "data_error"

    def test_single_group_ratio_metric_is_data_error(self, client):
        items = [
            {"item_id": "a", "group": "A", "utility_grade": 3},
            {"item_id": "b", "group": "A", "utility_grade": 1},
        ]
        response = client.post("/rerank", json={"items": items, "metric": "dtr"})
        assert response.status_code == 422


class TestExperimentsRun:
    def test_matches_direct_core_run(self, client, tmp_path):
        instances = make_synthetic_suite(3, 6, seed=8)
        text = dataset_text(instances)
        response = client.post(
            "/experiments/run", json={"config": BASE_CONFIG, "dataset_text": text}
        )
        assert response.status_code == 200
        body = response.json()

        dataset = tmp_path / "synthetic.jsonl"
        dataset.write_text(text)
        direct = run_experiment(
            ExperimentConfig.from_dict({**BASE_CONFIG, "dataset": str(dataset)})
        )
        assert body["table"] == direct.table

    def test_bad_config_maps_to_400(self, client):
        response = client.post(
            "/experiments/run",
            json={"config": {**BASE_CONFIG, "metric": "bogus"}, "dataset_text": "x"},
        )
        assert response.status_code == 400
        assert response.json()["detail"]["code"] == "config_error"

    def test_bad_dataset_maps_to_422(self, client):
        response = client.post(
            "/experiments/run", json={"config": BASE_CONFIG, "dataset_text": "not json\n"}
        )
        assert response.status_code == 422
        assert response.json()["detail"]["code"] == "data_error"


class TestAggregateEndpoint:
    def test_aggregates_tables(self, client):
        header = "query_id\tmethod\tmetric\tsessions\tfairness\tndcg_at_10\tevaluations"
        table = header + "\nq1\tppg\teel\t1\t0.5\t0.9\t3\n"
        response = client.post("/aggregate", json={"tables": [table]})
        assert response.status_code == 200
        assert "mean_fairness" in response.json()["summary"]
        assert "ppg:eel:fairness\t1\t0.5" in response.json()["series"]

    def test_bad_table_maps_to_422(self, client):
        response = client.post("/aggregate", json={"tables": ["garbage"]})
        assert response.status_code == 422
