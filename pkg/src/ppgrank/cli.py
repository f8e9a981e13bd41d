"""Thin command-line client for the re-ranking service.

All work happens behind the HTTP API: by default the commands drive the
FastAPI app in-process, and `--server URL` points them at a running instance
instead. Exit codes: 0 success, 1 config error, 2 data error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .dataio import write_dataset
from .experiments import make_synthetic_suite

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_DATA = 2


def _client(server: str | None):
    if server:
        import httpx

        return httpx.Client(base_url=server, timeout=None)
    from fastapi.testclient import TestClient

    from .service.app import create_app

    return TestClient(create_app())


def _fail(code: int, message: str) -> int:
    print(f"error: {message}", file=sys.stderr)
    return code


def _error_exit(response) -> int:
    detail = {}
    try:
        detail = response.json().get("detail", {})
    except ValueError:
        pass
    message = detail.get("message") if isinstance(detail, dict) else str(detail)
    code = detail.get("code") if isinstance(detail, dict) else None
    if code == "config_error" or response.status_code == 400:
        return _fail(EXIT_CONFIG, message or f"HTTP {response.status_code}")
    return _fail(EXIT_DATA, message or f"HTTP {response.status_code}")


def cmd_run(args) -> int:
    try:
        raw = json.loads(Path(args.config).read_text(encoding="utf-8"))
    except OSError as exc:
        return _fail(EXIT_CONFIG, f"cannot read config: {exc}")
    except json.JSONDecodeError as exc:
        return _fail(EXIT_CONFIG, f"config is not valid JSON: {exc}")
    if not isinstance(raw, dict):
        return _fail(EXIT_CONFIG, "config must be a JSON object")

    dataset_path = raw.get("dataset")
    if not isinstance(dataset_path, str):
        return _fail(EXIT_CONFIG, "config key 'dataset' must be a path string")
    try:
        dataset_text = Path(dataset_path).read_text(encoding="utf-8")
    except OSError as exc:
        return _fail(EXIT_DATA, f"cannot read dataset: {exc}")

    with _client(args.server) as client:
        response = client.post(
            "/experiments/run", json={"config": raw, "dataset_text": dataset_text}
        )
        if response.status_code != 200:
            return _error_exit(response)
        payload = response.json()

    output = Path(raw.get("output", "results.tsv"))
    output.parent.mkdir(parents=True, exist_ok=True)
    output.write_text(payload["table"], encoding="utf-8")
    manifest_path = output.with_suffix(output.suffix + ".manifest.json")
    manifest_path.write_text(
        json.dumps(payload["manifest"], indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    print(f"wrote {output} and {manifest_path}")
    return EXIT_OK


def cmd_aggregate(args) -> int:
    tables = []
    for path in args.inputs:
        try:
            tables.append(Path(path).read_text(encoding="utf-8"))
        except OSError as exc:
            return _fail(EXIT_DATA, f"cannot read result table: {exc}")

    with _client(args.server) as client:
        response = client.post("/aggregate", json={"tables": tables})
        if response.status_code != 200:
            return _error_exit(response)
        payload = response.json()

    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(payload["summary"], encoding="utf-8")
    series_path = Path(args.series) if args.series else out.with_suffix(out.suffix + ".series.tsv")
    series_path.write_text(payload["series"], encoding="utf-8")
    print(f"wrote {out} and {series_path}")
    return EXIT_OK


def cmd_serve(args) -> int:
    import uvicorn

    from .service.app import create_app

    uvicorn.run(create_app(), host=args.host, port=args.port)
    return EXIT_OK


def cmd_synth(args) -> int:
    suite = make_synthetic_suite(num_queries=args.queries, num_items=args.items, seed=args.seed)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_dataset(out, suite)
    print(f"wrote {len(suite)} queries to {out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ppgrank", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment from a JSON config")
    run.add_argument("--config", required=True, help="path to the experiment config")
    run.add_argument("--server", default=None, help="remote service URL (default: in-process)")
    run.set_defaults(fn=cmd_run)

    agg = sub.add_parser("aggregate", help="summarize result tables")
    agg.add_argument("--inputs", required=True, nargs="+", help="result table paths")
    agg.add_argument("--out", required=True, help="summary table path")
    agg.add_argument("--series", default=None, help="series file path (default: <out>.series.tsv)")
    agg.add_argument("--server", default=None, help="remote service URL (default: in-process)")
    agg.set_defaults(fn=cmd_aggregate)

    serve = sub.add_parser("serve", help="start the HTTP service")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8000)
    serve.set_defaults(fn=cmd_serve)

    synth = sub.add_parser("synth", help="write the synthetic benchmark dataset")
    synth.add_argument("--out", required=True)
    synth.add_argument("--queries", type=int, default=50)
    synth.add_argument("--items", type=int, default=8)
    synth.add_argument("--seed", type=int, default=0)
    synth.set_defaults(fn=cmd_synth)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
