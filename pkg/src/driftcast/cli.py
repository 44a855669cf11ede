"""Command-line client for the service.

Requests go through the HTTP API: against DRIFTCAST_SERVER_URL when set,
otherwise against an in-process instance of the app, so the CLI works
standalone with no server running. Exit codes: 0 success, 1 validation,
2 data, 3 runtime.
"""

from __future__ import annotations

import argparse
import asyncio
import json
import os
import sys

import httpx

SERVER_URL_ENV = "DRIFTCAST_SERVER_URL"


def _post(path: str, payload: dict) -> httpx.Response:
    url = os.environ.get(SERVER_URL_ENV)
    if url:
        with httpx.Client(base_url=url, timeout=None) as client:
            return client.post(path, json=payload)

    from driftcast.service import app

    async def call() -> httpx.Response:
        transport = httpx.ASGITransport(app=app)
        async with httpx.AsyncClient(
            transport=transport, base_url="http://driftcast.local", timeout=None
        ) as client:
            return await client.post(path, json=payload)

    return asyncio.run(call())


_EXIT_CODES = {"validation": 1, "data": 2, "runtime": 3}


def _finish(response: httpx.Response, render=None) -> int:
    if response.status_code == 200:
        body = response.json()
        print(render(body) if render else json.dumps(body, indent=2, sort_keys=True))
        return 0
    detail = response.json().get("detail", {})
    kind = detail.get("error_kind", "runtime") if isinstance(detail, dict) else "runtime"
    message = detail.get("message", str(detail)) if isinstance(detail, dict) else str(detail)
    print(f"error ({kind}): {message}", file=sys.stderr)
    return _EXIT_CODES.get(kind, 3)


def _config_payload(args: argparse.Namespace) -> dict:
    payload: dict = {"config_path": os.path.abspath(args.config)}
    if getattr(args, "output_dir", None):
        payload["output_dir"] = args.output_dir
    return payload


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="driftcast",
        description="Continual multistep forecasting with change-point-routed model collections",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="execute a full experiment run")
    run_p.add_argument("config", help="run configuration file (INI)")
    run_p.add_argument("--output-dir", help="override the configured output directory")

    detect_p = sub.add_parser("detect", help="detect change points only")
    detect_p.add_argument("config")

    validate_p = sub.add_parser("validate", help="validate a config and echo resolved values")
    validate_p.add_argument("config")

    compare_p = sub.add_parser("compare", help="Diebold-Mariano comparison of two runs")
    compare_p.add_argument("report_a", help="run directory, report.json or records.csv")
    compare_p.add_argument("report_b")
    compare_p.add_argument("--h", type=int, default=1, help="forecast horizon for the test")

    serve_p = sub.add_parser("serve", help="start the HTTP service")
    serve_p.add_argument("--host", default="127.0.0.1")
    serve_p.add_argument("--port", type=int, default=8000)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)

    if args.command == "serve":
        import uvicorn

        from driftcast.service import app

        uvicorn.run(app, host=args.host, port=args.port)
        return 0

    if args.command == "run":
        return _finish(_post("/runs", _config_payload(args)))
    if args.command == "detect":
        return _finish(_post("/detect", _config_payload(args)))
    if args.command == "validate":
        return _finish(_post("/validate", _config_payload(args)), render=lambda b: b["resolved"])
    if args.command == "compare":
        payload = {
            "path_a": os.path.abspath(args.report_a),
            "path_b": os.path.abspath(args.report_b),
            "h": args.h,
        }
        return _finish(_post("/compare", payload))
    raise AssertionError(f"unhandled command {args.command}")


if __name__ == "__main__":
    sys.exit(main())
