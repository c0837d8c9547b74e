"""Command-line client for the diagnostics service.

The CLI is a thin HTTP client: by default it mounts the FastAPI app
in-process (no server required); ``--server URL`` points it at a running
instance instead.  ``serve`` starts that instance.
"""

from __future__ import annotations

import argparse
import asyncio
import json
import sys
from pathlib import Path
from typing import Any

import httpx

from .report import render_text

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_NOT_CONVERGED = 2


class _Client:
    """Requests against a remote service or the ASGI app mounted in-process."""

    def __init__(self, server: str | None):
        self._remote = httpx.Client(base_url=server.rstrip("/"), timeout=600.0) if server else None
        self._app = None
        if server is None:
            from .service.app import create_app

            self._app = create_app()

    def __enter__(self) -> "_Client":
        return self

    def __exit__(self, *exc) -> None:
        if self._remote is not None:
            self._remote.close()

    def _request(self, method: str, path: str, **kwargs) -> httpx.Response:
        if self._remote is not None:
            return self._remote.request(method, path, **kwargs)

        async def call() -> httpx.Response:
            transport = httpx.ASGITransport(app=self._app)
            async with httpx.AsyncClient(transport=transport,
                                         base_url="http://nrdiag.local") as client:
                return await client.request(method, path, **kwargs)

        return asyncio.run(call())

    def get(self, path: str) -> httpx.Response:
        return self._request("GET", path)

    def post(self, path: str, json: dict) -> httpx.Response:
        return self._request("POST", path, json=json)


def _client(server: str | None) -> _Client:
    return _Client(server)


def _parse_kv(pairs: list[str], flag: str) -> dict[str, float]:
    out: dict[str, float] = {}
    for item in pairs:
        name, sep, value = item.partition("=")
        if not sep or not name:
            raise ValueError(f"{flag} expects NAME=VALUE, got {item!r}")
        out[name] = float(value)
    return out


def _emit(text: str, out_path: str | None) -> None:
    if out_path:
        Path(out_path).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_run(args: argparse.Namespace) -> int:
    try:
        body: dict[str, Any] = {
            "case": args.case,
            "preset": args.preset,
            "set": _parse_kv(args.set, "--set"),
            "scale_var": _parse_kv(args.scale_var, "--scale-var"),
            "options": {
                "max_iter": args.max_iter,
                "increment_tol": args.tol,
                "damping_factor": args.lambda_factor,
            },
            "threshold": args.threshold,
        }
        if args.guess_file:
            body["guess"] = json.loads(Path(args.guess_file).read_text())
    except (ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    with _client(args.server) as client:
        try:
            resp = client.post("/run", json=body)
        except httpx.HTTPError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_USAGE
    if resp.status_code != 200:
        detail = resp.json().get("detail", resp.text) if resp.content else resp.text
        print(f"error: {detail}", file=sys.stderr)
        return EXIT_USAGE
    report = resp.json()
    if args.format == "json":
        _emit(json.dumps(report, indent=2) + "\n", args.out)
    else:
        _emit(render_text(report), args.out)
    return EXIT_OK if report["status"] == "Converged" else EXIT_NOT_CONVERGED


def cmd_list(args: argparse.Namespace) -> int:
    with _client(args.server) as client:
        try:
            resp = client.get("/cases")
        except httpx.HTTPError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_USAGE
    if resp.status_code != 200:
        print(f"error: {resp.text}", file=sys.stderr)
        return EXIT_USAGE
    payload = resp.json()
    if args.format == "json":
        _emit(json.dumps(payload, indent=2) + "\n", None)
        return EXIT_OK
    lines = []
    for row in payload["cases"]:
        extra = f"  [{row['parametric']}]" if row.get("parametric") else ""
        lines.append(f"{row['name']} (m={row['m']}, q={row['q']}, p={row['p']}){extra}")
        lines.append("  presets: " + ", ".join(row["presets"]))
    _emit("\n".join(lines) + "\n", None)
    return EXIT_OK


def cmd_verify(args: argparse.Namespace) -> int:
    with _client(args.server) as client:
        try:
            resp = client.post("/verify", json={"case": args.case, "n": args.n})
        except httpx.HTTPError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_USAGE
    if resp.status_code != 200:
        detail = resp.json().get("detail", resp.text) if resp.content else resp.text
        print(f"error: {detail}", file=sys.stderr)
        return EXIT_USAGE
    payload = resp.json()
    width = max(len(c["name"]) for c in payload["checks"])
    for check in payload["checks"]:
        mark = "pass" if check["passed"] else "FAIL"
        detail = f"  {check['detail']}" if check["detail"] else ""
        print(f"{check['name']:<{width}}  {mark}{detail}")
    print(f"overall: {'pass' if payload['passed'] else 'FAIL'}")
    return EXIT_OK if payload["passed"] else EXIT_USAGE


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    uvicorn.run("nrdiag.service.app:app", host=args.host, port=args.port)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nrdiag",
        description="solve benchmark equation systems and diagnose bad initial guesses")
    parser.add_argument("--server", default=None,
                        help="URL of a running service (default: run in-process)")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="solve a case/preset and emit the combined report")
    run.add_argument("case", help="case spec, e.g. hex#3, dc#1, ac-test4, ac(8,0.5)")
    run.add_argument("--preset", default=None,
                     help="preset name, overrides the case argument's suffix")
    run.add_argument("--set", action="append", default=[], metavar="NAME=VALUE",
                     help="override a guess entry (repeatable)")
    run.add_argument("--scale-var", action="append", default=[], metavar="NAME=FACTOR",
                     help="set a guess entry to FACTOR times the exact solution (repeatable)")
    run.add_argument("--guess-file", default=None, help="JSON file of NAME: VALUE overrides")
    run.add_argument("--format", choices=("text", "json"), default="text")
    run.add_argument("--out", default=None, help="write the report here instead of stdout")
    run.add_argument("--max-iter", type=int, default=100)
    run.add_argument("--tol", type=float, default=1e-12, help="increment tolerance")
    run.add_argument("--lambda-factor", type=float, default=0.7,
                     help="first-step damping shrink factor")
    run.add_argument("--threshold", type=float, default=1.0,
                     help="criticality threshold for the suspect ranking")
    run.set_defaults(func=cmd_run)

    lst = sub.add_parser("list", help="list cases, dimensions and presets")
    lst.add_argument("--format", choices=("text", "json"), default="text")
    lst.set_defaults(func=cmd_list)

    ver = sub.add_parser("verify", help="run structure and derivative self-checks")
    ver.add_argument("case", choices=("hex", "dc", "ac"))
    ver.add_argument("--n", type=int, default=None, help="grid size for the ac case")
    ver.set_defaults(func=cmd_verify)

    srv = sub.add_parser("serve", help="start the HTTP service")
    srv.add_argument("--host", default="127.0.0.1")
    srv.add_argument("--port", type=int, default=8000)
    srv.set_defaults(func=cmd_serve)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
