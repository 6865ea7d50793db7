"""Command-line front end: a thin client of the FastAPI service.

By default requests are served in-process; --server targets a running
instance instead.  Exit codes: 0 success, 1 simulation error, 2 config or
usage error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import List, Optional

EXIT_OK = 0
EXIT_SIM_ERROR = 1
EXIT_CONFIG_ERROR = 2


class _InProcessClient:
    def __init__(self):
        from fastapi.testclient import TestClient

        from .service import app

        self._client = TestClient(app, raise_server_exceptions=False)

    def post(self, path: str, payload: dict):
        return self._client.post(path, json=payload)


class _RemoteClient:
    def __init__(self, base_url: str):
        import httpx

        self._client = httpx.Client(base_url=base_url, timeout=600.0)

    def post(self, path: str, payload: dict):
        return self._client.post(path, json=payload)


def _make_client(args):
    if args.server:
        return _RemoteClient(args.server)
    return _InProcessClient()


def _base_payload(args) -> dict:
    payload: dict = {"overrides": list(args.set or [])}
    if args.config:
        try:
            payload["config_text"] = Path(args.config).read_text()
        except OSError as exc:
            print(f"error: cannot read config: {exc}", file=sys.stderr)
            raise SystemExit(EXIT_CONFIG_ERROR)
    if args.seed is not None:
        payload["overrides"].append(f"simulation.seed={args.seed}")
    return payload


def _post(client, path: str, payload: dict):
    resp = client.post(path, payload)
    if resp.status_code == 422:
        detail = resp.json().get("detail", "invalid configuration")
        print(f"config error: {detail}", file=sys.stderr)
        raise SystemExit(EXIT_CONFIG_ERROR)
    if resp.status_code != 200:
        try:
            detail = resp.json().get("detail", resp.text)
        except Exception:
            detail = resp.text
        print(f"error: {detail}", file=sys.stderr)
        raise SystemExit(EXIT_SIM_ERROR)
    return resp.json()


def _write(out_dir: Path, name: str, content: str) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / name).write_text(content)
    print(f"wrote {out_dir / name}")


def _write_scheme_outputs(out_dir: Path, scheme: str, output: dict) -> None:
    _write(out_dir, f"metrics_{scheme}.csv", output["metrics_csv"])
    _write(out_dir, f"events_{scheme}.csv", output["events_csv"])
    _write(out_dir, f"trace_{scheme}.csv", output["trace_csv"])


def cmd_map(args) -> int:
    payload = _base_payload(args)
    payload.update({"kind": args.kind, "step_m": args.step})
    data = _post(_make_client(args), "/maps", payload)
    out = Path(args.out)
    _write(out, f"{args.kind}_map.csv", data["csv"])
    if args.kind == "illuminance":
        s = data["stats"]
        report = (
            f"# config_hash={data['config_hash']}\n"
            f"band_lx = [{s['band_lo']:g}, {s['band_hi']:g}]\n"
            f"min_lx = {s['min_value']:.9g}\n"
            f"max_lx = {s['max_value']:.9g}\n"
            f"compliance_fraction = {s['compliance_fraction']:.9g}\n"
        )
        _write(out, "illuminance_compliance.txt", report)
    return EXIT_OK


def cmd_simulate(args) -> int:
    data = _post(_make_client(args), "/simulate", _base_payload(args))
    out = Path(args.out)
    for scheme, output in sorted(data["schemes"].items()):
        _write_scheme_outputs(out, scheme, output)
    return EXIT_OK


def cmd_compare(args) -> int:
    data = _post(_make_client(args), "/compare", _base_payload(args))
    out = Path(args.out)
    for scheme, output in sorted(data["schemes"].items()):
        _write_scheme_outputs(out, scheme, output)
    _write(out, "comparison.csv", data["comparison_csv"])
    return EXIT_OK


def cmd_database(args) -> int:
    payload = _base_payload(args)
    if args.step is not None:
        payload["cell_size_m"] = args.step
    data = _post(_make_client(args), "/database", payload)
    _write(Path(args.out), "best_ap_database.csv", data["csv"])
    return EXIT_OK


def cmd_validate(args) -> int:
    data = _post(_make_client(args), "/validate", _base_payload(args))
    if not data["valid"]:
        print(f"config error: {data['error']}", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    print(f"config ok (hash {data['config_hash']})")
    return EXIT_OK


def cmd_serve(args) -> int:
    import uvicorn

    uvicorn.run("vlcsim.service:app", host=args.host, port=args.port)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vlcsim", description="Indoor VLC link-switching simulator"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, step_default=None, with_step=False):
        p.add_argument("--config", help="INI config path (default: shipped config)")
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument(
            "--set",
            action="append",
            metavar="KEY=VALUE",
            help="override a config key (section.key=value); repeatable",
        )
        p.add_argument("--seed", type=int, help="override simulation.seed")
        p.add_argument("--server", help="base URL of a running service instance")
        if with_step:
            p.add_argument("--step", type=float, default=step_default, help="grid step (m)")

    p = sub.add_parser("map", help="generate a power or illuminance grid map")
    p.add_argument("kind", choices=("power", "illuminance"))
    common(p, step_default=0.25, with_step=True)
    p.set_defaults(func=cmd_map)

    p = sub.add_parser("simulate", help="run the configured scheme(s)")
    common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("compare", help="run both schemes side by side")
    common(p)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("database", help="export the pre-scanned best-AP database")
    common(p, step_default=None, with_step=True)
    p.set_defaults(func=cmd_database)

    p = sub.add_parser("validate", help="validate a config file")
    common(p)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
