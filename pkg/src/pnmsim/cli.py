"""Command-line client: sizing, devices, sweep, fidelity, serve.

Every data-bearing subcommand marshals the same request models the HTTP
service accepts; by default the operation runs in-process, and --server URL
sends it to a running service instead. Exit codes: 0 success, 1 bad usage
or configuration, 2 when a sweep produced only infeasible points.
"""

from __future__ import annotations

import argparse
import sys

from .config import ConfigError
from .service import ops
from .service.schemas import FidelityRequest, SizingRequest, SweepRequest


class CliError(Exception):
    """Usage or configuration problem; maps to exit code 1."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse default exits 2; the contract is 1
        raise CliError(f"{self.format_usage()}{self.prog}: error: {message}")


def _int_arg(raw: str) -> int:
    # accepts 80e9-style byte counts, same as the config file format
    try:
        return int(raw)
    except ValueError:
        try:
            value = float(raw)
        except ValueError:
            raise argparse.ArgumentTypeError(f"{raw!r} is not an integer") from None
        if value != int(value):
            raise argparse.ArgumentTypeError(f"{raw!r} is not an integer")
        return int(value)


def build_parser() -> _Parser:
    parser = _Parser(prog="pnmsim",
                     description="Near-memory KV-cache simulator for long-context decoding")
    sub = parser.add_subparsers(dest="command", metavar="command")

    def add_server(p):
        p.add_argument("--server", metavar="URL",
                       help="send the request to a running service instead of in-process")

    p_sizing = sub.add_parser("sizing", help="print KV-cache and FC sizing for a model")
    p_sizing.add_argument("--model", default="Llama3.1-8B")
    p_sizing.add_argument("--context", type=_int_arg, default=131072)
    p_sizing.add_argument("--batch", type=int, default=1)
    p_sizing.add_argument("--free-bytes", type=_int_arg, default=None)
    p_sizing.add_argument("--resident-tokens", type=_int_arg, default=None)
    add_server(p_sizing)

    p_devices = sub.add_parser("devices", help="list built-in device parameters")
    add_server(p_devices)

    p_sweep = sub.add_parser("sweep", help="run an experiment sweep and emit CSV")
    p_sweep.add_argument("--config", metavar="PATH", help="experiment config file")
    p_sweep.add_argument("--seed", type=int, default=None)
    p_sweep.add_argument("--out", metavar="PATH", help="CSV output path (default stdout)")
    p_sweep.add_argument("--mode", choices=["baseline", "pnm-kv", "png-kv"],
                         help="restrict the sweep to one execution mode")
    p_sweep.add_argument("--jobs", type=int, default=1)
    add_server(p_sweep)

    p_fid = sub.add_parser("fidelity", help="run functional desk-scale experiments")
    p_fid.add_argument("--config", metavar="PATH")
    p_fid.add_argument("--seed", type=int, default=None)
    p_fid.add_argument("--out", metavar="PATH", help="report output path (default stdout)")
    p_fid.add_argument("--trace", type=int, default=0, metavar="N",
                       help="include the first N per-step replacement trace lines")
    add_server(p_fid)

    p_serve = sub.add_parser("serve", help="start the HTTP service")
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--port", type=int, default=8000)

    return parser


def _read_config_text(path: str | None) -> str:
    if path is None:
        return ""
    try:
        with open(path, encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        raise CliError(f"cannot read config {path!r}: {exc}")


def _post(server: str, route: str, payload) -> dict:
    import httpx

    try:
        resp = httpx.post(server.rstrip("/") + route,
                          json=payload.model_dump(), timeout=600.0)
    except httpx.HTTPError as exc:
        raise CliError(f"request to {server} failed: {exc}")
    if resp.status_code == 400:
        raise CliError(resp.json().get("detail", "bad request"))
    resp.raise_for_status()
    return resp.json()


def _get(server: str, route: str) -> list:
    import httpx

    try:
        resp = httpx.get(server.rstrip("/") + route, timeout=60.0)
    except httpx.HTTPError as exc:
        raise CliError(f"request to {server} failed: {exc}")
    resp.raise_for_status()
    return resp.json()


def _write_out(text: str, path: str | None):
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def _cmd_sizing(args) -> int:
    req = SizingRequest(model=args.model, batch=args.batch, context=args.context,
                        free_bytes=args.free_bytes, resident_tokens=args.resident_tokens)
    if args.server:
        data = _post(args.server, "/sizing", req)
    else:
        data = ops.sizing(req).model_dump()
    for key in ("model", "batch", "context", "kv_bytes_per_token", "kv_cache_bytes",
                "fc_param_bytes", "fc_flops_per_token", "max_batch"):
        print(f"{key} {data[key]}")
    return 0


def _cmd_devices(args) -> int:
    rows = (_get(args.server, "/devices") if args.server
            else [d.model_dump() for d in ops.list_devices()])
    for d in rows:
        print(f"{d['name']} kind={d['kind']} mem_capacity={d['mem_capacity']} "
              f"mem_bandwidth={d['mem_bandwidth']:g} peak_compute={d['peak_compute']:g} "
              f"link_bandwidth={d['link_bandwidth']:g} max_power={d['max_power']:g} "
              f"op_cost={d['op_cost']} hw_cost={d['hw_cost']}")
    return 0


def _cmd_sweep(args) -> int:
    req = SweepRequest(config=_read_config_text(args.config), seed=args.seed,
                       mode=args.mode, jobs=max(args.jobs, 1))
    if args.server:
        data = _post(args.server, "/sweep", req)
    else:
        data = ops.sweep(req).model_dump()
    _write_out(data["csv"], args.out)
    if data["n_rows"] > 0 and data["n_ok"] == 0:
        n = data["n_rows"]
        print(f"all {n} sweep point{'s' if n != 1 else ''} infeasible", file=sys.stderr)
        return 2
    return 0


def _cmd_fidelity(args) -> int:
    req = FidelityRequest(config=_read_config_text(args.config), seed=args.seed,
                          trace_lines=args.trace)
    if args.server:
        data = _post(args.server, "/fidelity", req)
    else:
        data = ops.fidelity(req).model_dump()
    _write_out(data["report"] + "\n", args.out)
    return 0


def _cmd_serve(args) -> int:
    import uvicorn

    from .service.app import app
    uvicorn.run(app, host=args.host, port=args.port)
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise CliError(parser.format_usage() + "pnmsim: error: a command is required")
        handler = {"sizing": _cmd_sizing, "devices": _cmd_devices, "sweep": _cmd_sweep,
                   "fidelity": _cmd_fidelity, "serve": _cmd_serve}[args.command]
        return handler(args)
    except CliError as exc:
        print(str(exc), file=sys.stderr)
        return 1
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1


def entrypoint():
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
