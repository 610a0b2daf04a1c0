"""Operator command line: bring the stack up, script moves, inject faults,
inspect and export runs, re-run validation.

Exit codes: 0 success, 1 usage error, 2 transport/state error,
3 validation-failed verdict. Output is machine-parseable in csv/raw modes.
"""

from __future__ import annotations

import argparse
import csv
import json
import signal
import sys
import threading
import time
import urllib.error
import urllib.request
from datetime import datetime
from pathlib import Path

from .config import load_config
from .errors import CraneTwinError, NotFoundError
from .historian import Historian
from .validation import Validator

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_TRANSPORT = 2
EXIT_VALIDATION_FAILED = 3

CSV_HEADER = ["t", "x", "v", "l", "l_dot", "theta", "theta_dot", "wind",
              "magnet_on"]


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would sys.exit(2); we map usage to 1
        raise _UsageError(message)


class _TransportError(Exception):
    pass


def _api(base: str, method: str, path: str, body: dict | None = None) -> dict:
    url = base.rstrip("/") + path
    data = json.dumps(body).encode() if body is not None else None
    request = urllib.request.Request(url, data=data, method=method)
    if data is not None:
        request.add_header("Content-Type", "application/json")
    try:
        with urllib.request.urlopen(request, timeout=120) as response:
            return json.loads(response.read())
    except urllib.error.HTTPError as exc:
        try:
            payload = json.loads(exc.read())
            message = f"{payload.get('code', exc.code)}: {payload.get('message')}"
        except ValueError:
            message = f"HTTP {exc.code}"
        raise _TransportError(message) from exc
    except (urllib.error.URLError, OSError) as exc:
        raise _TransportError(f"cannot reach gateway at {base}: {exc}") from exc


def _print_table(rows: list[dict], columns: list[str], fmt: str) -> None:
    if fmt == "raw":
        for row in rows:
            print(json.dumps(row))
        return
    if fmt == "csv":
        writer = csv.writer(sys.stdout)
        writer.writerow(columns)
        for row in rows:
            writer.writerow([row.get(c, "") for c in columns])
        return
    widths = {c: max(len(c), *(len(str(r.get(c, ""))) for r in rows))
              if rows else len(c) for c in columns}
    print("  ".join(c.ljust(widths[c]) for c in columns))
    for row in rows:
        print("  ".join(str(row.get(c, "")).ljust(widths[c]) for c in columns))


def _verdict_exit(overall_pass: bool) -> int:
    return EXIT_OK if overall_pass else EXIT_VALIDATION_FAILED


# -- subcommands ---------------------------------------------------------------

def cmd_up(args) -> int:
    config = load_config(args.config)
    if args.headless:
        config.static_dir = None
    elif config.static_dir is None and Path("frontend/dist/index.html").is_file():
        config.static_dir = "frontend/dist"  # serve the HMI when it is built
    from .stack import TwinStack
    stack = TwinStack(config, config_path=args.config)
    try:
        stack.start(on_ready=lambda line: print(line, flush=True))
    except OSError as exc:
        print(f"startup error: {exc}", file=sys.stderr)
        stack.stop()
        return EXIT_TRANSPORT
    print("crane twin is up; Ctrl-C to stop", flush=True)
    stop = threading.Event()
    for sig in (signal.SIGINT, signal.SIGTERM):
        signal.signal(sig, lambda *_: stop.set())
    stop.wait()
    print("shutting down")
    stack.stop()
    return EXIT_OK


def _wait_run_completion(base: str, run_id: str, timeout: float = 600.0) -> dict:
    deadline = time.monotonic() + timeout
    while time.monotonic() < deadline:
        try:
            record = _api(base, "GET", f"/api/runs/{run_id}")
            if record.get("status") != "running":
                return record
        except _TransportError as exc:
            # the logger creates the record asynchronously; 404 right after
            # starting a run just means "not yet"
            if "not_found" not in str(exc):
                raise
        time.sleep(0.2)
    raise _TransportError(f"run {run_id} did not complete within {timeout}s")


def _wait_validation(base: str, run_id: str, timeout: float = 60.0) -> dict:
    deadline = time.monotonic() + timeout
    while time.monotonic() < deadline:
        try:
            return _api(base, "GET", f"/api/runs/{run_id}/validation")
        except _TransportError as exc:
            if "not_found" not in str(exc):
                raise
        time.sleep(0.2)
    raise _TransportError(f"no validation report for run {run_id} "
                          f"within {timeout}s")


def cmd_move(args) -> int:
    handle = _api(args.gateway, "POST", "/api/move",
                  {"target_x": args.x, "mode": args.mode})
    run_id = handle["run_id"]
    record = _wait_run_completion(args.gateway, run_id)
    if record.get("status") != "completed":
        print(f"{run_id} {record.get('status')}")
        return EXIT_TRANSPORT
    report = _wait_validation(args.gateway, run_id)
    verdict = "PASS" if report["overall_pass"] else "FAIL"
    print(f"{run_id} {verdict}")
    return _verdict_exit(report["overall_pass"])


def cmd_hoist(args) -> int:
    handle = _api(args.gateway, "POST", "/api/hoist", {"target_l": args.l})
    record = _wait_run_completion(args.gateway, handle["run_id"])
    print(f"{handle['run_id']} {record.get('status')}")
    return EXIT_OK if record.get("status") == "completed" else EXIT_TRANSPORT


def cmd_home(args) -> int:
    _api(args.gateway, "POST", "/api/home")
    print("homed")
    return EXIT_OK


def cmd_zero(args) -> int:
    _api(args.gateway, "POST", "/api/zero")
    print("zeroed")
    return EXIT_OK


def cmd_fault(args) -> int:
    if args.clear:
        _api(args.gateway, "POST", "/api/faults", {"clear": True})
        print("fault cleared")
        return EXIT_OK
    body = {"damping_scale": args.damping_scale,
            "rope_length_offset": args.rope_offset,
            "encoder_bias_extra": args.encoder_bias,
            "active": True}
    _api(args.gateway, "POST", "/api/faults", body)
    print("fault injected")
    return EXIT_OK


def cmd_runs_list(args) -> int:
    runs = _api(args.gateway, "GET", "/api/runs")["runs"]
    for run in runs:
        run["started"] = datetime.fromtimestamp(
            run["started_at"]).isoformat(timespec="seconds")
        if run["overall_pass"] is not None:
            run["verdict"] = "PASS" if run["overall_pass"] else "FAIL"
        else:
            run["verdict"] = ""
    _print_table(runs, ["run_id", "mode", "status", "started", "verdict"],
                 args.format)
    return EXIT_OK


def cmd_runs_show(args) -> int:
    record = _api(args.gateway, "GET", f"/api/runs/{args.run_id}")
    if args.format == "raw":
        print(json.dumps(record))
    else:
        for key, value in record.items():
            print(f"{key}: {value}")
    try:
        report = _api(args.gateway, "GET",
                      f"/api/runs/{args.run_id}/validation")
        rows = report["results"]
        print("validation:",
              "PASS" if report["overall_pass"] else "FAIL")
        _print_table(rows, ["signal", "metric", "value", "threshold", "pass"],
                     args.format if args.format != "raw" else "csv")
    except _TransportError as exc:
        if "not_found" in str(exc):
            print("validation: (no report)")
        else:
            raise
    return EXIT_OK


def cmd_runs_export(args) -> int:
    base_path = Path(args.csv)
    stem = base_path.with_suffix("") if base_path.suffix == ".csv" else base_path
    written = []
    for kind in ("measured", "simulated", "envelope_lower", "envelope_upper"):
        try:
            trace = _api(args.gateway, "GET",
                         f"/api/runs/{args.run_id}/trace?kind={kind}")
        except _TransportError as exc:
            if "not_found" in str(exc) and kind != "measured":
                continue
            raise
        out = Path(f"{stem}.{kind}.csv")
        with open(out, "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(CSV_HEADER)
            for sample in trace["samples"]:
                writer.writerow([sample[c] for c in CSV_HEADER])
        written.append(str(out))
    for path in written:
        print(path)
    return EXIT_OK


def cmd_validate(args) -> int:
    config = load_config(args.config)
    if config.thresholds is None:
        print("no thresholds in config; start the stack once to calibrate",
              file=sys.stderr)
        return EXIT_TRANSPORT
    historian = Historian(config.data_dir, config.logger)
    validator = Validator(historian, config.thresholds,
                          dtw_band=config.dtw_band)
    try:
        report = validator.validate_run(args.run_id)
    except NotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_TRANSPORT
    finally:
        historian.close()
    verdict = "PASS" if report.overall_pass else "FAIL"
    print(f"{args.run_id} {verdict}")
    for r in report.results:
        print(f"  {r.signal}/{r.metric}: {r.value:.6g} "
              f"(threshold {r.threshold:.6g}) "
              f"{'ok' if r.passed else 'FAILED'}")
    return _verdict_exit(report.overall_pass)


def build_parser() -> _Parser:
    parser = _Parser(prog="crane-twin",
                     description="desk-scale gantry crane digital twin")
    parser.add_argument("--gateway", default="http://127.0.0.1:8080",
                        help="gateway base URL")
    parser.add_argument("--config", default=None,
                        help="config file path (or $CRANETWIN_CONFIG)")
    parser.add_argument("--format", choices=["table", "csv", "raw"],
                        default="table", help="output format")
    sub = parser.add_subparsers(dest="command", required=True)

    up = sub.add_parser("up", help="start the whole twin stack")
    up.add_argument("--config", default=argparse.SUPPRESS,
                    help="config file path (or $CRANETWIN_CONFIG)")
    up.add_argument("--headless", action="store_true",
                    help="do not serve the HMI static files")
    up.set_defaults(fn=cmd_up)

    move = sub.add_parser("move", help="move the cart and wait for validation")
    move.add_argument("--x", type=float, required=True)
    move.add_argument("--mode", choices=["zv", "trap"], default="zv")
    move.set_defaults(fn=cmd_move)

    hoist = sub.add_parser("hoist", help="hoist to a rope length")
    hoist.add_argument("--l", type=float, required=True)
    hoist.set_defaults(fn=cmd_hoist)

    sub.add_parser("home", help="home the cart").set_defaults(fn=cmd_home)
    sub.add_parser("zero", help="zero the swing encoder").set_defaults(fn=cmd_zero)

    fault = sub.add_parser("fault", help="inject or clear a plant fault")
    fault.add_argument("--damping-scale", type=float, default=1.0)
    fault.add_argument("--rope-offset", type=float, default=0.0)
    fault.add_argument("--encoder-bias", type=float, default=0.0)
    fault.add_argument("--clear", action="store_true")
    fault.set_defaults(fn=cmd_fault)

    runs = sub.add_parser("runs", help="inspect stored runs")
    runs_sub = runs.add_subparsers(dest="runs_command", required=True)
    runs_sub.add_parser("list").set_defaults(fn=cmd_runs_list)
    show = runs_sub.add_parser("show")
    show.add_argument("run_id")
    show.set_defaults(fn=cmd_runs_show)
    export = runs_sub.add_parser("export")
    export.add_argument("run_id")
    export.add_argument("--csv", required=True,
                        help="output path stem; one file per trace kind")
    export.set_defaults(fn=cmd_runs_export)

    validate = sub.add_parser("validate",
                              help="re-run validation for a stored run")
    validate.add_argument("run_id")
    validate.add_argument("--config", default=argparse.SUPPRESS,
                          help="config file path (or $CRANETWIN_CONFIG)")
    validate.set_defaults(fn=cmd_validate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.fn(args)
    except _TransportError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_TRANSPORT
    except CraneTwinError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_TRANSPORT
    except KeyboardInterrupt:
        return EXIT_TRANSPORT


if __name__ == "__main__":
    sys.exit(main())
