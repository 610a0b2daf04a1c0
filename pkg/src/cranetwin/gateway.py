"""HTTP front door for the HMI and scripts.

Plain HTTP/1.1 with JSON bodies over a threading stdlib server; no
authentication, desk-scale only. Mutating endpoints delegate to the virtual
crane (which serializes commands itself); reads come from the historian, so
the gateway holds no authoritative state and can restart freely.

    POST /api/move {target_x, mode}     -> RunHandle
    POST /api/hoist {target_l}          -> RunHandle
    POST /api/home | /api/zero          -> {ok: true}
    POST /api/magnet {on}               -> {ok: true}
    POST /api/faults {FaultSpec|clear}  -> {ok: true}
    GET  /api/status                    -> StatusSnapshot
    GET  /api/runs                      -> [RunRecord + overall_pass]
    GET  /api/runs/{id}                 -> RunRecord
    GET  /api/runs/{id}/trace?kind=&from=&to=  -> Trace
    GET  /api/runs/{id}/validation      -> ValidationReport
    GET  /api/config | PUT /api/config  -> TwinConfig (PUT applies
         logger/thresholds/envelope atomically)
    GET  /api/stream                    -> server-sent events: state, alert,
         heartbeat every heartbeat_period

Error bodies: {"code": bad_request|not_found|conflict|state_error|internal,
"message": ...} with statuses 400/404/409/409/500. Stream fan-out buffers
per client and drops the oldest events on slow consumers.
"""

from __future__ import annotations

import json
import queue
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from typing import Optional
from urllib.parse import parse_qs, urlparse

from .config import TwinConfig, validate_thresholds
from .crane import FaultSpec, VirtualCrane
from .errors import (
    BusyError,
    ConflictError,
    DomainError,
    NotFoundError,
    StateError,
)
from .historian import Historian, LoggerConfig
from .simulation import EnvelopeConfig

_STATUS_FOR = [
    (DomainError, 400, "bad_request"),
    (NotFoundError, 404, "not_found"),
    (BusyError, 409, "conflict"),
    (ConflictError, 409, "conflict"),
    (StateError, 409, "state_error"),
]


def _map_error(exc: Exception) -> tuple[int, str]:
    for etype, status, code in _STATUS_FOR:
        if isinstance(exc, etype):
            return status, code
    return 500, "internal"


class _StreamHub:
    """Fans bus events out to connected stream clients (drop-oldest)."""

    def __init__(self, maxsize: int = 1000):
        self._clients: list[queue.Queue] = []
        self._lock = threading.Lock()
        self._maxsize = maxsize

    def attach(self) -> queue.Queue:
        q: queue.Queue = queue.Queue(maxsize=self._maxsize)
        with self._lock:
            self._clients.append(q)
        return q

    def detach(self, q: queue.Queue) -> None:
        with self._lock:
            if q in self._clients:
                self._clients.remove(q)

    def push(self, event: str, data: dict) -> None:
        with self._lock:
            clients = list(self._clients)
        for q in clients:
            try:
                q.put_nowait((event, data))
            except queue.Full:
                try:
                    q.get_nowait()  # drop oldest
                except queue.Empty:
                    pass
                try:
                    q.put_nowait((event, data))
                except queue.Full:
                    pass


class Gateway:
    def __init__(self, crane: VirtualCrane, historian: Historian,
                 validator, config: TwinConfig, bus_client,
                 simulation_service=None):
        self.crane = crane
        self.historian = historian
        self.validator = validator
        self.config = config
        self.bus = bus_client
        self.simulation_service = simulation_service
        self.hub = _StreamHub()
        self._server: Optional[ThreadingHTTPServer] = None
        self.port: Optional[int] = None
        self._config_lock = threading.Lock()

    def start(self) -> "Gateway":
        self.bus.subscribe(
            "crane/state",
            lambda m: self.hub.push("state", m.payload))
        self.bus.subscribe(
            "dt/validation/alert",
            lambda m: self.hub.push("alert", m.payload))

        gateway = self

        class Handler(_GatewayHandler):
            gw = gateway

        try:
            server = ThreadingHTTPServer(
                (self.config.gateway_host, self.config.gateway_port), Handler)
        except OSError as exc:
            raise OSError(
                f"gateway port {self.config.gateway_port} unavailable: {exc}"
            ) from exc
        server.daemon_threads = True
        self._server = server
        self.port = server.server_address[1]
        threading.Thread(target=server.serve_forever, daemon=True).start()
        return self

    def stop(self) -> None:
        if self._server is not None:
            self._server.shutdown()
            self._server.server_close()

    # -- request logic (transport-independent) -------------------------------

    def apply_config(self, body: dict) -> dict:
        """Validate all sections first, then swap them in atomically."""
        with self._config_lock:
            new_logger = self.historian.logger_config
            new_thresholds = self.validator.thresholds
            new_envelope = (self.simulation_service.envelope
                            if self.simulation_service else None)
            if "logger" in body:
                raw = body["logger"]
                new_logger = LoggerConfig(
                    writeout_decimation=int(raw.get(
                        "writeout_decimation",
                        new_logger.writeout_decimation)),
                    buffer_flush_period=float(raw.get(
                        "buffer_flush_period",
                        new_logger.buffer_flush_period)),
                )
            if "thresholds" in body:
                new_thresholds = validate_thresholds(body["thresholds"])
            if "envelope" in body:
                new_envelope = EnvelopeConfig.from_dict(body["envelope"])

            self.historian.set_logger_config(new_logger)
            self.config.logger = new_logger
            self.validator.thresholds = new_thresholds
            self.config.thresholds = new_thresholds
            if self.simulation_service is not None and new_envelope is not None:
                self.simulation_service.envelope = new_envelope
                self.config.envelope = new_envelope
        return self.config.as_dict()

    def list_runs(self) -> list[dict]:
        out = []
        for record in self.historian.list_runs():
            entry = record.as_dict()
            try:
                entry["overall_pass"] = \
                    self.historian.query_report(record.run_id)["overall_pass"]
            except NotFoundError:
                entry["overall_pass"] = None
            out.append(entry)
        return out


class _GatewayHandler(BaseHTTPRequestHandler):
    gw: Gateway  # injected by Gateway.start
    protocol_version = "HTTP/1.1"

    def log_message(self, *args) -> None:  # quiet server
        pass

    # -- plumbing -------------------------------------------------------------

    def _json_body(self) -> dict:
        length = int(self.headers.get("Content-Length", 0))
        if length == 0:
            return {}
        raw = self.rfile.read(length)
        try:
            body = json.loads(raw)
        except ValueError as exc:
            raise DomainError(f"invalid JSON body: {exc}") from exc
        if not isinstance(body, dict):
            raise DomainError("JSON body must be an object")
        return body

    def _respond(self, status: int, payload: dict) -> None:
        data = json.dumps(payload).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def _respond_error(self, exc: Exception) -> None:
        status, code = _map_error(exc)
        self._respond(status, {"code": code, "message": str(exc)})

    # -- routing --------------------------------------------------------------

    def do_POST(self) -> None:
        try:
            path = urlparse(self.path).path
            body = self._json_body()
            if path == "/api/move":
                mode = body.get("mode", "zv_shaped")
                if mode == "zv":
                    mode = "zv_shaped"
                elif mode == "trap":
                    mode = "trapezoid"
                handle = self.gw.crane.move_to(
                    _require_number(body, "target_x"), mode)
                self._respond(200, handle.as_dict())
            elif path == "/api/hoist":
                handle = self.gw.crane.hoist_to(
                    _require_number(body, "target_l"))
                self._respond(200, handle.as_dict())
            elif path == "/api/home":
                self.gw.crane.home()
                self._respond(200, {"ok": True})
            elif path == "/api/zero":
                self.gw.crane.zero()
                self._respond(200, {"ok": True})
            elif path == "/api/magnet":
                if "on" not in body:
                    raise DomainError("body must carry 'on'")
                self.gw.crane.set_magnet(bool(body["on"]))
                self._respond(200, {"ok": True})
            elif path == "/api/faults":
                if body.get("clear") or body.get("active") is False:
                    self.gw.crane.clear_fault()
                else:
                    self.gw.crane.inject_fault(FaultSpec.from_dict(body))
                self._respond(200, {"ok": True})
            else:
                raise NotFoundError(f"no such endpoint: POST {path}")
        except Exception as exc:  # noqa: BLE001 - mapped to transport errors
            self._respond_error(exc)

    def do_PUT(self) -> None:
        try:
            path = urlparse(self.path).path
            if path == "/api/config":
                self._respond(200, self.gw.apply_config(self._json_body()))
            else:
                raise NotFoundError(f"no such endpoint: PUT {path}")
        except Exception as exc:  # noqa: BLE001
            self._respond_error(exc)

    def do_GET(self) -> None:
        try:
            parsed = urlparse(self.path)
            path = parsed.path
            query = {k: v[0] for k, v in parse_qs(parsed.query).items()}
            if path == "/api/status":
                self._respond(200, self.gw.crane.status().as_dict())
            elif path == "/api/runs":
                self._respond(200, {"runs": self.gw.list_runs()})
            elif path == "/api/config":
                self._respond(200, self.gw.config.as_dict())
            elif path == "/api/stream":
                self._serve_stream()
            elif path.startswith("/api/runs/"):
                self._serve_run(path, query)
            else:
                self._serve_static(path)
        except Exception as exc:  # noqa: BLE001
            self._respond_error(exc)

    def _serve_run(self, path: str, query: dict) -> None:
        parts = path.split("/")[3:]  # after /api/runs/
        run_id = parts[0]
        if len(parts) == 1:
            self._respond(200, self.gw.historian.run_record(run_id).as_dict())
        elif parts[1] == "trace":
            kind = query.get("kind", "measured")
            t_from = float(query["from"]) if "from" in query else None
            t_to = float(query["to"]) if "to" in query else None
            trace = self.gw.historian.query_trace(run_id, kind, t_from, t_to)
            self._respond(200, trace.as_dict())
        elif parts[1] == "validation":
            self._respond(200, self.gw.historian.query_report(run_id))
        else:
            raise NotFoundError(f"no such endpoint: GET {path}")

    def _serve_stream(self) -> None:
        q = self.gw.hub.attach()
        try:
            self.send_response(200)
            self.send_header("Content-Type", "text/event-stream")
            self.send_header("Cache-Control", "no-cache")
            self.send_header("Connection", "keep-alive")
            self.end_headers()
            heartbeat = self.gw.config.heartbeat_period
            while True:
                try:
                    event, data = q.get(timeout=heartbeat)
                except queue.Empty:
                    event, data = "heartbeat", {}
                frame = f"event: {event}\ndata: {json.dumps(data)}\n\n"
                self.wfile.write(frame.encode("utf-8"))
                self.wfile.flush()
        except (BrokenPipeError, ConnectionResetError, OSError):
            pass  # client went away
        finally:
            self.gw.hub.detach(q)

    def _serve_static(self, path: str) -> None:
        static_dir = self.gw.config.static_dir
        if not static_dir:
            raise NotFoundError(f"no such endpoint: GET {path}")
        root = Path(static_dir).resolve()
        target = (root / path.lstrip("/")).resolve()
        if path in ("/", ""):
            target = root / "index.html"
        if not str(target).startswith(str(root)) or not target.is_file():
            raise NotFoundError(f"no such file: {path}")
        content_types = {".html": "text/html", ".js": "text/javascript",
                         ".css": "text/css", ".map": "application/json",
                         ".svg": "image/svg+xml"}
        data = target.read_bytes()
        self.send_response(200)
        self.send_header("Content-Type",
                         content_types.get(target.suffix, "application/octet-stream"))
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)


def _require_number(body: dict, key: str) -> float:
    if key not in body:
        raise DomainError(f"body must carry '{key}'")
    try:
        return float(body[key])
    except (TypeError, ValueError) as exc:
        raise DomainError(f"'{key}' must be a number") from exc
