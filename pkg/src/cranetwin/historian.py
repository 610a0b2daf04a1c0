"""Append-only time-series storage of crane states, runs and reports.

Plain-file layout, newline-delimited JSON records, diffable and
dependency-free:

    data_dir/
      runs/
        index.jsonl          append-only run lifecycle index
        <run_id>/
          manifest.json      RunRecord
          trajectory.jsonl   header line, then one waypoint object per line
          measured.jsonl     one CraneState per line
          simulated.jsonl
          envelope_lower.jsonl
          envelope_upper.jsonl
          validation.json    ValidationReport
      live/
        YYYY-MM-DD.jsonl     idle (non-run) telemetry, day-partitioned

State records use exactly the CraneState field names:
t, x, v, l, l_dot, theta, theta_dot, wind, magnet_on.

Writeout decimation keeps every Nth appended sample per stream (the first
sample always stored), so stored count = ceil(appended / N). Time query
intervals are closed on both ends.

Concurrency: one writer per file; the run index is appended under a lock;
readers may run concurrently and never observe partial samples (incomplete
trailing lines are ignored).
"""

from __future__ import annotations

import datetime as _dt
import json
import os
import threading
import time
from dataclasses import dataclass, replace
from pathlib import Path
from typing import IO, Optional

from .bus import BusMessage
from .errors import ConflictError, DomainError, NotFoundError, StateError, StorageError
from .model import CraneState
from .traces import TRACE_KINDS, Trace

RUN_STATUSES = ("running", "completed", "aborted")


@dataclass(frozen=True)
class RunRecord:
    run_id: str
    trajectory_id: str
    mode: str
    started_at: float            # wall-clock epoch seconds
    completed_at: Optional[float] = None
    status: str = "running"
    fault_active: bool = False

    def __post_init__(self) -> None:
        if self.status not in RUN_STATUSES:
            raise DomainError(f"unknown run status {self.status!r}")
        if self.completed_at is not None and self.completed_at < self.started_at:
            raise DomainError("completed_at must be >= started_at")

    def as_dict(self) -> dict:
        return {
            "run_id": self.run_id, "trajectory_id": self.trajectory_id,
            "mode": self.mode, "started_at": self.started_at,
            "completed_at": self.completed_at, "status": self.status,
            "fault_active": self.fault_active,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RunRecord":
        return cls(
            run_id=d["run_id"], trajectory_id=d["trajectory_id"],
            mode=d["mode"], started_at=float(d["started_at"]),
            completed_at=None if d.get("completed_at") is None
            else float(d["completed_at"]),
            status=d.get("status", "running"),
            fault_active=bool(d.get("fault_active", False)),
        )


@dataclass(frozen=True)
class LoggerConfig:
    writeout_decimation: int = 1     # store every Nth sample
    buffer_flush_period: float = 1.0  # s

    def __post_init__(self) -> None:
        if self.writeout_decimation < 1:
            raise DomainError("writeout_decimation must be >= 1")
        if self.buffer_flush_period <= 0.0:
            raise DomainError("buffer_flush_period must be > 0")


class Historian:
    """File-backed store for runs, traces and validation reports."""

    def __init__(self, data_dir: str | Path,
                 logger_config: LoggerConfig = LoggerConfig()):
        self.data_dir = Path(data_dir)
        self.logger_config = logger_config
        self.runs_dir = self.data_dir / "runs"
        self.live_dir = self.data_dir / "live"
        try:
            self.runs_dir.mkdir(parents=True, exist_ok=True)
            self.live_dir.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise StorageError(f"cannot initialize data dir: {exc}") from exc
        self._lock = threading.Lock()
        self._handles: dict[Path, IO[str]] = {}
        self._decimation_counters: dict[str, int] = {}

    # -- run lifecycle ------------------------------------------------------

    def create_run(self, record: RunRecord) -> str:
        run_dir = self.runs_dir / record.run_id
        with self._lock:
            if run_dir.exists():
                raise ConflictError(f"run {record.run_id} already exists")
            run_dir.mkdir(parents=True)
            self._write_manifest(record)
            self._append_index({"event": "created", **record.as_dict()})
        return record.run_id

    def complete_run(self, run_id: str, status: str = "completed") -> None:
        if status not in ("completed", "aborted"):
            raise DomainError(f"completion status must be completed|aborted, "
                              f"got {status!r}")
        with self._lock:
            record = self._read_manifest(run_id)
            if record.status != "running":
                raise StateError(
                    f"run {run_id} is already {record.status}; only "
                    "running runs can be completed")
            record = replace(record, status=status, completed_at=time.time())
            self._write_manifest(record)
            self._append_index({"event": status, **record.as_dict()})
        self.flush()

    def run_record(self, run_id: str) -> RunRecord:
        with self._lock:
            return self._read_manifest(run_id)

    def list_runs(self) -> list[RunRecord]:
        records = []
        with self._lock:
            for entry in self.runs_dir.iterdir():
                if entry.is_dir() and (entry / "manifest.json").exists():
                    records.append(self._read_manifest(entry.name))
        return sorted(records, key=lambda r: (r.started_at, r.run_id))

    # -- state streams ------------------------------------------------------

    def append_state(self, run_id: Optional[str], state: CraneState,
                     kind: str = "measured") -> None:
        """Append one sample to a run trace (or the live stream if run_id is
        None), subject to writeout decimation."""
        if run_id is None:
            key = "live"
            path = self._live_path()
        else:
            key = f"{run_id}/{kind}"
            path = self._trace_path(run_id, kind)
        with self._lock:
            count = self._decimation_counters.get(key, 0)
            self._decimation_counters[key] = count + 1
            if count % self.logger_config.writeout_decimation != 0:
                return
            self._append_line(path, state.as_dict())

    def store_trace(self, run_id: str, trace: Trace) -> None:
        """Write a whole trace file at once (simulated / envelope kinds)."""
        path = self._trace_path(run_id, trace.kind)
        with self._lock:
            if not path.parent.exists():
                raise NotFoundError(f"run {run_id} does not exist")
            tmp = path.with_suffix(".tmp")
            with open(tmp, "w", encoding="utf-8") as f:
                for sample in trace.samples:
                    f.write(json.dumps(sample.as_dict()) + "\n")
                f.flush()
                os.fsync(f.fileno())
            tmp.replace(path)

    def query_trace(self, run_id: str, kind: str,
                    t_from: Optional[float] = None,
                    t_to: Optional[float] = None) -> Trace:
        """Samples with t_from <= t <= t_to (closed interval), in time order."""
        if kind not in TRACE_KINDS:
            raise NotFoundError(f"unknown trace kind {kind!r}")
        run_dir = self.runs_dir / run_id
        if not run_dir.exists():
            raise NotFoundError(f"run {run_id} does not exist")
        path = self._trace_path(run_id, kind)
        if not path.exists():
            raise NotFoundError(f"run {run_id} has no {kind} trace")
        samples = []
        for record in self._read_lines(path):
            t = record["t"]
            if t_from is not None and t < t_from:
                continue
            if t_to is not None and t > t_to:
                continue
            samples.append(CraneState.from_dict(record))
        return Trace.from_samples(run_id, kind, tuple(samples))

    # -- trajectories ---------------------------------------------------------

    def store_trajectory(self, run_id: str, trajectory: dict) -> None:
        """Persist the executed setpoint profile: a header line with the
        trajectory metadata, then one waypoint object per line."""
        run_dir = self.runs_dir / run_id
        with self._lock:
            if not run_dir.exists():
                raise NotFoundError(f"run {run_id} does not exist")
            tmp = run_dir / "trajectory.tmp"
            header = {k: v for k, v in trajectory.items() if k != "waypoints"}
            with open(tmp, "w", encoding="utf-8") as f:
                f.write(json.dumps(header) + "\n")
                for waypoint in trajectory["waypoints"]:
                    f.write(json.dumps(waypoint) + "\n")
                f.flush()
                os.fsync(f.fileno())
            tmp.replace(run_dir / "trajectory.jsonl")

    def query_trajectory(self, run_id: str) -> dict:
        path = self.runs_dir / run_id / "trajectory.jsonl"
        if not path.exists():
            raise NotFoundError(f"run {run_id} has no stored trajectory")
        records = self._read_lines(path)
        header, waypoints = records[0], records[1:]
        return {**header, "waypoints": waypoints}

    # -- validation reports -------------------------------------------------

    def store_report(self, run_id: str, report: dict) -> None:
        """Persist a validation report; latest wins, replacement is flagged
        in the report's notes."""
        run_dir = self.runs_dir / run_id
        if not run_dir.exists():
            raise NotFoundError(f"run {run_id} does not exist")
        path = run_dir / "validation.json"
        with self._lock:
            if path.exists():
                previous = json.loads(path.read_text(encoding="utf-8"))
                note = (f"replaced report created_at="
                        f"{previous.get('created_at')}")
                existing = report.get("notes") or ""
                report = {**report,
                          "notes": f"{existing}; {note}" if existing else note}
            tmp = path.with_suffix(".tmp")
            tmp.write_text(json.dumps(report, indent=1), encoding="utf-8")
            tmp.replace(path)

    def query_report(self, run_id: str) -> dict:
        path = self.runs_dir / run_id / "validation.json"
        if not path.exists():
            raise NotFoundError(f"run {run_id} has no validation report")
        return json.loads(path.read_text(encoding="utf-8"))

    # -- maintenance --------------------------------------------------------

    def set_logger_config(self, config: LoggerConfig) -> None:
        self.logger_config = config

    def flush(self) -> None:
        """Flush and fsync all open append handles; after this returns, a
        process restart preserves everything stored so far."""
        with self._lock:
            for handle in self._handles.values():
                try:
                    handle.flush()
                    os.fsync(handle.fileno())
                except OSError as exc:
                    raise StorageError(f"flush failed: {exc}") from exc

    def close(self) -> None:
        self.flush()
        with self._lock:
            for handle in self._handles.values():
                handle.close()
            self._handles.clear()

    # -- internals ----------------------------------------------------------

    def _trace_path(self, run_id: str, kind: str) -> Path:
        if kind not in TRACE_KINDS:
            raise NotFoundError(f"unknown trace kind {kind!r}")
        return self.runs_dir / run_id / f"{kind}.jsonl"

    def _live_path(self) -> Path:
        day = _dt.date.fromtimestamp(time.time()).isoformat()
        return self.live_dir / f"{day}.jsonl"

    def _handle(self, path: Path) -> IO[str]:
        handle = self._handles.get(path)
        if handle is None:
            try:
                handle = open(path, "a", encoding="utf-8")
            except OSError as exc:
                raise StorageError(f"cannot open {path}: {exc}") from exc
            self._handles[path] = handle
        return handle

    def _append_line(self, path: Path, record: dict) -> None:
        handle = self._handle(path)
        try:
            handle.write(json.dumps(record) + "\n")
        except OSError as exc:
            raise StorageError(f"append to {path} failed: {exc}") from exc

    def _append_index(self, event: dict) -> None:
        self._append_line(self.runs_dir / "index.jsonl",
                          {"at": time.time(), **event})

    def _write_manifest(self, record: RunRecord) -> None:
        path = self.runs_dir / record.run_id / "manifest.json"
        tmp = path.with_suffix(".tmp")
        tmp.write_text(json.dumps(record.as_dict(), indent=1),
                       encoding="utf-8")
        tmp.replace(path)

    def _read_manifest(self, run_id: str) -> RunRecord:
        path = self.runs_dir / run_id / "manifest.json"
        if not path.exists():
            raise NotFoundError(f"run {run_id} does not exist")
        return RunRecord.from_dict(json.loads(path.read_text(encoding="utf-8")))

    @staticmethod
    def _read_lines(path: Path) -> list[dict]:
        out = []
        with open(path, "r", encoding="utf-8") as f:
            lines = f.readlines()
        for i, line in enumerate(lines):
            line = line.strip()
            if not line:
                continue
            try:
                out.append(json.loads(line))
            except ValueError:
                if i == len(lines) - 1:
                    continue  # partially written trailing line
                raise StorageError(f"corrupt record in {path} line {i + 1}")
        return out


class LoggingApp:
    """Bus-fed logger: routes crane state samples into the historian.

    Subscribes to the crane topics; samples carry the active run id (or none,
    then they go to the day-partitioned live stream). Flushes periodically
    and on run completion.
    """

    def __init__(self, bus_client, historian: Historian):
        self.bus = bus_client
        self.historian = historian
        self._flusher_stop = threading.Event()
        self._subs = []

    def start(self) -> "LoggingApp":
        self._subs.append(self.bus.subscribe("crane/state", self._on_state))
        self._subs.append(
            self.bus.subscribe("crane/run/started", self._on_started))
        self._subs.append(
            self.bus.subscribe("crane/run/completed", self._on_completed))
        threading.Thread(target=self._flush_loop, daemon=True).start()
        return self

    def stop(self) -> None:
        self._flusher_stop.set()
        for sub in self._subs:
            sub.cancel()
        self.historian.flush()

    def _on_state(self, msg: BusMessage) -> None:
        payload = msg.payload
        state = CraneState.from_dict(payload["state"])
        self.historian.append_state(payload.get("run_id"), state)

    def _on_started(self, msg: BusMessage) -> None:
        record = RunRecord.from_dict(msg.payload["record"])
        try:
            self.historian.create_run(record)
        except ConflictError:
            pass  # replayed event
        trajectory = msg.payload.get("trajectory")
        if trajectory is not None:
            self.historian.store_trajectory(record.run_id, trajectory)

    def _on_completed(self, msg: BusMessage) -> None:
        payload = msg.payload
        try:
            self.historian.complete_run(payload["run_id"],
                                        payload.get("status", "completed"))
        except (NotFoundError, StateError):
            pass

    def _flush_loop(self) -> None:
        while not self._flusher_stop.wait(
                self.historian.logger_config.buffer_flush_period):
            try:
                self.historian.flush()
            except StorageError:
                pass
