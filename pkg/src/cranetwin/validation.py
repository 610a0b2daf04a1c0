"""Continuous validation: distance metrics, thresholds, reports and alerts.

Measured and simulated traces of a run are compared per signal (x, theta, l)
with three distances:

* rmse     -- root mean square of pointwise differences
* max_dev  -- maximum absolute pointwise difference
* dtw      -- dynamic time warping with a Sakoe-Chiba band: accumulated
              absolute cost along the optimal monotone alignment, normalized
              by the alignment path length (ties broken toward shorter paths)

Both traces are linearly interpolated onto the simulated trace's time grid
restricted to the overlapping time range before the pointwise metrics apply.
A report fails when any metric exceeds its threshold; a failed report raises
an operator alert on the bus.
"""

from __future__ import annotations

import math
import threading
import time
from dataclasses import dataclass

import numpy as np

from .bus import BusMessage
from .errors import BusConnectionError, DomainError, NotFoundError
from .historian import Historian
from .traces import Trace

DEFAULT_SIGNALS = ("x", "theta", "l")
DEFAULT_METRICS = ("rmse", "max_dev", "dtw")
DEFAULT_DTW_BAND = 25
THRESHOLD_CALIBRATION_FACTOR = 5.0
THRESHOLD_FLOOR = 1e-6  # keeps thresholds meaningful when a signal matches exactly


def _as_pair(a, b) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.size == 0 or b.size == 0:
        raise DomainError("metric inputs must be non-empty")
    return a, b


def rmse(a, b) -> float:
    a, b = _as_pair(a, b)
    if a.shape != b.shape:
        raise DomainError(f"length mismatch: {a.size} vs {b.size}")
    return float(np.sqrt(np.mean((a - b) ** 2)))


def max_dev(a, b) -> float:
    a, b = _as_pair(a, b)
    if a.shape != b.shape:
        raise DomainError(f"length mismatch: {a.size} vs {b.size}")
    return float(np.max(np.abs(a - b)))


def dtw(a, b, band: int = DEFAULT_DTW_BAND) -> float:
    """Banded DTW distance, normalized by optimal alignment path length."""
    a, b = _as_pair(a, b)
    n, m = a.size, b.size
    if band < abs(n - m):
        raise DomainError(
            f"band {band} too narrow for lengths {n} and {m}")

    inf = math.inf
    cost = np.full((n, m), inf)
    length = np.zeros((n, m), dtype=np.int64)
    for i in range(n):
        j_lo = max(0, i - band)
        j_hi = min(m - 1, i + band)
        for j in range(j_lo, j_hi + 1):
            d = abs(a[i] - b[j])
            if i == 0 and j == 0:
                cost[0, 0] = d
                length[0, 0] = 1
                continue
            best_cost, best_len = inf, 0
            for pi, pj in ((i - 1, j - 1), (i - 1, j), (i, j - 1)):
                if pi < 0 or pj < 0 or cost[pi, pj] == inf:
                    continue
                c, ln = cost[pi, pj], length[pi, pj]
                if c < best_cost or (c == best_cost and ln < best_len):
                    best_cost, best_len = c, ln
            if best_cost == inf:
                continue
            cost[i, j] = best_cost + d
            length[i, j] = best_len + 1
    if cost[n - 1, m - 1] == inf:
        raise DomainError("no alignment path within the band")
    return float(cost[n - 1, m - 1] / length[n - 1, m - 1])


_METRIC_FUNCTIONS = {"rmse": rmse, "max_dev": max_dev, "dtw": dtw}


@dataclass(frozen=True)
class MetricResult:
    signal: str
    metric: str
    value: float
    threshold: float
    passed: bool

    def as_dict(self) -> dict:
        return {"signal": self.signal, "metric": self.metric,
                "value": self.value, "threshold": self.threshold,
                "pass": self.passed}

    @classmethod
    def from_dict(cls, d: dict) -> "MetricResult":
        return cls(signal=d["signal"], metric=d["metric"],
                   value=float(d["value"]), threshold=float(d["threshold"]),
                   passed=bool(d["pass"]))


@dataclass(frozen=True)
class ValidationReport:
    run_id: str
    created_at: float
    results: tuple[MetricResult, ...]
    notes: str = ""

    @property
    def overall_pass(self) -> bool:
        return all(r.passed for r in self.results)

    def failed_results(self) -> list[MetricResult]:
        return [r for r in self.results if not r.passed]

    def as_dict(self) -> dict:
        return {
            "run_id": self.run_id,
            "created_at": self.created_at,
            "results": [r.as_dict() for r in self.results],
            "overall_pass": self.overall_pass,
            "notes": self.notes,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ValidationReport":
        return cls(
            run_id=d["run_id"], created_at=float(d["created_at"]),
            results=tuple(MetricResult.from_dict(r) for r in d["results"]),
            notes=d.get("notes", ""),
        )


def resample_onto_simulated(measured: Trace, simulated: Trace,
                            signals=DEFAULT_SIGNALS):
    """Interpolate both traces onto the simulated grid over the time overlap.

    Returns (grid, {signal: measured values}, {signal: simulated values}).
    """
    tm = np.asarray(measured.t, dtype=float)
    ts = np.asarray(simulated.t, dtype=float)
    lo = max(tm[0], ts[0])
    hi = min(tm[-1], ts[-1])
    grid = ts[(ts >= lo - 1e-12) & (ts <= hi + 1e-12)]
    if grid.size == 0:
        raise DomainError("measured and simulated traces have zero time overlap")
    measured_sig = {
        s: np.interp(grid, tm, np.asarray(measured.signal(s), dtype=float))
        for s in signals
    }
    simulated_sig = {
        s: np.interp(grid, ts, np.asarray(simulated.signal(s), dtype=float))
        for s in signals
    }
    return grid, measured_sig, simulated_sig


def compute_metric_results(measured: Trace, simulated: Trace,
                           thresholds: dict, dtw_band: int = DEFAULT_DTW_BAND,
                           signals=DEFAULT_SIGNALS, metrics=DEFAULT_METRICS
                           ) -> tuple[MetricResult, ...]:
    _, meas, sim = resample_onto_simulated(measured, simulated, signals)
    results = []
    for signal in signals:
        for metric in metrics:
            fn = _METRIC_FUNCTIONS[metric]
            if metric == "dtw":
                value = fn(meas[signal], sim[signal], dtw_band)
            else:
                value = fn(meas[signal], sim[signal])
            threshold = float(thresholds[signal][metric])
            results.append(MetricResult(signal=signal, metric=metric,
                                        value=value, threshold=threshold,
                                        passed=value <= threshold))
    return tuple(results)


def calibrate_thresholds(measured: Trace, simulated: Trace,
                         factor: float = THRESHOLD_CALIBRATION_FACTOR,
                         floor: float = THRESHOLD_FLOOR,
                         dtw_band: int = DEFAULT_DTW_BAND,
                         signals=DEFAULT_SIGNALS, metrics=DEFAULT_METRICS
                         ) -> dict:
    """Thresholds = factor x the metric values of a nominal calibration run,
    floored so exact matches still leave finite headroom."""
    _, meas, sim = resample_onto_simulated(measured, simulated, signals)
    thresholds: dict = {}
    for signal in signals:
        thresholds[signal] = {}
        for metric in metrics:
            fn = _METRIC_FUNCTIONS[metric]
            if metric == "dtw":
                value = fn(meas[signal], sim[signal], dtw_band)
            else:
                value = fn(meas[signal], sim[signal])
            thresholds[signal][metric] = max(factor * value, floor)
    return thresholds


class Validator:
    """Computes and persists validation reports for runs in the historian."""

    def __init__(self, historian: Historian, thresholds: dict,
                 dtw_band: int = DEFAULT_DTW_BAND, bus_client=None):
        self.historian = historian
        self.thresholds = thresholds
        self.dtw_band = dtw_band
        self.bus = bus_client

    def validate_run(self, run_id: str) -> ValidationReport:
        """Compare measured vs simulated, persist the report, and (when a bus
        client is attached) publish the report and, on failure, an alert."""
        measured = self.historian.query_trace(run_id, "measured")
        simulated = self.historian.query_trace(run_id, "simulated")
        if not measured.samples or not simulated.samples:
            raise NotFoundError(f"run {run_id} traces are empty")
        results = compute_metric_results(
            measured, simulated, self.thresholds, self.dtw_band)
        report = ValidationReport(run_id=run_id, created_at=time.time(),
                                  results=results)
        self.historian.store_report(run_id, report.as_dict())
        if self.bus is not None:
            self.bus.publish("dt/validation/report", report.as_dict())
            if not report.overall_pass:
                failed = [f"{r.signal}/{r.metric}" for r in report.failed_results()]
                self.bus.publish("dt/validation/alert", {
                    "run_id": run_id,
                    "failed": failed,
                    "message": f"validation failed for run {run_id}: "
                               + ", ".join(failed),
                })
        return report


class ValidationService:
    """Validates a run automatically once both its measured trace (run
    completed) and its simulated reference exist."""

    def __init__(self, validator: Validator, bus_client):
        self.validator = validator
        self.bus = bus_client
        self._pending: dict[str, set] = {}
        self._lock = threading.Lock()
        self._subs = []

    def start(self) -> "ValidationService":
        self._subs.append(
            self.bus.subscribe("crane/run/completed", self._on_event("completed")))
        self._subs.append(
            self.bus.subscribe("dt/simulation/result", self._on_event("simulated")))
        return self

    def stop(self) -> None:
        for sub in self._subs:
            sub.cancel()

    def _on_event(self, tag: str):
        def handler(msg: BusMessage) -> None:
            run_id = msg.payload.get("run_id")
            if run_id is None:
                return
            with self._lock:
                seen = self._pending.setdefault(run_id, set())
                seen.add(tag)
                ready = seen == {"completed", "simulated"}
                if ready:
                    del self._pending[run_id]
            if ready:
                threading.Thread(target=self._validate_with_retry,
                                 args=(run_id,), daemon=True).start()
        return handler

    def _validate_with_retry(self, run_id: str, timeout: float = 10.0) -> None:
        # Bus clients of different services have no cross-ordering guarantee:
        # the historian writes may land just after the events. Retry briefly.
        deadline = time.monotonic() + timeout
        while True:
            try:
                self.validator.validate_run(run_id)
                return
            except (NotFoundError, DomainError):
                if time.monotonic() >= deadline:
                    raise
                time.sleep(0.05)
            except BusConnectionError:
                return  # stack is shutting down
