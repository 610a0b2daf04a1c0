import math
import time

import numpy as np
import pytest

from cranetwin.bus import LoopbackBroker
from cranetwin.errors import DomainError, NotFoundError
from cranetwin.historian import Historian, RunRecord
from cranetwin.model import CraneState
from cranetwin.traces import Trace
from cranetwin.validation import (
    ValidationReport,
    ValidationService,
    Validator,
    calibrate_thresholds,
    dtw,
    max_dev,
    rmse,
)


def dtw_bruteforce(a, b):
    """Oracle: enumerate every monotone alignment path, pick the minimal
    (cost, length) lexicographically, return cost / length."""
    n, m = len(a), len(b)
    best = None

    def walk(i, j, cost, length):
        nonlocal best
        cost += abs(a[i] - b[j])
        length += 1
        if i == n - 1 and j == m - 1:
            cand = (cost, length)
            if best is None or cand < best:
                best = cand
            return
        for di, dj in ((1, 1), (1, 0), (0, 1)):
            ni, nj = i + di, j + dj
            if ni < n and nj < m:
                walk(ni, nj, cost, length)

    walk(0, 0, 0.0, 0)
    return best[0] / best[1]


class TestPointwiseMetrics:
    def test_identity(self):
        a = [1.0, -2.0, 3.5]
        assert rmse(a, a) == 0.0
        assert max_dev(a, a) == 0.0

    def test_constant_offset(self):
        a = np.array([0.5, 1.5, -0.25, 3.0])
        for c in (0.7, -1.2):
            assert rmse(a, a + c) == pytest.approx(abs(c), rel=1e-12)

    def test_rmse_against_bruteforce(self):
        rng = np.random.default_rng(3)
        a = rng.normal(size=7)
        b = rng.normal(size=7)
        brute = math.sqrt(sum((x - y) ** 2 for x, y in zip(a, b)) / 7)
        assert rmse(a, b) == pytest.approx(brute, rel=1e-12)

    def test_max_dev_single_differing_element(self):
        a = [0.0, 0.0, 0.0, 0.0]
        b = [0.0, 0.0, -0.75, 0.0]
        assert max_dev(a, b) == 0.75

    def test_max_dev_at_least_rmse(self):
        rng = np.random.default_rng(4)
        for _ in range(50):
            n = rng.integers(1, 30)
            a, b = rng.normal(size=n), rng.normal(size=n)
            assert max_dev(a, b) >= rmse(a, b) - 1e-15

    def test_errors(self):
        with pytest.raises(DomainError):
            rmse([1.0], [1.0, 2.0])
        with pytest.raises(DomainError):
            rmse([], [])
        with pytest.raises(DomainError):
            max_dev([1.0, 2.0], [1.0])


class TestDtw:
    def test_identity_is_zero(self):
        a = [0.1, 0.4, -0.2, 0.9]
        assert dtw(a, a, band=4) == 0.0

    def test_known_zero_cost_alignment(self):
        # (1,1)(2,1)(3,2)(3,3) aligns [0,0,1] with [0,1,1] at zero cost
        assert dtw([0.0, 0.0, 1.0], [0.0, 1.0, 1.0], band=3) == 0.0

    def test_matches_exhaustive_oracle(self):
        rng = np.random.default_rng(99)
        for _ in range(100):
            n = int(rng.integers(1, 7))
            m = int(rng.integers(1, 7))
            a = rng.uniform(-1, 1, size=n)
            b = rng.uniform(-1, 1, size=m)
            band = max(n, m)
            assert dtw(a, b, band) == dtw_bruteforce(a, b)

    def test_symmetric(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            a = rng.normal(size=int(rng.integers(1, 15)))
            b = rng.normal(size=int(rng.integers(1, 15)))
            band = len(a) + len(b)
            assert dtw(a, b, band) == dtw(b, a, band)

    def test_at_most_mean_absolute_difference(self):
        rng = np.random.default_rng(6)
        for _ in range(30):
            n = int(rng.integers(1, 20))
            a, b = rng.normal(size=n), rng.normal(size=n)
            assert dtw(a, b, band=n) <= np.mean(np.abs(a - b)) + 1e-15

    def test_band_too_narrow(self):
        with pytest.raises(DomainError):
            dtw([1.0, 2.0, 3.0, 4.0, 5.0], [1.0], band=2)

    def test_empty_rejected(self):
        with pytest.raises(DomainError):
            dtw([], [1.0], band=1)


def store_run_with_traces(historian, run_id, measured_theta, simulated_theta,
                          dt=0.01):
    historian.create_run(RunRecord(run_id=run_id, trajectory_id="t",
                                   mode="zv_shaped", started_at=time.time()))
    def to_trace(kind, thetas):
        samples = tuple(
            CraneState(t=k * dt, x=0.1 * k * dt, l=0.5, theta=float(th))
            for k, th in enumerate(thetas)
        )
        return Trace(run_id=run_id, kind=kind, dt=dt, samples=samples)
    for s in to_trace("measured", measured_theta).samples:
        historian.append_state(run_id, s)
    historian.store_trace(run_id, to_trace("simulated", simulated_theta))
    historian.flush()


UNIT_THRESHOLDS = {
    s: {"rmse": 0.01, "max_dev": 0.02, "dtw": 0.01} for s in ("x", "theta", "l")
}


class TestValidator:
    def test_identical_traces_pass_with_zero_values(self, tmp_path):
        historian = Historian(tmp_path / "d")
        thetas = list(np.sin(np.linspace(0, 3, 50)) * 0.05)
        store_run_with_traces(historian, "r1", thetas, thetas)
        validator = Validator(historian, UNIT_THRESHOLDS)
        report = validator.validate_run("r1")
        assert report.overall_pass is True
        assert all(r.value == 0.0 for r in report.results)
        # persisted and retrievable
        stored = ValidationReport.from_dict(historian.query_report("r1"))
        assert stored.overall_pass is True
        historian.close()

    def test_deviation_fails_theta_metrics(self, tmp_path):
        historian = Historian(tmp_path / "d")
        base = np.sin(np.linspace(0, 3, 50)) * 0.05
        store_run_with_traces(historian, "r1", list(base + 0.04), list(base))
        validator = Validator(historian, UNIT_THRESHOLDS)
        report = validator.validate_run("r1")
        assert report.overall_pass is False
        failed = {(r.signal, r.metric) for r in report.failed_results()}
        assert ("theta", "rmse") in failed

    def test_missing_traces_not_found(self, tmp_path):
        historian = Historian(tmp_path / "d")
        historian.create_run(RunRecord(run_id="r1", trajectory_id="t",
                                       mode="trapezoid", started_at=0.0))
        validator = Validator(historian, UNIT_THRESHOLDS)
        with pytest.raises(NotFoundError):
            validator.validate_run("r1")

    def test_zero_overlap_domain_error(self, tmp_path):
        historian = Historian(tmp_path / "d")
        historian.create_run(RunRecord(run_id="r1", trajectory_id="t",
                                       mode="trapezoid", started_at=0.0))
        early = tuple(CraneState(t=k * 0.01, l=0.5) for k in range(5))
        late = tuple(CraneState(t=10.0 + k * 0.01, l=0.5) for k in range(5))
        for s in early:
            historian.append_state("r1", s)
        historian.store_trace("r1", Trace(run_id="r1", kind="simulated",
                                          dt=0.01, samples=late))
        historian.flush()
        validator = Validator(historian, UNIT_THRESHOLDS)
        with pytest.raises(DomainError):
            validator.validate_run("r1")

    def test_idempotent_revalidation(self, tmp_path):
        historian = Historian(tmp_path / "d")
        base = np.sin(np.linspace(0, 3, 40)) * 0.05
        store_run_with_traces(historian, "r1", list(base), list(base * 0.99))
        validator = Validator(historian, UNIT_THRESHOLDS)
        first = validator.validate_run("r1")
        second = validator.validate_run("r1")
        assert first.results == second.results
        assert first.overall_pass == second.overall_pass

    def test_alert_published_iff_failed(self, tmp_path):
        broker = LoopbackBroker()
        historian = Historian(tmp_path / "d")
        base = np.sin(np.linspace(0, 3, 40)) * 0.05
        store_run_with_traces(historian, "good", list(base), list(base))
        store_run_with_traces(historian, "bad", list(base + 0.1), list(base))
        watcher = broker.connect()
        alerts = watcher.subscribe("dt/validation/alert")
        reports = watcher.subscribe("dt/validation/report")
        validator = Validator(historian, UNIT_THRESHOLDS,
                              bus_client=broker.connect())

        validator.validate_run("good")
        assert reports.get(timeout=2.0).payload["overall_pass"] is True
        time.sleep(0.1)
        assert alerts.drain() == []

        validator.validate_run("bad")
        assert reports.get(timeout=2.0).payload["overall_pass"] is False
        alert = alerts.get(timeout=2.0)
        assert alert.payload["run_id"] == "bad"
        assert any("theta" in f for f in alert.payload["failed"])
        broker.stop()


class TestCalibration:
    def test_thresholds_are_5x_observed_with_floor(self, tmp_path):
        historian = Historian(tmp_path / "d")
        base = np.sin(np.linspace(0, 3, 60)) * 0.05
        noisy = base + np.random.default_rng(1).normal(0, 1e-3, size=60)
        store_run_with_traces(historian, "cal", list(noisy), list(base))
        measured = historian.query_trace("cal", "measured")
        simulated = historian.query_trace("cal", "simulated")
        thresholds = calibrate_thresholds(measured, simulated)
        observed = rmse(noisy, base)
        assert thresholds["theta"]["rmse"] == pytest.approx(5 * observed, rel=1e-9)
        # identical signals hit the floor instead of zero
        assert thresholds["l"]["rmse"] == 1e-6
        historian.close()


class TestValidationService:
    def test_validates_when_both_events_seen(self, tmp_path):
        broker = LoopbackBroker()
        historian = Historian(tmp_path / "d")
        base = np.sin(np.linspace(0, 3, 40)) * 0.05
        store_run_with_traces(historian, "r1", list(base + 0.1), list(base))
        validator = Validator(historian, UNIT_THRESHOLDS,
                              bus_client=broker.connect())
        service = ValidationService(validator, broker.connect()).start()
        watcher = broker.connect()
        reports = watcher.subscribe("dt/validation/report")
        alerts = watcher.subscribe("dt/validation/alert")

        publisher = broker.connect()
        publisher.publish("dt/simulation/result", {"run_id": "r1"})
        publisher.publish("crane/run/completed", {"run_id": "r1",
                                                  "status": "completed"})
        report = reports.get(timeout=5.0)
        assert report.payload["run_id"] == "r1"
        assert report.payload["overall_pass"] is False
        assert alerts.get(timeout=5.0).payload["run_id"] == "r1"
        # exactly one alert
        time.sleep(0.2)
        assert alerts.drain() == []
        assert historian.query_report("r1")["overall_pass"] is False
        service.stop()
        broker.stop()
