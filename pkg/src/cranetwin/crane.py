"""Fully simulated physical crane behind the same command surface a hardware
interface would expose.

One plant integration loop owns the state. Motion commands (move_to,
hoist_to) request a trajectory over the bus, then execute it in a worker
thread as idealized profile following: the commanded interval acceleration
is applied exactly, so with sensors and faults off a run reproduces the
simulation service's trace bit-for-bit. Sensor models add encoder
quantization/bias and optional gaussian noise on top of the true state; an
Ornstein-Uhlenbeck wind process (seeded) disturbs the payload.

Faults (damping scale, rope length offset, extra encoder bias) override the
plant seen by subsequent runs until cleared, which is what makes continuous
validation trip its thresholds.

Published topics: crane/state every sample period (run samples carry the
run_id), crane/run/started, crane/run/completed. Consumes
dt/trajectory/result.
"""

from __future__ import annotations

import math
import queue
import threading
import time
import uuid
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .bus import BusMessage
from .errors import BusConnectionError, BusyError, DomainError, StateError
from .model import (
    CraneParameters,
    CraneState,
    PlantInput,
    ZERO_INPUT,
    derivatives,
    step_rk4,
)
from .simulation import interval_accelerations
from .trajectory import Trajectory, damping_ratio_for, plan_zv_shaped


@dataclass(frozen=True)
class SensorModel:
    """Swing encoder, axis position and anemometer measurement model.

    encoder_resolution 0 disables quantization (ideal encoder), used by the
    bit-compatibility contract between measured and simulated traces.
    """

    encoder_resolution: float = 2.0 * math.pi / 4096  # rad per count
    encoder_bias: float = 0.0                          # rad
    position_noise_std: float = 0.0                    # m, on x and l
    anemometer_noise_std: float = 0.0                  # m/s
    sample_period: float = 0.01                        # s

    def __post_init__(self) -> None:
        if self.encoder_resolution < 0.0:
            raise DomainError("encoder_resolution must be >= 0")
        if self.position_noise_std < 0.0 or self.anemometer_noise_std < 0.0:
            raise DomainError("noise std must be >= 0")
        if self.sample_period <= 0.0:
            raise DomainError("sample_period must be > 0")


@dataclass(frozen=True)
class FaultSpec:
    damping_scale: float = 1.0
    rope_length_offset: float = 0.0
    encoder_bias_extra: float = 0.0
    active: bool = False

    def __post_init__(self) -> None:
        if self.damping_scale <= 0.0:
            raise DomainError("damping_scale must be > 0")

    def as_dict(self) -> dict:
        return {"damping_scale": self.damping_scale,
                "rope_length_offset": self.rope_length_offset,
                "encoder_bias_extra": self.encoder_bias_extra,
                "active": self.active}

    @classmethod
    def from_dict(cls, d: dict) -> "FaultSpec":
        return cls(damping_scale=float(d.get("damping_scale", 1.0)),
                   rope_length_offset=float(d.get("rope_length_offset", 0.0)),
                   encoder_bias_extra=float(d.get("encoder_bias_extra", 0.0)),
                   active=bool(d.get("active", True)))


@dataclass(frozen=True)
class RunHandle:
    run_id: str
    trajectory_id: str
    started_at: float
    status: str  # running | completed | aborted

    def as_dict(self) -> dict:
        return {"run_id": self.run_id, "trajectory_id": self.trajectory_id,
                "started_at": self.started_at, "status": self.status}


@dataclass(frozen=True)
class StatusSnapshot:
    state: CraneState  # sensor view
    homed: bool
    busy: bool
    fault_active: bool

    def as_dict(self) -> dict:
        return {"state": self.state.as_dict(), "homed": self.homed,
                "busy": self.busy, "fault_active": self.fault_active}


class WindProcess:
    """First-order filtered (OU) wind speed: relaxes toward `mean` with time
    constant `tau`, stationary standard deviation `std`."""

    def __init__(self, mean: float, std: float, tau: float,
                 rng: np.random.Generator):
        if std < 0.0 or tau <= 0.0:
            raise DomainError("wind std must be >= 0 and tau > 0")
        self.mean = mean
        self.std = std
        self.tau = tau
        self._rng = rng
        self.value = mean if std == 0.0 else float(rng.normal(mean, std))

    def step(self, dt: float) -> float:
        if self.std == 0.0:
            # exact relaxation keeps the zero-wind case bit-stable
            self.value += (self.mean - self.value) * (dt / self.tau)
            return self.value
        drift = (self.mean - self.value) * (dt / self.tau)
        diffusion = self.std * math.sqrt(2.0 * dt / self.tau)
        self.value += drift + diffusion * float(self._rng.standard_normal())
        return self.value


class VirtualCrane:
    """The simulated crane plus its controllers, homing, zeroing, magnet and
    fault injection, driven over the bus."""

    def __init__(
        self,
        bus_client,
        params: CraneParameters = CraneParameters(),
        sensors: SensorModel = SensorModel(),
        model_dt: float = 1e-3,
        settle_time: float = 2.0,
        time_scale: float = 0.0,
        wind_mean: float = 0.0,
        wind_std: float = 0.0,
        wind_tau: float = 2.0,
        seed: int = 0,
        initial_x: float = 0.25,
        initial_l: float = 0.5,
        home_speed_fraction: float = 0.25,
        zero_rate_threshold: float = 0.05,
    ):
        self.bus = bus_client
        self.params = params
        self.sensors = sensors
        self.model_dt = model_dt
        self.settle_time = settle_time
        self.time_scale = time_scale
        self.home_speed_fraction = home_speed_fraction
        self.zero_rate_threshold = zero_rate_threshold

        self._rng = np.random.default_rng(seed)
        self._wind = WindProcess(wind_mean, wind_std, wind_tau, self._rng)
        self._state = CraneState(t=0.0, x=initial_x, l=initial_l,
                                 wind=self._wind.value)
        self._plant_lock = threading.RLock()
        self._admission_lock = threading.Lock()
        self._busy = False
        self._homed = False
        self._fault = FaultSpec(active=False)
        self._zero_offset = 0.0
        self._stopping = threading.Event()
        self._runs: dict[str, RunHandle] = {}
        self._run_done: dict[str, threading.Event] = {}
        self._active_run: Optional[str] = None
        self._idle_thread: Optional[threading.Thread] = None
        if time_scale > 0.0:
            self._idle_thread = threading.Thread(target=self._idle_loop,
                                                 daemon=True)
            self._idle_thread.start()

    # -- public command surface ----------------------------------------------

    def status(self) -> StatusSnapshot:
        with self._plant_lock:
            measured = self._sensor_view(self._state)
        return StatusSnapshot(state=measured, homed=self._homed,
                              busy=self._busy,
                              fault_active=self._fault.active)

    def set_magnet(self, on: bool) -> None:
        with self._plant_lock:
            self._state = replace(self._state, magnet_on=bool(on))

    def inject_fault(self, spec: FaultSpec) -> None:
        if spec.damping_scale <= 0.0:
            raise DomainError("damping_scale must be > 0")
        self._fault = spec

    def clear_fault(self) -> None:
        self._fault = FaultSpec(active=False)

    def zero(self) -> None:
        with self._plant_lock:
            if abs(self._state.theta_dot) > self.zero_rate_threshold:
                raise StateError(
                    f"swing rate {self._state.theta_dot:.3f} rad/s too high "
                    "to zero the encoder")
            self._zero_offset = self._quantize(
                self._state.theta + self._total_encoder_bias())

    def home(self) -> None:
        """Drive the cart to x = 0 at reduced speed and establish the origin.
        The homing profile is swing-shaped so it leaves no oscillation behind.
        Blocks until done."""
        self._admit()
        try:
            with self._plant_lock:
                start_x = self._state.x
                l_now = self._state.l
            if start_x != 0.0:
                traj = plan_zv_shaped(
                    start_x, 0.0,
                    self.params.cart_v_max * self.home_speed_fraction,
                    self.params.cart_a_max * self.home_speed_fraction,
                    l_now, damping_ratio_for(l_now, self.params),
                    self.model_dt, params=self.params)
                self._run_profile(traj, run_id=None, settle=0.0)
            with self._plant_lock:
                self._state = replace(self._state, x=0.0, v=0.0)
            self._homed = True
        finally:
            self._release()

    def move_to(self, target_x: float, mode: str = "zv_shaped") -> RunHandle:
        if not math.isfinite(target_x) or not (
                0.0 <= target_x <= self.params.cart_travel_max):
            raise DomainError(
                f"target_x must lie in [0, {self.params.cart_travel_max}], "
                f"got {target_x}")
        if mode not in ("trapezoid", "zv_shaped"):
            raise DomainError(f"unknown mode {mode!r}")
        if not self._homed:
            raise StateError("crane is not homed; home() first")
        self._admit()
        try:
            with self._plant_lock:
                p0 = self._state.x
                l_now = self._state.l
            request = {"axis": "cart", "p0": p0, "p1": float(target_x),
                       "mode": mode, "dt": self.model_dt}
            if mode == "zv_shaped":
                request["l"] = l_now
                request["zeta"] = damping_ratio_for(l_now, self.params)
            traj = self._request_trajectory(request)
        except BaseException:
            self._release()
            raise
        return self._start_run(traj, mode)

    def hoist_to(self, target_l: float) -> RunHandle:
        if not math.isfinite(target_l) or not (
                self.params.rope_length_min <= target_l
                <= self.params.rope_length_max):
            raise DomainError(
                f"target_l must lie in [{self.params.rope_length_min}, "
                f"{self.params.rope_length_max}], got {target_l}")
        if not self._homed:
            raise StateError("crane is not homed; home() first")
        self._admit()
        try:
            with self._plant_lock:
                p0 = self._state.l
            traj = self._request_trajectory(
                {"axis": "hoist", "p0": p0, "p1": float(target_l),
                 "mode": "trapezoid", "dt": self.model_dt})
        except BaseException:
            self._release()
            raise
        return self._start_run(traj, "trapezoid")

    def run_handle(self, run_id: str) -> RunHandle:
        return self._runs[run_id]

    def wait_run(self, run_id: str, timeout: float = 60.0) -> RunHandle:
        event = self._run_done[run_id]
        if not event.wait(timeout):
            raise TimeoutError(f"run {run_id} did not finish in {timeout}s")
        return self._runs[run_id]

    def stop(self) -> None:
        self._stopping.set()

    # -- internals -------------------------------------------------------------

    def _admit(self) -> None:
        with self._admission_lock:
            if self._busy:
                raise BusyError("a run is already in progress")
            self._busy = True

    def _release(self) -> None:
        with self._admission_lock:
            self._busy = False

    def _total_encoder_bias(self) -> float:
        bias = self.sensors.encoder_bias
        if self._fault.active:
            bias += self._fault.encoder_bias_extra
        return bias

    def _quantize(self, angle: float) -> float:
        res = self.sensors.encoder_resolution
        if res == 0.0:
            return angle
        return round(angle / res) * res

    def _sensor_view(self, state: CraneState) -> CraneState:
        theta = self._quantize(
            state.theta + self._total_encoder_bias()) - self._zero_offset
        x, l = state.x, state.l
        if self.sensors.position_noise_std > 0.0:
            x += float(self._rng.normal(0.0, self.sensors.position_noise_std))
            l += float(self._rng.normal(0.0, self.sensors.position_noise_std))
        wind = state.wind
        if self.sensors.anemometer_noise_std > 0.0:
            wind += float(self._rng.normal(0.0,
                                           self.sensors.anemometer_noise_std))
        return replace(state, x=x, l=l, theta=theta, wind=wind)

    def _request_trajectory(self, request: dict, timeout: float = 30.0
                            ) -> Trajectory:
        request_id = uuid.uuid4().hex
        request = {"request_id": request_id, **request}
        sub = self.bus.subscribe("dt/trajectory/result")
        try:
            self.bus.publish("dt/trajectory/request", request)
            deadline = time.monotonic() + timeout
            while True:
                remaining = deadline - time.monotonic()
                if remaining <= 0:
                    raise StateError("trajectory service did not answer")
                try:
                    msg: BusMessage = sub.get(timeout=remaining)
                except queue.Empty:
                    raise StateError("trajectory service did not answer")
                if msg.payload.get("request_id") != request_id:
                    continue
                if "error" in msg.payload:
                    raise DomainError(msg.payload["error"])
                return Trajectory.from_dict(msg.payload["trajectory"])
        finally:
            sub.cancel()

    def _start_run(self, traj: Trajectory, mode: str) -> RunHandle:
        run_id = f"run-{uuid.uuid4().hex[:12]}"
        handle = RunHandle(run_id=run_id, trajectory_id=traj.id,
                           started_at=time.time(), status="running")
        self._runs[run_id] = handle
        self._run_done[run_id] = threading.Event()
        self._active_run = run_id
        worker = threading.Thread(target=self._execute_run,
                                  args=(handle, traj, mode), daemon=True)
        worker.start()
        return handle

    def _execute_run(self, handle: RunHandle, traj: Trajectory,
                     mode: str) -> None:
        run_id = handle.run_id
        status = "completed"
        try:
            with self._plant_lock:
                initial = self._state
            fault = self._fault if self._fault.active else None
            self.bus.publish("crane/run/started", {
                "run_id": run_id,
                "record": {
                    "run_id": run_id,
                    "trajectory_id": traj.id,
                    "mode": mode,
                    "started_at": handle.started_at,
                    "status": "running",
                    "fault_active": fault is not None,
                },
                "trajectory": traj.as_dict(),
                "initial": initial.as_dict(),
                "sample_dt": self.sensors.sample_period,
                "settle": self.settle_time,
            })
            settle = self.settle_time if traj.duration > 0.0 else 0.0
            aborted = not self._run_profile(traj, run_id=run_id, settle=settle,
                                            fault=fault)
            if aborted:
                status = "aborted"
        except BusConnectionError:
            status = "aborted"  # stack shut down mid-run
        except Exception:
            status = "aborted"
            raise
        finally:
            handle = replace(handle, status=status)
            self._runs[run_id] = handle
            self._active_run = None
            self._release()
            try:
                self.bus.publish("crane/run/completed", {
                    "run_id": run_id, "status": status,
                    "completed_at": time.time(),
                })
            except BusConnectionError:
                pass
            self._run_done[run_id].set()

    def _run_profile(self, traj: Trajectory, run_id: Optional[str],
                     settle: float, fault: Optional[FaultSpec] = None) -> bool:
        """Integrate the plant through a trajectory (and settle tail),
        publishing sensor samples every sample period. Returns False if
        aborted by stop()."""
        deriv = derivatives
        if fault is not None:
            offset = fault.rope_length_offset
            scale = fault.damping_scale

            def deriv(s, u, p):  # noqa: ANN001 - mirrors derivatives()
                return derivatives(
                    replace(s, l=s.l + offset),
                    u,
                    replace(p, swing_damping=p.swing_damping * scale),
                )

        stride = max(1, round(self.sensors.sample_period / self.model_dt))
        accels = interval_accelerations(traj)
        n_settle = round(settle / self.model_dt) if traj.duration > 0.0 else 0
        is_cart = traj.axis == "cart"

        wall_start = time.monotonic()
        with self._plant_lock:
            t0 = self._state.t
            self._publish_sample(self._state, run_id)
        step = 0
        for i in range(len(accels) + n_settle):
            if self._stopping.is_set():
                return False
            if i < len(accels):
                a = accels[i]
                inp = PlantInput(a_cart=a) if is_cart else PlantInput(a_hoist=a)
            else:
                inp = ZERO_INPUT
            with self._plant_lock:
                state = step_rk4(self._state, inp, self.model_dt, self.params,
                                 deriv)
                wind = self._wind.step(self.model_dt)
                state = replace(state, wind=wind)
                self._state = state
                step += 1
                if step % stride == 0:
                    self._publish_sample(state, run_id)
            if self.time_scale > 0.0 and step % stride == 0:
                target = wall_start + (state.t - t0) / self.time_scale
                delay = target - time.monotonic()
                if delay > 0:
                    time.sleep(delay)
        return True

    def _publish_sample(self, state: CraneState, run_id: Optional[str]) -> None:
        self.bus.publish("crane/state", {
            "run_id": run_id,
            "state": self._sensor_view(state).as_dict(),
        })

    def _idle_loop(self) -> None:
        """Publishes idle telemetry at the sample period when running with a
        wall-clock time base (time_scale > 0)."""
        stride = max(1, round(self.sensors.sample_period / self.model_dt))
        period = self.sensors.sample_period / self.time_scale
        while not self._stopping.wait(period):
            if self._busy:
                continue
            with self._plant_lock:
                if self._busy:
                    continue
                state = self._state
                for _ in range(stride):
                    state = step_rk4(state, ZERO_INPUT, self.model_dt,
                                     self.params)
                    state = replace(state, wind=self._wind.step(self.model_dt))
                self._state = state
                try:
                    self._publish_sample(state, None)
                except BusConnectionError:
                    return  # bus gone: the stack is shutting down
