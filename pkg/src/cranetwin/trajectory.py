"""Timed motion profiles for cart and hoist, including anti-swing shaping.

The planning functions are pure; TrajectoryService at the bottom exposes
them on the bus (dt/trajectory/request -> dt/trajectory/result).

Two profile families:

* trapezoid -- time-optimal rest-to-rest trapezoidal (or triangular when the
  cruise speed is unreachable) velocity profile.
* zv_shaped -- the trapezoid acceleration convolved with a two-impulse
  zero-vibration shaper designed at a given rope length and damping ratio, so
  the pendulum oscillation excited by the first impulse is cancelled by the
  second. The impulse amplitudes sum to one, hence the shaped profile is a
  convex combination of two time-shifted copies of the baseline and respects
  the original velocity/acceleration limits.

All planners are pure functions returning immutable Trajectory values.
"""

from __future__ import annotations

import math
import threading
import uuid
from dataclasses import dataclass, field

from .errors import DomainError
from .model import CraneParameters, natural_frequency

AXES = ("cart", "hoist")
MODES = ("trapezoid", "zv_shaped")

_TIME_EPS = 1e-12


@dataclass(frozen=True)
class Waypoint:
    t: float    # s
    pos: float  # m
    vel: float  # m/s
    acc: float  # m/s^2


@dataclass(frozen=True)
class Trajectory:
    """Uniformly sampled setpoint profile for one axis."""

    id: str
    axis: str
    mode: str
    dt: float
    waypoints: tuple[Waypoint, ...] = field(repr=False)
    design_rope_length: float | None = None
    damping_ratio: float | None = None

    def __post_init__(self) -> None:
        if self.axis not in AXES:
            raise DomainError(f"unknown axis {self.axis!r}")
        if self.mode not in MODES:
            raise DomainError(f"unknown mode {self.mode!r}")
        if self.dt <= 0.0:
            raise DomainError("trajectory dt must be > 0")
        if not self.waypoints:
            raise DomainError("trajectory must have at least one waypoint")
        for a, b in zip(self.waypoints, self.waypoints[1:]):
            if abs((b.t - a.t) - self.dt) > 1e-9:
                raise DomainError("waypoints must be uniformly spaced by dt")
        if self.waypoints[0].vel != 0.0 or self.waypoints[-1].vel != 0.0:
            raise DomainError("trajectory must start and end at rest")

    @property
    def duration(self) -> float:
        return self.waypoints[-1].t - self.waypoints[0].t

    @property
    def start_pos(self) -> float:
        return self.waypoints[0].pos

    @property
    def end_pos(self) -> float:
        return self.waypoints[-1].pos

    def as_dict(self) -> dict:
        return {
            "id": self.id,
            "axis": self.axis,
            "mode": self.mode,
            "dt": self.dt,
            "design_rope_length": self.design_rope_length,
            "damping_ratio": self.damping_ratio,
            "waypoints": [
                {"t": w.t, "pos": w.pos, "vel": w.vel, "acc": w.acc}
                for w in self.waypoints
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Trajectory":
        return cls(
            id=d["id"],
            axis=d["axis"],
            mode=d["mode"],
            dt=float(d["dt"]),
            design_rope_length=d.get("design_rope_length"),
            damping_ratio=d.get("damping_ratio"),
            waypoints=tuple(
                Waypoint(float(w["t"]), float(w["pos"]), float(w["vel"]),
                         float(w["acc"]))
                for w in d["waypoints"]
            ),
        )


def _new_id() -> str:
    return uuid.uuid4().hex[:12]


def _check_finite(**values: float) -> None:
    for name, value in values.items():
        if not math.isfinite(value):
            raise DomainError(f"{name} must be finite, got {value}")


@dataclass(frozen=True)
class _TrapezoidCore:
    """Analytic rest-to-rest trapezoid: signed displacement from the start."""

    sign: float
    distance: float  # absolute, m
    t_acc: float
    t_cruise: float
    a: float         # absolute acceleration, m/s^2
    v_peak: float    # absolute cruise speed, m/s

    @property
    def total_time(self) -> float:
        return 2.0 * self.t_acc + self.t_cruise

    def eval(self, t: float) -> tuple[float, float, float]:
        """(displacement, velocity, acceleration), signed, clamped outside."""
        if t <= 0.0:
            return 0.0, 0.0, 0.0
        if t >= self.total_time:
            return self.sign * self.distance, 0.0, 0.0
        if t < self.t_acc:
            return (self.sign * 0.5 * self.a * t * t,
                    self.sign * self.a * t,
                    self.sign * self.a)
        d_acc = 0.5 * self.a * self.t_acc ** 2
        if t < self.t_acc + self.t_cruise:
            tau = t - self.t_acc
            return (self.sign * (d_acc + self.v_peak * tau),
                    self.sign * self.v_peak, 0.0)
        tau = t - self.t_acc - self.t_cruise
        return (
            self.sign * (d_acc + self.v_peak * self.t_cruise
                         + self.v_peak * tau - 0.5 * self.a * tau * tau),
            self.sign * (self.v_peak - self.a * tau),
            -self.sign * self.a,
        )


def _trapezoid_core(p0: float, p1: float, v_max: float, a_max: float
                    ) -> _TrapezoidCore:
    distance = abs(p1 - p0)
    sign = 1.0 if p1 >= p0 else -1.0
    t_acc = v_max / a_max
    if a_max * t_acc ** 2 <= distance:  # cruise reachable (2*d_acc <= d)
        t_cruise = (distance - a_max * t_acc ** 2) / v_max
        v_peak = v_max
    else:
        t_acc = math.sqrt(distance / a_max)
        t_cruise = 0.0
        v_peak = a_max * t_acc
    return _TrapezoidCore(sign, distance, t_acc, t_cruise, a_max, v_peak)


def _sample(p0: float, total_time: float, dt: float, evaluate,
            end_pos: float) -> tuple[Waypoint, ...]:
    if total_time <= 0.0:
        return (Waypoint(0.0, p0, 0.0, 0.0),)
    n = max(1, math.ceil(total_time / dt - _TIME_EPS))
    points = []
    for k in range(n + 1):
        t = k * dt
        if t >= total_time - _TIME_EPS:
            points.append(Waypoint(t, end_pos, 0.0, 0.0))
        else:
            d, v, a = evaluate(t)
            points.append(Waypoint(t, p0 + d, v, a))
    return tuple(points)


def plan_trapezoid(p0: float, p1: float, v_max: float, a_max: float,
                   dt: float, axis: str = "cart") -> Trajectory:
    """Time-optimal trapezoidal rest-to-rest profile from p0 to p1."""
    _check_finite(p0=p0, p1=p1, v_max=v_max, a_max=a_max, dt=dt)
    if v_max <= 0.0 or a_max <= 0.0 or dt <= 0.0:
        raise DomainError("v_max, a_max and dt must be > 0")
    core = _trapezoid_core(p0, p1, v_max, a_max)
    waypoints = _sample(p0, core.total_time, dt, core.eval, end_pos=p1)
    return Trajectory(id=_new_id(), axis=axis, mode="trapezoid", dt=dt,
                      waypoints=waypoints)


def zv_impulses(l: float, zeta: float, params: CraneParameters
                ) -> tuple[tuple[float, float], float]:
    """Two-impulse zero-vibration shaper for a pendulum of length l.

    Returns ((A1, A2), delay) with A1 + A2 = 1; the second impulse lags the
    first by half the damped swing period.
    """
    if not math.isfinite(zeta) or not (0.0 <= zeta < 1.0):
        raise DomainError(f"damping ratio must satisfy 0 <= zeta < 1, got {zeta}")
    omega_n = natural_frequency(l, params)
    decay = math.sqrt(1.0 - zeta * zeta)
    k = math.exp(-zeta * math.pi / decay)
    a1 = 1.0 / (1.0 + k)
    a2 = 1.0 - a1  # = k/(1+k); keeps the unity sum exact in floating point
    delay = math.pi / (omega_n * decay)
    return (a1, a2), delay


def damping_ratio_for(l: float, params: CraneParameters) -> float:
    """Shaper design damping ratio derived from the plant's linear swing damping."""
    return params.swing_damping / (2.0 * natural_frequency(l, params))


def plan_zv_shaped(p0: float, p1: float, v_max: float, a_max: float,
                   l: float, zeta: float, dt: float,
                   axis: str = "cart",
                   params: CraneParameters | None = None) -> Trajectory:
    """Anti-swing profile: trapezoid convolved with the two ZV impulses.

    The shaped motion lasts the baseline duration plus the impulse delay and
    leaves no residual pendulum swing at the design rope length and damping.
    `params` supplies gravity for the shaper design (defaults suffice on Earth).
    """
    _check_finite(p0=p0, p1=p1, v_max=v_max, a_max=a_max, dt=dt)
    if v_max <= 0.0 or a_max <= 0.0 or dt <= 0.0:
        raise DomainError("v_max, a_max and dt must be > 0")
    (a1, a2), delay = zv_impulses(l, zeta, params or CraneParameters())

    if p0 == p1:
        waypoints = (Waypoint(0.0, p0, 0.0, 0.0),)
        return Trajectory(id=_new_id(), axis=axis, mode="zv_shaped", dt=dt,
                          waypoints=waypoints, design_rope_length=l,
                          damping_ratio=zeta)

    core = _trapezoid_core(p0, p1, v_max, a_max)
    total = core.total_time + delay

    def shaped(t: float) -> tuple[float, float, float]:
        d1, v1, acc1 = core.eval(t)
        d2, v2, acc2 = core.eval(t - delay)
        return (a1 * d1 + a2 * d2, a1 * v1 + a2 * v2, a1 * acc1 + a2 * acc2)

    waypoints = _sample(p0, total, dt, shaped, end_pos=p1)
    return Trajectory(id=_new_id(), axis=axis, mode="zv_shaped", dt=dt,
                      waypoints=waypoints, design_rope_length=l,
                      damping_ratio=zeta)


def resample(traj: Trajectory, dt_new: float) -> Trajectory:
    """Regrid a trajectory: linear interpolation of pos/vel, zero-order hold of acc."""
    if dt_new <= 0.0 or not math.isfinite(dt_new):
        raise DomainError("dt_new must be finite and > 0")
    if not traj.waypoints:
        raise DomainError("cannot resample an empty trajectory")
    points = traj.waypoints
    if len(points) == 1 or dt_new == traj.dt:
        return Trajectory(id=traj.id, axis=traj.axis, mode=traj.mode,
                          dt=dt_new if len(points) == 1 else traj.dt,
                          waypoints=points,
                          design_rope_length=traj.design_rope_length,
                          damping_ratio=traj.damping_ratio)

    t0 = points[0].t
    duration = traj.duration
    n = max(1, math.ceil(duration / dt_new - _TIME_EPS))
    last = points[-1]
    out = []
    for k in range(n + 1):
        t = k * dt_new
        if t >= duration - _TIME_EPS:
            out.append(Waypoint(t0 + t, last.pos, last.vel, last.acc))
            continue
        idx = min(int(math.floor(t / traj.dt + 1e-9)), len(points) - 2)
        a, b = points[idx], points[idx + 1]
        frac = (t0 + t - a.t) / (b.t - a.t)
        out.append(Waypoint(
            t0 + t,
            a.pos + frac * (b.pos - a.pos),
            a.vel + frac * (b.vel - a.vel),
            a.acc,
        ))
    return Trajectory(id=traj.id, axis=traj.axis, mode=traj.mode, dt=dt_new,
                      waypoints=tuple(out),
                      design_rope_length=traj.design_rope_length,
                      damping_ratio=traj.damping_ratio)


class TrajectoryService:
    """Bus worker planning trajectories on request.

    Request payload: {request_id, axis, p0, p1, mode, dt, l?, zeta?,
    v_max?, a_max?}; limits default to the axis limits of the nominal
    parameters, zeta to the plant-derived damping ratio. The result carries
    either {"trajectory": ...} or {"error": ...}.
    """

    def __init__(self, bus_client, params: CraneParameters):
        self.bus = bus_client
        self.params = params
        self._sub = None

    def start(self) -> "TrajectoryService":
        self._sub = self.bus.subscribe("dt/trajectory/request", self._on_request)
        return self

    def stop(self) -> None:
        if self._sub is not None:
            self._sub.cancel()

    def _on_request(self, msg) -> None:
        threading.Thread(target=self._plan, args=(msg.payload,),
                         daemon=True).start()

    def _plan(self, payload: dict) -> None:
        result: dict = {"request_id": payload.get("request_id")}
        try:
            axis = payload.get("axis", "cart")
            if axis == "cart":
                v_max = float(payload.get("v_max") or self.params.cart_v_max)
                a_max = float(payload.get("a_max") or self.params.cart_a_max)
            else:
                v_max = float(payload.get("v_max") or self.params.hoist_v_max)
                a_max = float(payload.get("a_max") or self.params.hoist_a_max)
            p0 = float(payload["p0"])
            p1 = float(payload["p1"])
            dt = float(payload.get("dt", 1e-3))
            mode = payload.get("mode", "trapezoid")
            if mode == "zv_shaped":
                l = float(payload["l"])
                zeta = payload.get("zeta")
                zeta = damping_ratio_for(l, self.params) if zeta is None \
                    else float(zeta)
                traj = plan_zv_shaped(p0, p1, v_max, a_max, l, zeta, dt,
                                      axis=axis, params=self.params)
            else:
                traj = plan_trapezoid(p0, p1, v_max, a_max, dt, axis=axis)
            result["trajectory"] = traj.as_dict()
        except (DomainError, KeyError, TypeError, ValueError) as exc:
            result["error"] = str(exc)
        self.bus.publish("dt/trajectory/result", result)
