"""Nominal plant simulation of trajectories and ensemble confidence envelopes.

The executor drives the plant with the trajectory's mean interval
acceleration (v[k+1] - v[k]) / dt, which reproduces the planned velocities
exactly at the grid points. The virtual crane uses the same rule, so with
noise and faults off a measured run and its simulation agree bit-for-bit.

Envelopes are per-sample, per-signal min/max over an ensemble of simulations
with parameters perturbed uniformly within +/- p of nominal. The nominal
member is always ensemble member 0, so the nominal trace is contained in the
band by construction. The random perturbation directions are drawn once from
the seed and scaled by p, which makes envelope width deterministic and
monotone in p.
"""

from __future__ import annotations

import threading
import time
import uuid
from dataclasses import dataclass, replace

import numpy as np

from .bus import BusMessage
from .errors import BusConnectionError, DomainError, NotFoundError
from .historian import Historian
from .model import CraneParameters, CraneState, PlantInput, ZERO_INPUT, derivatives, step_rk4
from .traces import Trace
from .trajectory import Trajectory

ENVELOPE_PARAMETERS = ("l", "c_theta", "k_w")


@dataclass(frozen=True)
class EnvelopeConfig:
    ensemble_size: int = 8
    perturbation: float = 0.05
    perturbed_parameters: tuple[str, ...] = ENVELOPE_PARAMETERS
    seed: int = 1234

    def __post_init__(self) -> None:
        if self.ensemble_size < 1:
            raise DomainError("ensemble_size must be >= 1")
        if not (0.0 <= self.perturbation < 1.0):
            raise DomainError("perturbation must be in [0, 1)")
        unknown = set(self.perturbed_parameters) - set(ENVELOPE_PARAMETERS)
        if unknown:
            raise DomainError(f"unknown perturbed parameters: {sorted(unknown)}")

    def as_dict(self) -> dict:
        return {
            "ensemble_size": self.ensemble_size,
            "perturbation": self.perturbation,
            "perturbed_parameters": list(self.perturbed_parameters),
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EnvelopeConfig":
        return cls(
            ensemble_size=int(d.get("ensemble_size", 8)),
            perturbation=float(d.get("perturbation", 0.05)),
            perturbed_parameters=tuple(d.get("perturbed_parameters",
                                             ENVELOPE_PARAMETERS)),
            seed=int(d.get("seed", 1234)),
        )


def interval_accelerations(traj: Trajectory) -> list[float]:
    """Mean acceleration per waypoint interval; exact for the planned velocities."""
    wp = traj.waypoints
    return [(b.vel - a.vel) / traj.dt for a, b in zip(wp, wp[1:])]


def simulate(
    traj: Trajectory,
    params: CraneParameters,
    initial: CraneState,
    dt: float | None = None,
    settle: float = 0.0,
    run_id: str | None = None,
    deriv=derivatives,
) -> Trace:
    """Deterministically execute a trajectory through the plant.

    Integration runs at traj.dt; the returned trace is sampled every `dt`
    (a multiple of traj.dt, default traj.dt) starting at the initial state.
    `settle` appends a zero-input tail of that duration after the profile.
    """
    dt = traj.dt if dt is None else dt
    if dt <= 0.0:
        raise DomainError("sample dt must be > 0")
    stride = max(1, round(dt / traj.dt))
    if abs(stride * traj.dt - dt) > 1e-9:
        raise DomainError(
            f"sample dt {dt} must be an integer multiple of trajectory dt {traj.dt}")

    start_pos = traj.waypoints[0].pos
    actual = initial.x if traj.axis == "cart" else initial.l
    if abs(actual - start_pos) > 1e-6:
        raise DomainError(
            f"initial {traj.axis} position {actual} does not match "
            f"trajectory start {start_pos}")

    accels = interval_accelerations(traj)
    n_settle = round(settle / traj.dt) if traj.duration > 0.0 else 0

    state = initial
    samples = [state]
    step = 0
    for a in accels:
        inp = PlantInput(a_cart=a) if traj.axis == "cart" else PlantInput(a_hoist=a)
        state = step_rk4(state, inp, traj.dt, params, deriv)
        step += 1
        if step % stride == 0:
            samples.append(state)
    for _ in range(n_settle):
        state = step_rk4(state, ZERO_INPUT, traj.dt, params, deriv)
        step += 1
        if step % stride == 0:
            samples.append(state)

    return Trace(run_id=run_id or f"sim-{uuid.uuid4().hex[:12]}",
                 kind="simulated", dt=stride * traj.dt, samples=tuple(samples))


_ENVELOPE_FIELDS = ("x", "v", "l", "l_dot", "theta", "theta_dot", "wind")


def confidence_envelope(
    traj: Trajectory,
    params: CraneParameters,
    cfg: EnvelopeConfig,
    initial: CraneState,
    dt: float | None = None,
    settle: float = 0.0,
    run_id: str | None = None,
) -> tuple[Trace, Trace]:
    """(lower, upper) per-sample min/max band over the perturbed ensemble."""
    rng = np.random.default_rng(cfg.seed)
    # Direction draws are independent of p: u ~ U(-1, 1) per member/parameter.
    directions = rng.uniform(-1.0, 1.0,
                             size=(cfg.ensemble_size, len(ENVELOPE_PARAMETERS)))
    directions[0, :] = 0.0  # member 0 is the nominal configuration

    traces = []
    for member in range(cfg.ensemble_size):
        factors = {
            name: 1.0 + cfg.perturbation * directions[member, i]
            if name in cfg.perturbed_parameters else 1.0
            for i, name in enumerate(ENVELOPE_PARAMETERS)
        }
        member_params = replace(
            params,
            swing_damping=params.swing_damping * factors["c_theta"],
            wind_gain=params.wind_gain * factors["k_w"],
        )
        if traj.axis == "hoist":
            # rope length is the driven axis here, not a free parameter
            member_initial = initial
        else:
            member_l = min(max(initial.l * factors["l"],
                               params.rope_length_min),
                           params.rope_length_max)
            member_initial = replace(initial, l=member_l)
        traces.append(simulate(traj, member_params, member_initial,
                               dt=dt, settle=settle))

    length = len(traces[0].samples)
    assert all(len(tr.samples) == length for tr in traces)

    lower_samples, upper_samples = [], []
    for i in range(length):
        states = [tr.samples[i] for tr in traces]
        lo_kw = {f: min(getattr(s, f) for s in states) for f in _ENVELOPE_FIELDS}
        hi_kw = {f: max(getattr(s, f) for s in states) for f in _ENVELOPE_FIELDS}
        t_i = traces[0].samples[i].t
        magnet = traces[0].samples[i].magnet_on
        lower_samples.append(CraneState(t=t_i, magnet_on=magnet, **lo_kw))
        upper_samples.append(CraneState(t=t_i, magnet_on=magnet, **hi_kw))

    rid = run_id or traces[0].run_id
    grid_dt = traces[0].dt
    return (
        Trace(run_id=rid, kind="envelope_lower", dt=grid_dt,
              samples=tuple(lower_samples)),
        Trace(run_id=rid, kind="envelope_upper", dt=grid_dt,
              samples=tuple(upper_samples)),
    )


class SimulationService:
    """Bus-driven worker: simulates every started run (so the validator
    always has a reference) and serves ad-hoc simulation requests."""

    def __init__(self, bus_client, historian: Historian,
                 params: CraneParameters, envelope: EnvelopeConfig):
        self.bus = bus_client
        self.historian = historian
        self.params = params
        self.envelope = envelope
        self._subs = []

    def start(self) -> "SimulationService":
        self._subs.append(
            self.bus.subscribe("crane/run/started", self._on_run_started))
        self._subs.append(
            self.bus.subscribe("dt/simulation/request", self._on_request))
        return self

    def stop(self) -> None:
        for sub in self._subs:
            sub.cancel()

    def _on_run_started(self, msg: BusMessage) -> None:
        threading.Thread(target=self._worker,
                         args=(self._simulate_run, msg.payload),
                         daemon=True).start()

    def _on_request(self, msg: BusMessage) -> None:
        threading.Thread(target=self._worker,
                         args=(self._serve_request, msg.payload),
                         daemon=True).start()

    @staticmethod
    def _worker(fn, payload: dict) -> None:
        try:
            fn(payload)
        except BusConnectionError:
            pass  # stack is shutting down

    def _simulate_run(self, payload: dict) -> None:
        run_id = payload["record"]["run_id"]
        traj = Trajectory.from_dict(payload["trajectory"])
        initial = CraneState.from_dict(payload["initial"])
        dt = float(payload["sample_dt"])
        settle = float(payload.get("settle", 0.0))

        nominal = simulate(traj, self.params, initial, dt=dt, settle=settle,
                           run_id=run_id)
        lower, upper = confidence_envelope(
            traj, self.params, self.envelope, initial, dt=dt, settle=settle,
            run_id=run_id)

        # The logging app creates the run directory on the same started
        # event; wait briefly if it has not got there yet.
        deadline = time.monotonic() + 5.0
        while True:
            try:
                self.historian.store_trace(run_id, nominal)
                self.historian.store_trace(run_id, lower)
                self.historian.store_trace(run_id, upper)
                break
            except NotFoundError:
                if time.monotonic() >= deadline:
                    raise
                time.sleep(0.02)
        self.bus.publish("dt/simulation/result", {
            "run_id": run_id,
            "kinds": ["simulated", "envelope_lower", "envelope_upper"],
        })

    def _serve_request(self, payload: dict) -> None:
        traj = Trajectory.from_dict(payload["trajectory"])
        initial = CraneState.from_dict(payload["initial"])
        trace = simulate(traj, self.params, initial,
                         dt=payload.get("sample_dt"),
                         settle=float(payload.get("settle", 0.0)))
        self.bus.publish("dt/simulation/result", {
            "request_id": payload.get("request_id"),
            "trace": trace.as_dict(),
        })
