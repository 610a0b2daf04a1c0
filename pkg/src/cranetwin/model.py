"""Crane plant model: parameters, state, continuous dynamics and fixed-step RK4.

The payload is a point mass on a massless rigid rope below a kinematic cart;
commanded cart/hoist accelerations are realized exactly. Swing angle theta is
measured from vertical, positive toward +x. Wind enters as an equivalent
horizontal payload acceleration k_w * w * |w|.

    theta_ddot = -(a_cart*cos(th) + g*sin(th) + 2*l_dot*theta_dot
                   + a_wind*cos(th)) / l  -  c_theta*theta_dot
    x_ddot = a_cart
    l_ddot = a_hoist

All functions here are pure and deterministic; safe under any concurrency.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .errors import DomainError, NumericalError, SingularityError

DEFAULT_DT = 1e-3  # s, fixed integration step


@dataclass(frozen=True)
class CraneParameters:
    """Nominal physical and limit constants of the plant."""

    rope_length_min: float = 0.1     # m
    rope_length_max: float = 0.8     # m
    cart_travel_max: float = 1.0     # m
    gravity: float = 9.81            # m/s^2
    swing_damping: float = 0.7       # 1/s, linear damping on theta_dot
    wind_gain: float = 0.05          # 1/m, wind speed -> payload acceleration
    cart_v_max: float = 0.3          # m/s
    cart_a_max: float = 1.0          # m/s^2
    hoist_v_max: float = 0.15        # m/s
    hoist_a_max: float = 0.5         # m/s^2

    def __post_init__(self) -> None:
        if not (0.0 < self.rope_length_min < self.rope_length_max):
            raise DomainError(
                "rope limits must satisfy 0 < rope_length_min < rope_length_max"
            )
        if self.cart_travel_max <= 0.0:
            raise DomainError("cart_travel_max must be > 0")
        if self.gravity <= 0.0:
            raise DomainError("gravity must be > 0")
        if self.swing_damping < 0.0:
            raise DomainError("swing_damping must be >= 0")
        for name in ("cart_v_max", "cart_a_max", "hoist_v_max", "hoist_a_max"):
            if getattr(self, name) <= 0.0:
                raise DomainError(f"{name} must be > 0")


@dataclass(frozen=True)
class CraneState:
    """Full timestamped plant state."""

    t: float = 0.0          # s
    x: float = 0.0          # m, cart position
    v: float = 0.0          # m/s, cart velocity
    l: float = 0.5          # m, rope length
    l_dot: float = 0.0      # m/s
    theta: float = 0.0      # rad, swing angle from vertical
    theta_dot: float = 0.0  # rad/s
    wind: float = 0.0       # m/s
    magnet_on: bool = False

    def as_dict(self) -> dict:
        return {
            "t": self.t, "x": self.x, "v": self.v, "l": self.l,
            "l_dot": self.l_dot, "theta": self.theta,
            "theta_dot": self.theta_dot, "wind": self.wind,
            "magnet_on": self.magnet_on,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CraneState":
        return cls(
            t=float(d["t"]), x=float(d["x"]), v=float(d["v"]), l=float(d["l"]),
            l_dot=float(d["l_dot"]), theta=float(d["theta"]),
            theta_dot=float(d["theta_dot"]), wind=float(d["wind"]),
            magnet_on=bool(d["magnet_on"]),
        )


@dataclass(frozen=True)
class PlantInput:
    """Commanded cart and hoist accelerations."""

    a_cart: float = 0.0   # m/s^2
    a_hoist: float = 0.0  # m/s^2


ZERO_INPUT = PlantInput(0.0, 0.0)


@dataclass(frozen=True)
class StateDerivative:
    """Time derivative of the dynamic state fields."""

    x_dot: float
    v_dot: float
    l_dot: float
    l_ddot: float
    theta_dot: float
    theta_ddot: float


_DYNAMIC_FIELDS = ("x", "v", "l", "l_dot", "theta", "theta_dot", "wind")


def derivatives(
    state: CraneState, inp: PlantInput, params: CraneParameters
) -> StateDerivative:
    """Continuous plant dynamics at a given state and commanded input.

    Raises:
        DomainError: any non-finite state or input field (named in message).
        SingularityError: rope length <= 0.
    """
    for name in _DYNAMIC_FIELDS:
        if not math.isfinite(getattr(state, name)):
            raise DomainError(f"state field {name} is not finite")
    if not math.isfinite(inp.a_cart):
        raise DomainError("input field a_cart is not finite")
    if not math.isfinite(inp.a_hoist):
        raise DomainError("input field a_hoist is not finite")
    if state.l <= 0.0:
        raise SingularityError(f"rope length must be > 0, got {state.l}")

    a_wind = params.wind_gain * state.wind * abs(state.wind)
    cos_th = math.cos(state.theta)
    sin_th = math.sin(state.theta)
    theta_ddot = (
        -(inp.a_cart * cos_th
          + params.gravity * sin_th
          + 2.0 * state.l_dot * state.theta_dot
          + a_wind * cos_th) / state.l
        - params.swing_damping * state.theta_dot
    )
    return StateDerivative(
        x_dot=state.v,
        v_dot=inp.a_cart,
        l_dot=state.l_dot,
        l_ddot=inp.a_hoist,
        theta_dot=state.theta_dot,
        theta_ddot=theta_ddot,
    )


def step_rk4(
    state: CraneState,
    inp: PlantInput,
    dt: float,
    params: CraneParameters,
    deriv=derivatives,
) -> CraneState:
    """Advance the state by dt with one classical 4th-order Runge-Kutta step.

    Rope length and cart position are hard-clamped to their limits after the
    step; the corresponding velocity is zeroed on clamp (end-stop emulation).
    The input is held constant over the step. `deriv` may be overridden to
    integrate modified dynamics (e.g. fault injection) with the same stepper.

    Raises:
        DomainError: dt < 0, or non-finite inputs (via `deriv`).
        NumericalError: a non-finite result field, named in the message.
    """
    if not math.isfinite(dt) or dt < 0.0:
        raise DomainError(f"dt must be finite and >= 0, got {dt}")
    if dt == 0.0:
        return state

    def f(y: tuple) -> tuple:
        s = replace(
            state, x=y[0], v=y[1], l=y[2], l_dot=y[3], theta=y[4], theta_dot=y[5]
        )
        d = deriv(s, inp, params)
        return (d.x_dot, d.v_dot, d.l_dot, d.l_ddot, d.theta_dot, d.theta_ddot)

    y0 = (state.x, state.v, state.l, state.l_dot, state.theta, state.theta_dot)
    k1 = f(y0)  # a DomainError here reflects genuinely bad caller input
    try:
        k2 = f(tuple(y + 0.5 * dt * k for y, k in zip(y0, k1)))
        k3 = f(tuple(y + 0.5 * dt * k for y, k in zip(y0, k2)))
        k4 = f(tuple(y + dt * k for y, k in zip(y0, k3)))
    except DomainError as exc:
        raise NumericalError(
            f"integration produced a non-finite intermediate stage: {exc}"
        ) from exc
    y1 = tuple(
        y + dt / 6.0 * (a + 2.0 * b + 2.0 * c + d)
        for y, a, b, c, d in zip(y0, k1, k2, k3, k4)
    )

    x, v, l, l_dot, theta, theta_dot = y1
    if l < params.rope_length_min:
        l, l_dot = params.rope_length_min, 0.0
    elif l > params.rope_length_max:
        l, l_dot = params.rope_length_max, 0.0
    if x < 0.0:
        x, v = 0.0, 0.0
    elif x > params.cart_travel_max:
        x, v = params.cart_travel_max, 0.0

    out = replace(
        state, t=state.t + dt, x=x, v=v, l=l, l_dot=l_dot,
        theta=theta, theta_dot=theta_dot,
    )
    for name in ("x", "v", "l", "l_dot", "theta", "theta_dot"):
        if not math.isfinite(getattr(out, name)):
            raise NumericalError(f"integration produced non-finite {name}")
    return out


def natural_frequency(l: float, params: CraneParameters) -> float:
    """Pendulum natural frequency sqrt(g/l) in rad/s."""
    if not math.isfinite(l) or l <= 0.0:
        raise DomainError(f"rope length must be finite and > 0, got {l}")
    return math.sqrt(params.gravity / l)


def swing_energy(state: CraneState, params: CraneParameters) -> float:
    """Specific swing energy 0.5*(l*theta_dot)^2 + g*l*(1 - cos(theta))."""
    return (
        0.5 * (state.l * state.theta_dot) ** 2
        + params.gravity * state.l * (1.0 - math.cos(state.theta))
    )
