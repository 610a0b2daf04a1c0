import math

import pytest

from cranetwin.errors import DomainError, SingularityError
from cranetwin.model import (
    CraneParameters,
    CraneState,
    PlantInput,
    ZERO_INPUT,
    derivatives,
    natural_frequency,
    step_rk4,
)


def undamped_params(**kw):
    return CraneParameters(swing_damping=0.0, **kw)


def free_swing(theta0, l, params, dt, duration):
    """Integrate a zero-input free swing and return the list of states."""
    s = CraneState(l=l, theta=theta0)
    out = [s]
    for _ in range(round(duration / dt)):
        s = step_rk4(s, ZERO_INPUT, dt, params)
        out.append(s)
    return out


class TestDerivatives:
    def test_equilibrium_fixed_point_is_exactly_zero(self):
        d = derivatives(CraneState(l=0.5), ZERO_INPUT, CraneParameters())
        assert (d.x_dot, d.v_dot, d.l_dot, d.l_ddot, d.theta_dot, d.theta_ddot) \
            == (0.0, 0.0, 0.0, 0.0, 0.0, 0.0)

    def test_cart_acceleration_at_vertical(self):
        # theta = 0, l = 1: theta_ddot = -a_cart / l = -1.0
        d = derivatives(
            CraneState(l=1.0), PlantInput(a_cart=1.0), undamped_params()
        )
        assert d.theta_ddot == pytest.approx(-1.0, abs=1e-12)
        assert d.v_dot == 1.0

    def test_mirror_symmetry(self):
        params = CraneParameters(swing_damping=0.17, wind_gain=0.4)
        s = CraneState(x=0.3, v=0.1, l=0.45, l_dot=0.02, theta=0.2,
                       theta_dot=-0.4, wind=1.3)
        inp = PlantInput(a_cart=0.7, a_hoist=0.1)
        mirrored = CraneState(x=0.3, v=0.1, l=0.45, l_dot=0.02, theta=-0.2,
                              theta_dot=0.4, wind=-1.3)
        d1 = derivatives(s, inp, params)
        d2 = derivatives(mirrored, PlantInput(a_cart=-0.7, a_hoist=0.1), params)
        assert d2.theta_dot == pytest.approx(-d1.theta_dot, abs=1e-15)
        assert d2.theta_ddot == pytest.approx(-d1.theta_ddot, rel=1e-13)
        assert d2.l_dot == d1.l_dot
        assert d2.l_ddot == d1.l_ddot

    def test_nonfinite_field_named(self):
        with pytest.raises(DomainError, match="theta_dot"):
            derivatives(CraneState(theta_dot=float("nan")), ZERO_INPUT,
                        CraneParameters())
        with pytest.raises(DomainError, match="a_cart"):
            derivatives(CraneState(), PlantInput(a_cart=float("inf")),
                        CraneParameters())

    def test_zero_rope_length_is_singular(self):
        with pytest.raises(SingularityError):
            derivatives(CraneState(l=0.0), ZERO_INPUT, CraneParameters())


class TestStepRK4:
    def test_zero_dt_is_identity(self):
        s = CraneState(x=0.2, v=0.1, l=0.4, theta=0.05)
        assert step_rk4(s, ZERO_INPUT, 0.0, CraneParameters()) == s

    def test_negative_dt_rejected(self):
        with pytest.raises(DomainError):
            step_rk4(CraneState(), ZERO_INPUT, -1e-3, CraneParameters())

    def test_small_angle_period_matches_analytic(self):
        # Oracle: small-angle pendulum period 2*pi*sqrt(l/g).
        l = 0.5
        params = undamped_params()
        analytic = 2.0 * math.pi * math.sqrt(l / params.gravity)
        assert analytic == pytest.approx(1.4185, abs=1e-4)

        states = free_swing(0.05, l, params, dt=1e-3, duration=3.5)
        # Full period = spacing of successive downward zero crossings.
        crossings = []
        for a, b in zip(states, states[1:]):
            if a.theta > 0.0 >= b.theta:
                frac = a.theta / (a.theta - b.theta)
                crossings.append(a.t + frac * (b.t - a.t))
        assert len(crossings) >= 2
        period = crossings[1] - crossings[0]
        assert period == pytest.approx(analytic, rel=0.01)

    def test_energy_non_increasing_with_damping(self):
        # Oracle: direct evaluation of E = 0.5*(l*theta_dot)^2 + g*l*(1-cos th)
        params = CraneParameters(swing_damping=0.2)
        states = free_swing(0.3, 0.5, params, dt=1e-3, duration=3.0)
        energies = [
            0.5 * (s.l * s.theta_dot) ** 2
            + params.gravity * s.l * (1.0 - math.cos(s.theta))
            for s in states
        ]
        for e_prev, e_next in zip(energies, energies[1:]):
            assert e_next <= e_prev + 1e-9
        assert energies[-1] < energies[0]

    def test_observed_convergence_order(self):
        # Richardson-style check against a dt=1e-5 reference over a 2 s swing.
        params = undamped_params()

        def final_theta(dt):
            return free_swing(0.3, 0.5, params, dt, 2.0)[-1].theta

        ref = final_theta(1e-5)
        err_coarse = abs(final_theta(1e-3) - ref)
        err_fine = abs(final_theta(5e-4) - ref)
        assert err_fine > 0.0
        order = math.log2(err_coarse / err_fine)
        assert order >= 3.8

    def test_determinism_bit_identical(self):
        params = CraneParameters()
        inp = PlantInput(a_cart=0.3, a_hoist=-0.05)
        s1 = s2 = CraneState(x=0.1, l=0.5, theta=0.02, wind=0.7)
        for _ in range(500):
            s1 = step_rk4(s1, inp, 1e-3, params)
            s2 = step_rk4(s2, inp, 1e-3, params)
        assert s1 == s2

    def test_limits_clamp_and_zero_velocity(self):
        params = CraneParameters()
        s = CraneState(x=params.cart_travel_max - 1e-6, v=0.2, l=0.5)
        s = step_rk4(s, PlantInput(a_cart=1.0), 1e-2, params)
        assert s.x == params.cart_travel_max
        assert s.v == 0.0

        s = CraneState(l=params.rope_length_min + 1e-6, l_dot=-0.1)
        s = step_rk4(s, PlantInput(a_hoist=-0.5), 1e-2, params)
        assert s.l == params.rope_length_min
        assert s.l_dot == 0.0

    def test_time_advances(self):
        s = step_rk4(CraneState(t=1.5, l=0.5), ZERO_INPUT, 1e-3,
                     CraneParameters())
        assert s.t == pytest.approx(1.501)

    def test_nonfinite_result_names_field(self):
        from cranetwin.errors import NumericalError
        # finite inputs whose derivatives overflow to inf
        s = CraneState(l=0.5, l_dot=1e308, theta_dot=1e308)
        with pytest.raises(NumericalError, match="theta"):
            step_rk4(s, ZERO_INPUT, 1e-3, CraneParameters())


class TestNaturalFrequency:
    def test_unit_frequency_at_l_equals_g(self):
        params = CraneParameters(rope_length_max=10.0)
        assert natural_frequency(9.81, params) == pytest.approx(1.0, abs=1e-12)

    def test_half_meter_rope(self):
        # sqrt(9.81 / 0.5) evaluated by hand
        assert natural_frequency(0.5, CraneParameters()) == \
            pytest.approx(4.4294, abs=1e-4)

    def test_monotone_decreasing_in_length(self):
        params = CraneParameters()
        lengths = [0.1, 0.2, 0.35, 0.5, 0.8, 1.5]
        freqs = [natural_frequency(l, params) for l in lengths]
        assert all(a > b for a, b in zip(freqs, freqs[1:]))

    def test_invalid_length(self):
        for bad in (0.0, -0.5, float("nan")):
            with pytest.raises(DomainError):
                natural_frequency(bad, CraneParameters())


class TestParameterInvariants:
    def test_rope_limit_order(self):
        with pytest.raises(DomainError):
            CraneParameters(rope_length_min=0.8, rope_length_max=0.5)

    def test_negative_damping_rejected(self):
        with pytest.raises(DomainError):
            CraneParameters(swing_damping=-0.1)

    def test_rate_limits_positive(self):
        with pytest.raises(DomainError):
            CraneParameters(cart_v_max=0.0)
