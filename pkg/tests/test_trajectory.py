import math

import numpy as np
import pytest

from cranetwin.errors import DomainError
from cranetwin.model import CraneParameters, CraneState, PlantInput, ZERO_INPUT, step_rk4
from cranetwin.trajectory import (
    Trajectory,
    Waypoint,
    damping_ratio_for,
    plan_trapezoid,
    plan_zv_shaped,
    resample,
    zv_impulses,
)


def residual_swing(traj, l, params, settle=3.0):
    """Oracle: drive the plant with the profile, return max |theta| after it ends.

    The cart acceleration over each interval is the exact mean acceleration
    (v[k+1]-v[k])/dt, so the plant reproduces the planned velocities at the
    grid points.
    """
    state = CraneState(x=traj.start_pos, l=l)
    wp = traj.waypoints
    for k in range(len(wp) - 1):
        a = (wp[k + 1].vel - wp[k].vel) / traj.dt
        state = step_rk4(state, PlantInput(a_cart=a), traj.dt, params)
    peak = 0.0
    for _ in range(round(settle / traj.dt)):
        state = step_rk4(state, ZERO_INPUT, traj.dt, params)
        peak = max(peak, abs(state.theta))
    return peak, state


class TestPlanTrapezoid:
    def test_null_move(self):
        traj = plan_trapezoid(0.3, 0.3, 0.5, 1.0, 1e-3)
        assert len(traj.waypoints) == 1
        assert traj.duration == 0.0
        assert traj.waypoints[0] == Waypoint(0.0, 0.3, 0.0, 0.0)

    def test_unit_move_phase_times(self):
        # v_max=0.5, a_max=1: t_acc = 0.5 s covering 0.125 m each end,
        # cruise 0.75 m at 0.5 m/s = 1.5 s, total 2.5 s.
        traj = plan_trapezoid(0.0, 1.0, 0.5, 1.0, 1e-3)
        assert traj.duration == pytest.approx(2.5, abs=1e-9)
        accs = np.array([w.acc for w in traj.waypoints])
        times = np.array([w.t for w in traj.waypoints])
        # first waypoint is at rest (acc = 0); accel phase covers (0, 0.5)
        assert np.all(accs[(times > 1e-9) & (times < 0.5 - 1e-9)] == 1.0)
        assert np.all(accs[(times > 0.5 + 1e-9) & (times < 2.0 - 1e-9)] == 0.0)
        assert np.all(accs[(times > 2.0 + 1e-9) & (times < 2.5 - 1e-9)] == -1.0)
        assert traj.end_pos == 1.0
        vels = np.array([w.vel for w in traj.waypoints])
        assert vels.max() == pytest.approx(0.5, abs=1e-12)

    def test_reverse_move_is_mirror(self):
        fwd = plan_trapezoid(0.0, 0.8, 0.3, 1.0, 1e-3)
        rev = plan_trapezoid(0.8, 0.0, 0.3, 1.0, 1e-3)
        assert rev.duration == pytest.approx(fwd.duration)
        pos = [w.pos for w in rev.waypoints]
        assert all(a >= b - 1e-12 for a, b in zip(pos, pos[1:]))
        for wf, wr in zip(fwd.waypoints, rev.waypoints):
            assert wr.pos == pytest.approx(0.8 - wf.pos, abs=1e-12)

    def test_triangular_when_cruise_unreachable(self):
        # d = 0.1 < v^2/a = 0.25: peak speed sqrt(d*a) < v_max
        traj = plan_trapezoid(0.0, 0.1, 0.5, 1.0, 1e-4)
        assert traj.duration == pytest.approx(2 * math.sqrt(0.1), abs=1e-4)
        vels = [w.vel for w in traj.waypoints]
        assert max(vels) == pytest.approx(math.sqrt(0.1), abs=1e-3)
        assert traj.end_pos == 0.1

    def test_final_position_exact(self):
        rng = np.random.default_rng(7)
        for _ in range(20):
            p0, p1 = rng.uniform(0, 1, size=2)
            traj = plan_trapezoid(p0, p1, 0.3, 1.0, 1e-3)
            assert abs(traj.end_pos - p1) < 1e-6

    def test_rejects_bad_limits(self):
        with pytest.raises(DomainError):
            plan_trapezoid(0, 1, 0.0, 1.0, 1e-3)
        with pytest.raises(DomainError):
            plan_trapezoid(0, float("nan"), 0.5, 1.0, 1e-3)


class TestZvImpulses:
    def test_undamped_split_and_delay(self):
        (a1, a2), delay = zv_impulses(0.5, 0.0, CraneParameters())
        assert a1 == pytest.approx(0.5, abs=1e-15)
        assert a2 == pytest.approx(0.5, abs=1e-15)
        assert delay == pytest.approx(math.pi * math.sqrt(0.5 / 9.81), rel=1e-12)
        # pi / 4.4294 evaluated by hand
        assert delay == pytest.approx(0.7092, abs=1e-4)

    def test_amplitudes_sum_to_one(self):
        params = CraneParameters()
        for zeta in (0.0, 0.05, 0.3, 0.7, 0.99):
            (a1, a2), _ = zv_impulses(0.4, zeta, params)
            assert a1 + a2 == 1.0
            assert a1 >= a2 > 0.0

    def test_invalid_damping(self):
        params = CraneParameters()
        for zeta in (1.0, 1.5, -0.01, float("nan")):
            with pytest.raises(DomainError):
                zv_impulses(0.5, zeta, params)


class TestPlanZvShaped:
    def test_null_move(self):
        traj = plan_zv_shaped(0.2, 0.2, 0.3, 1.0, 0.5, 0.0, 1e-3)
        assert traj.duration == 0.0
        assert traj.mode == "zv_shaped"
        assert traj.design_rope_length == 0.5

    def test_duration_is_baseline_plus_delay(self):
        base = plan_trapezoid(0.0, 0.5, 0.3, 1.0, 1e-3)
        shaped = plan_zv_shaped(0.0, 0.5, 0.3, 1.0, 0.5, 0.0, 1e-3)
        _, delay = zv_impulses(0.5, 0.0, CraneParameters())
        assert shaped.duration == pytest.approx(base.duration + delay, abs=2e-3)

    @pytest.mark.parametrize("target", [0.5, 1.0])  # up to full cart travel
    def test_residual_swing_cancelled(self, target):
        params = CraneParameters(swing_damping=0.0)
        shaped = plan_zv_shaped(0.0, target, 0.3, 1.0, 0.5, 0.0, 1e-3)
        residual, final = residual_swing(shaped, 0.5, params)
        assert residual < 1e-3
        assert abs(final.x - target) < 1e-4

    def test_unshaped_trapezoid_swings_at_least_10x_more(self):
        params = CraneParameters(swing_damping=0.0)
        shaped = plan_zv_shaped(0.0, 0.5, 0.3, 1.0, 0.5, 0.0, 1e-3)
        plain = plan_trapezoid(0.0, 0.5, 0.3, 1.0, 1e-3)
        res_shaped, _ = residual_swing(shaped, 0.5, params)
        res_plain, _ = residual_swing(plain, 0.5, params)
        assert res_plain >= 10.0 * res_shaped

    def test_cancellation_with_damping(self):
        # Shaper designed at the plant's damping ratio still cancels.
        params = CraneParameters(swing_damping=0.3)
        zeta = damping_ratio_for(0.5, params)
        shaped = plan_zv_shaped(0.0, 0.5, 0.3, 1.0, 0.5, zeta, 1e-3)
        residual, _ = residual_swing(shaped, 0.5, params)
        assert residual < 1e-3

    def test_limits_respected(self):
        rng = np.random.default_rng(11)
        for _ in range(10):
            p1 = rng.uniform(0.05, 1.0)
            l = rng.uniform(0.2, 0.8)
            traj = plan_zv_shaped(0.0, p1, 0.3, 1.0, l, 0.0, 1e-3)
            assert max(abs(w.vel) for w in traj.waypoints) <= 0.3 + 1e-9
            assert max(abs(w.acc) for w in traj.waypoints) <= 1.0 + 1e-9

    def test_rest_to_rest(self):
        traj = plan_zv_shaped(0.1, 0.6, 0.3, 1.0, 0.5, 0.1, 1e-3)
        assert traj.waypoints[0].vel == 0.0
        assert traj.waypoints[-1].vel == 0.0
        assert traj.waypoints[0].acc == 0.0
        assert traj.waypoints[-1].acc == 0.0


class TestKinematicConsistency:
    @pytest.mark.parametrize("make", [
        lambda: plan_trapezoid(0.0, 0.7, 0.3, 1.0, 1e-3),
        lambda: plan_zv_shaped(0.0, 0.7, 0.3, 1.0, 0.5, 0.0, 1e-3),
    ])
    def test_derivative_chain(self, make):
        traj = make()
        t = np.array([w.t for w in traj.waypoints])
        pos = np.array([w.pos for w in traj.waypoints])
        vel = np.array([w.vel for w in traj.waypoints])
        acc = np.array([w.acc for w in traj.waypoints])
        dt = traj.dt

        # Exclude samples within one dt of an acceleration corner.
        corner = np.zeros(len(t), dtype=bool)
        switches = np.nonzero(np.diff(acc) != 0.0)[0]
        for idx in switches:
            corner[max(0, idx - 1):idx + 3] = True

        dpos = (pos[2:] - pos[:-2]) / (2 * dt)
        ok = ~corner[1:-1]
        assert np.max(np.abs(dpos[ok] - vel[1:-1][ok])) < 1e-3 * 0.3

        dvel = (vel[2:] - vel[:-2]) / (2 * dt)
        assert np.max(np.abs(dvel[ok] - acc[1:-1][ok])) < 1e-2 * 1.0


class TestResample:
    def test_identity(self):
        traj = plan_trapezoid(0.0, 0.5, 0.3, 1.0, 1e-3)
        again = resample(traj, 1e-3)
        assert again.waypoints == traj.waypoints

    def test_endpoints_preserved(self):
        traj = plan_zv_shaped(0.0, 0.5, 0.3, 1.0, 0.5, 0.0, 1e-3)
        for dt_new in (3.3e-3, 7e-4, 0.011):
            out = resample(traj, dt_new)
            assert out.waypoints[0].pos == traj.waypoints[0].pos
            assert out.waypoints[-1].pos == traj.waypoints[-1].pos
            assert out.waypoints[-1].vel == 0.0

    def test_halving_doubles_count(self):
        traj = plan_trapezoid(0.0, 0.5, 0.3, 1.0, 2e-3)
        out = resample(traj, 1e-3)
        assert abs(len(out.waypoints) - 2 * len(traj.waypoints)) <= 1

    def test_linear_interp_midpoint(self):
        traj = plan_trapezoid(0.0, 0.5, 0.3, 1.0, 2e-3)
        out = resample(traj, 1e-3)
        # odd samples sit halfway between original neighbours
        mid_pos = 0.5 * (traj.waypoints[3].pos + traj.waypoints[4].pos)
        assert out.waypoints[7].pos == pytest.approx(mid_pos, abs=1e-12)

    def test_bad_dt(self):
        traj = plan_trapezoid(0.0, 0.5, 0.3, 1.0, 1e-3)
        with pytest.raises(DomainError):
            resample(traj, 0.0)


class TestTrajectorySerialization:
    def test_roundtrip(self):
        traj = plan_zv_shaped(0.0, 0.4, 0.3, 1.0, 0.5, 0.05, 1e-3)
        again = Trajectory.from_dict(traj.as_dict())
        assert again == traj
