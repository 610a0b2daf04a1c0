"""Free-swing behavior of the crane payload: period, damping, integrator order.

Run:  python demos/01_swing_dynamics.py
Writes demos/output/swing_dynamics.png
"""

import math
from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from cranetwin import CraneParameters, CraneState, step_rk4, swing_energy
from cranetwin.model import ZERO_INPUT

OUT = Path(__file__).parent / "output"
OUT.mkdir(exist_ok=True)

# --- 1. small-angle period vs the analytic pendulum -------------------------

params = CraneParameters(swing_damping=0.0)
dt = 1e-3

print("small-angle free swing, theta0 = 0.05 rad")
for l in (0.3, 0.5, 0.8):
    state = CraneState(l=l, theta=0.05)
    crossings = []
    prev = state
    for _ in range(6000):
        state = step_rk4(prev, ZERO_INPUT, dt, params)
        if prev.theta > 0.0 >= state.theta:
            crossings.append(prev.t + dt * prev.theta / (prev.theta - state.theta))
        prev = state
    measured = crossings[1] - crossings[0]
    analytic = 2 * math.pi * math.sqrt(l / params.gravity)
    print(f"  l = {l:.1f} m: measured period {measured:.4f} s, "
          f"analytic 2*pi*sqrt(l/g) = {analytic:.4f} s "
          f"({100 * abs(measured - analytic) / analytic:.3f}% off)")

# --- 2. damped swing: trajectory and energy ----------------------------------

damped = CraneParameters(swing_damping=0.7)
state = CraneState(l=0.5, theta=0.3)
states = [state]
for _ in range(8000):
    state = step_rk4(state, ZERO_INPUT, dt, damped)
    states.append(state)

t = np.array([s.t for s in states])
theta = np.array([s.theta for s in states])
energy = np.array([swing_energy(s, damped) for s in states])
print(f"\ndamped swing (c_theta = {damped.swing_damping}): energy "
      f"{energy[0]:.4f} -> {energy[-1]:.6f} J/kg, "
      f"monotone non-increasing: {bool(np.all(np.diff(energy) <= 1e-9))}")

# --- 3. observed integrator order --------------------------------------------

def final_theta(step):
    s = CraneState(l=0.5, theta=0.3)
    for _ in range(round(2.0 / step)):
        s = step_rk4(s, ZERO_INPUT, step, params)
    return s.theta

reference = final_theta(1e-5)
err_coarse = abs(final_theta(1e-3) - reference)
err_fine = abs(final_theta(5e-4) - reference)
print(f"\nintegrator error vs dt=1e-5 reference: "
      f"dt=1e-3 -> {err_coarse:.3e}, dt=5e-4 -> {err_fine:.3e}, "
      f"observed order = {math.log2(err_coarse / err_fine):.2f}")

# --- plot ---------------------------------------------------------------------

fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(8, 6), sharex=True)
ax1.plot(t, theta)
ax1.set_ylabel("theta [rad]")
ax1.set_title("damped free swing, l = 0.5 m")
ax1.grid(True)
ax2.plot(t, energy)
ax2.set_ylabel("swing energy [J/kg]")
ax2.set_xlabel("t [s]")
ax2.grid(True)
fig.tight_layout()
fig.savefig(OUT / "swing_dynamics.png", dpi=120)
print(f"\nwrote {OUT / 'swing_dynamics.png'}")
