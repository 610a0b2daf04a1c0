"""Anti-sway trajectory generation: trapezoid vs zero-vibration shaped moves.

Run:  python demos/02_anti_sway_shaping.py
Writes demos/output/anti_sway.png
"""

from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from cranetwin import CraneParameters, CraneState, plan_trapezoid, plan_zv_shaped, simulate, zv_impulses

OUT = Path(__file__).parent / "output"
OUT.mkdir(exist_ok=True)

params = CraneParameters(swing_damping=0.0)  # undamped: worst case for sway
l = 0.5

(a1, a2), delay = zv_impulses(l, 0.0, params)
print(f"ZV shaper at l = {l} m, zeta = 0: impulses ({a1:.2f}, {a2:.2f}), "
      f"delay {delay:.4f} s (half swing period)")

plain = plan_trapezoid(0.0, 0.5, 0.3, 1.0, 1e-3)
shaped = plan_zv_shaped(0.0, 0.5, 0.3, 1.0, l, 0.0, 1e-3, params=params)
print(f"durations: trapezoid {plain.duration:.3f} s, "
      f"shaped {shaped.duration:.3f} s (baseline + delay)")

traces = {
    "trapezoid": simulate(plain, params, CraneState(l=l), settle=3.0),
    "zv_shaped": simulate(shaped, params, CraneState(l=l), settle=3.0),
}

for name, trace in traces.items():
    end = plain.duration if name == "trapezoid" else shaped.duration
    residual = max(abs(s.theta) for s in trace.samples if s.t > end)
    print(f"  {name:10s}: residual swing after motion end = {residual:.2e} rad")

fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(8, 6), sharex=True)
for name, trace in traces.items():
    t = np.array([s.t for s in trace.samples])
    ax1.plot(t, [s.x for s in trace.samples], label=name)
    ax2.plot(t, np.degrees([s.theta for s in trace.samples]), label=name)
ax1.set_ylabel("cart x [m]")
ax1.legend()
ax1.grid(True)
ax2.set_ylabel("swing theta [deg]")
ax2.set_xlabel("t [s]")
ax2.grid(True)
fig.suptitle("0.5 m move: unshaped vs ZV-shaped")
fig.tight_layout()
fig.savefig(OUT / "anti_sway.png", dpi=120)
print(f"\nwrote {OUT / 'anti_sway.png'}")
