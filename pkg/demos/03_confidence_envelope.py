"""Ensemble confidence envelopes around a simulated move.

Run:  python demos/03_confidence_envelope.py
Writes demos/output/envelope.png
"""

from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from cranetwin import (
    CraneParameters,
    CraneState,
    EnvelopeConfig,
    confidence_envelope,
    plan_zv_shaped,
    simulate,
)

OUT = Path(__file__).parent / "output"
OUT.mkdir(exist_ok=True)

params = CraneParameters()
traj = plan_zv_shaped(0.0, 0.5, 0.3, 1.0, 0.5, 0.05, 1e-3, params=params)
initial = CraneState(l=0.5)

nominal = simulate(traj, params, initial, dt=0.01, settle=2.0)
cfg = EnvelopeConfig(ensemble_size=12, perturbation=0.05,
                     perturbed_parameters=("l", "c_theta"), seed=7)
lower, upper = confidence_envelope(traj, params, cfg, initial,
                                   dt=0.01, settle=2.0)

print(f"ensemble of {cfg.ensemble_size} simulations, parameters perturbed "
      f"+-{100 * cfg.perturbation:.0f}%: {cfg.perturbed_parameters}")
width = np.mean([u.theta - lo.theta
                 for lo, u in zip(lower.samples, upper.samples)])
print(f"mean theta envelope width: {width:.4f} rad")
inside = all(lo.theta <= n.theta <= u.theta for lo, n, u in
             zip(lower.samples, nominal.samples, upper.samples))
print(f"nominal trace contained in the band: {inside}")

t = np.array([s.t for s in nominal.samples])
fig, ax = plt.subplots(figsize=(8, 4))
ax.fill_between(t, np.degrees([s.theta for s in lower.samples]),
                np.degrees([s.theta for s in upper.samples]),
                alpha=0.3, label="min/max envelope")
ax.plot(t, np.degrees([s.theta for s in nominal.samples]),
        label="nominal simulation")
ax.set_xlabel("t [s]")
ax.set_ylabel("theta [deg]")
ax.legend()
ax.grid(True)
ax.set_title("swing angle with parameter-perturbation envelope")
fig.tight_layout()
fig.savefig(OUT / "envelope.png", dpi=120)
print(f"\nwrote {OUT / 'envelope.png'}")
