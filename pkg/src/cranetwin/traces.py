"""Uniformly sampled time series of crane states, measured or simulated."""

from __future__ import annotations

from dataclasses import dataclass

from .model import CraneState

TRACE_KINDS = ("measured", "simulated", "envelope_lower", "envelope_upper")


@dataclass(frozen=True)
class Trace:
    """Ordered CraneState samples attached to a run (or ad-hoc simulation)."""

    run_id: str
    kind: str
    dt: float
    samples: tuple[CraneState, ...]

    def __post_init__(self) -> None:
        if self.kind not in TRACE_KINDS:
            raise ValueError(f"unknown trace kind {self.kind!r}")

    @property
    def t(self) -> list[float]:
        return [s.t for s in self.samples]

    def signal(self, name: str) -> list[float]:
        return [getattr(s, name) for s in self.samples]

    def as_dict(self) -> dict:
        return {
            "run_id": self.run_id,
            "kind": self.kind,
            "dt": self.dt,
            "samples": [s.as_dict() for s in self.samples],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Trace":
        return cls(
            run_id=d["run_id"],
            kind=d["kind"],
            dt=float(d["dt"]),
            samples=tuple(CraneState.from_dict(s) for s in d["samples"]),
        )

    @classmethod
    def from_samples(cls, run_id: str, kind: str,
                     samples: tuple[CraneState, ...]) -> "Trace":
        dt = samples[1].t - samples[0].t if len(samples) > 1 else 0.0
        return cls(run_id=run_id, kind=kind, dt=dt, samples=samples)
