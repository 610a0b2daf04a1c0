"""Desk-scale gantry crane digital twin.

A simulated lab crane and the services around it: anti-sway trajectory
generation, pub/sub telemetry, append-only historian, nominal simulation
with confidence envelopes, and continuous validation with operator alerts.
"""

from .bus import Broker, BusClient, BusMessage, LoopbackBroker, match
from .config import TwinConfig, load_config, save_config
from .crane import FaultSpec, RunHandle, SensorModel, StatusSnapshot, VirtualCrane
from .errors import (
    BusyError,
    ConflictError,
    CraneTwinError,
    DomainError,
    NotFoundError,
    NumericalError,
    ProtocolError,
    SingularityError,
    StateError,
    StorageError,
)
from .historian import Historian, LoggerConfig, LoggingApp, RunRecord
from .model import (
    CraneParameters,
    CraneState,
    PlantInput,
    StateDerivative,
    derivatives,
    natural_frequency,
    step_rk4,
    swing_energy,
)
from .simulation import (
    EnvelopeConfig,
    SimulationService,
    confidence_envelope,
    simulate,
)
from .stack import TwinStack
from .traces import Trace
from .trajectory import (
    Trajectory,
    TrajectoryService,
    Waypoint,
    damping_ratio_for,
    plan_trapezoid,
    plan_zv_shaped,
    resample,
    zv_impulses,
)
from .validation import (
    MetricResult,
    ValidationReport,
    ValidationService,
    Validator,
    calibrate_thresholds,
    dtw,
    max_dev,
    rmse,
)

__version__ = "0.1.0"

__all__ = [
    "Broker", "BusClient", "BusMessage", "LoopbackBroker", "match",
    "TwinConfig", "load_config", "save_config",
    "FaultSpec", "RunHandle", "SensorModel", "StatusSnapshot", "VirtualCrane",
    "BusyError", "ConflictError", "CraneTwinError", "DomainError",
    "NotFoundError", "NumericalError", "ProtocolError", "SingularityError",
    "StateError", "StorageError",
    "Historian", "LoggerConfig", "LoggingApp", "RunRecord",
    "CraneParameters", "CraneState", "PlantInput", "StateDerivative",
    "derivatives", "natural_frequency", "step_rk4", "swing_energy",
    "EnvelopeConfig", "SimulationService", "confidence_envelope", "simulate",
    "TwinStack", "Trace",
    "Trajectory", "TrajectoryService", "Waypoint", "damping_ratio_for",
    "plan_trapezoid", "plan_zv_shaped", "resample", "zv_impulses",
    "MetricResult", "ValidationReport", "ValidationService", "Validator",
    "calibrate_thresholds", "dtw", "max_dev", "rmse",
    "__version__",
]
