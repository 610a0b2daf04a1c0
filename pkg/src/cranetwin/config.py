"""Twin stack configuration: one JSON file (or defaults) drives everything.

Resolution order for paths: explicit argument, then environment variables
CRANETWIN_CONFIG / CRANETWIN_DATA_DIR, then built-in defaults. Thresholds
start out unset (null) and are written back after the first-start
calibration run.
"""

from __future__ import annotations

import dataclasses
import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .crane import SensorModel
from .errors import DomainError
from .historian import LoggerConfig
from .model import CraneParameters
from .simulation import EnvelopeConfig

CONFIG_ENV = "CRANETWIN_CONFIG"
DATA_DIR_ENV = "CRANETWIN_DATA_DIR"
DEFAULT_DATA_DIR = "cranetwin-data"


@dataclass
class TwinConfig:
    broker_host: str = "127.0.0.1"
    broker_port: int = 7878
    gateway_host: str = "127.0.0.1"
    gateway_port: int = 8080
    data_dir: str = DEFAULT_DATA_DIR
    params: CraneParameters = field(default_factory=CraneParameters)
    sensors: SensorModel = field(default_factory=SensorModel)
    envelope: EnvelopeConfig = field(default_factory=EnvelopeConfig)
    logger: LoggerConfig = field(default_factory=LoggerConfig)
    thresholds: Optional[dict] = None
    dtw_band: int = 25
    model_dt: float = 1e-3
    settle_time: float = 2.0
    time_scale: float = 1.0          # 0 = run as fast as possible
    seed: int = 0
    wind_mean: float = 0.0
    wind_std: float = 0.0
    wind_tau: float = 2.0
    initial_x: float = 0.25
    initial_l: float = 0.5
    heartbeat_period: float = 5.0
    calibration_target_x: float = 0.3
    static_dir: Optional[str] = None  # HMI files served by the gateway

    def as_dict(self) -> dict:
        return {
            "broker": {"host": self.broker_host, "port": self.broker_port},
            "gateway": {"host": self.gateway_host, "port": self.gateway_port},
            "data_dir": self.data_dir,
            "params": dataclasses.asdict(self.params),
            "sensors": dataclasses.asdict(self.sensors),
            "envelope": self.envelope.as_dict(),
            "logger": dataclasses.asdict(self.logger),
            "thresholds": self.thresholds,
            "dtw_band": self.dtw_band,
            "model_dt": self.model_dt,
            "settle_time": self.settle_time,
            "time_scale": self.time_scale,
            "seed": self.seed,
            "wind": {"mean": self.wind_mean, "std": self.wind_std,
                     "tau": self.wind_tau},
            "initial_x": self.initial_x,
            "initial_l": self.initial_l,
            "heartbeat_period": self.heartbeat_period,
            "calibration_target_x": self.calibration_target_x,
            "static_dir": self.static_dir,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TwinConfig":
        cfg = cls()
        broker = d.get("broker", {})
        gateway = d.get("gateway", {})
        wind = d.get("wind", {})
        cfg.broker_host = broker.get("host", cfg.broker_host)
        cfg.broker_port = int(broker.get("port", cfg.broker_port))
        cfg.gateway_host = gateway.get("host", cfg.gateway_host)
        cfg.gateway_port = int(gateway.get("port", cfg.gateway_port))
        cfg.data_dir = d.get("data_dir", cfg.data_dir)
        if "params" in d:
            cfg.params = CraneParameters(**d["params"])
        if "sensors" in d:
            cfg.sensors = SensorModel(**d["sensors"])
        if "envelope" in d:
            cfg.envelope = EnvelopeConfig.from_dict(d["envelope"])
        if "logger" in d:
            cfg.logger = LoggerConfig(**d["logger"])
        cfg.thresholds = d.get("thresholds")
        cfg.dtw_band = int(d.get("dtw_band", cfg.dtw_band))
        cfg.model_dt = float(d.get("model_dt", cfg.model_dt))
        cfg.settle_time = float(d.get("settle_time", cfg.settle_time))
        cfg.time_scale = float(d.get("time_scale", cfg.time_scale))
        cfg.seed = int(d.get("seed", cfg.seed))
        cfg.wind_mean = float(wind.get("mean", cfg.wind_mean))
        cfg.wind_std = float(wind.get("std", cfg.wind_std))
        cfg.wind_tau = float(wind.get("tau", cfg.wind_tau))
        cfg.initial_x = float(d.get("initial_x", cfg.initial_x))
        cfg.initial_l = float(d.get("initial_l", cfg.initial_l))
        cfg.heartbeat_period = float(d.get("heartbeat_period",
                                           cfg.heartbeat_period))
        cfg.calibration_target_x = float(d.get("calibration_target_x",
                                               cfg.calibration_target_x))
        cfg.static_dir = d.get("static_dir")
        return cfg


def validate_thresholds(thresholds: dict) -> dict:
    """Checks the {signal: {metric: value >= 0}} shape; returns a clean copy."""
    from .validation import DEFAULT_METRICS, DEFAULT_SIGNALS
    if not isinstance(thresholds, dict):
        raise DomainError("thresholds must be an object")
    clean: dict = {}
    for signal in DEFAULT_SIGNALS:
        per_signal = thresholds.get(signal)
        if not isinstance(per_signal, dict):
            raise DomainError(f"thresholds missing signal {signal!r}")
        clean[signal] = {}
        for metric in DEFAULT_METRICS:
            if metric not in per_signal:
                raise DomainError(
                    f"thresholds missing {signal}/{metric}")
            value = float(per_signal[metric])
            if not value >= 0.0:
                raise DomainError(
                    f"threshold {signal}/{metric} must be >= 0, got {value}")
            clean[signal][metric] = value
    return clean


def load_config(path: Optional[str] = None) -> TwinConfig:
    """Load the config file (argument, then $CRANETWIN_CONFIG), fall back to
    defaults; $CRANETWIN_DATA_DIR overrides the data directory either way."""
    path = path or os.environ.get(CONFIG_ENV)
    if path:
        cfg = TwinConfig.from_dict(
            json.loads(Path(path).read_text(encoding="utf-8")))
    else:
        cfg = TwinConfig()
    env_data_dir = os.environ.get(DATA_DIR_ENV)
    if env_data_dir:
        cfg.data_dir = env_data_dir
    return cfg


def save_config(cfg: TwinConfig, path: str | Path) -> None:
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(json.dumps(cfg.as_dict(), indent=2) + "\n",
                   encoding="utf-8")
    tmp.replace(path)
