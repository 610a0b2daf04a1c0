"""One-command composition of the whole twin: broker, historian/logging,
trajectory generator, virtual crane, simulation, validation and gateway in a
single process group.

On first start (no thresholds in the config) the stack performs a seeded
calibration run - home, one shaped move - and pins the validation thresholds
to five times the metric values observed on it, so pass/fail is meaningful
on any machine. The thresholds are written back to the config file when one
was given.
"""

from __future__ import annotations

import time
from typing import Optional

from .bus import Broker, BusClient
from .config import TwinConfig, save_config
from .crane import VirtualCrane
from .errors import NotFoundError
from .gateway import Gateway
from .historian import Historian, LoggingApp
from .simulation import SimulationService
from .trajectory import TrajectoryService
from .validation import ValidationService, Validator, calibrate_thresholds


class TwinStack:
    def __init__(self, config: TwinConfig, config_path: Optional[str] = None):
        self.config = config
        self.config_path = config_path
        self.readiness: list[str] = []
        self.broker: Optional[Broker] = None
        self.historian: Optional[Historian] = None
        self.crane: Optional[VirtualCrane] = None
        self.validator: Optional[Validator] = None
        self.gateway: Optional[Gateway] = None
        self._clients: list[BusClient] = []
        self._services = []

    def _client(self) -> BusClient:
        client = BusClient(self.config.broker_host, self.broker.port).connect()
        self._clients.append(client)
        return client

    def start(self, on_ready=None) -> "TwinStack":
        cfg = self.config
        emit = on_ready or (lambda line: None)

        def ready(line: str) -> None:
            self.readiness.append(line)
            emit(line)

        self.broker = Broker(cfg.broker_host, cfg.broker_port).start()
        ready(f"broker ready on {cfg.broker_host}:{self.broker.port}")

        self.historian = Historian(cfg.data_dir, cfg.logger)
        ready(f"historian ready at {self.historian.data_dir}")

        logging_app = LoggingApp(self._client(), self.historian).start()
        self._services.append(logging_app)
        ready("logging ready")

        trajectory_service = TrajectoryService(self._client(),
                                               cfg.params).start()
        self._services.append(trajectory_service)
        ready("trajectory-generator ready")

        simulation_service = SimulationService(
            self._client(), self.historian, cfg.params, cfg.envelope).start()
        self._services.append(simulation_service)
        ready("simulation-service ready")

        self.crane = VirtualCrane(
            self._client(), params=cfg.params, sensors=cfg.sensors,
            model_dt=cfg.model_dt, settle_time=cfg.settle_time,
            time_scale=cfg.time_scale, wind_mean=cfg.wind_mean,
            wind_std=cfg.wind_std, wind_tau=cfg.wind_tau, seed=cfg.seed,
            initial_x=cfg.initial_x, initial_l=cfg.initial_l)
        ready("virtual-crane ready")

        calibrated = False
        if cfg.thresholds is None:
            cfg.thresholds = self._calibrate()
            if self.config_path:
                save_config(cfg, self.config_path)
            calibrated = True

        self.validator = Validator(self.historian, cfg.thresholds,
                                   dtw_band=cfg.dtw_band,
                                   bus_client=self._client())
        validation_service = ValidationService(self.validator,
                                               self._client()).start()
        self._services.append(validation_service)
        ready("validation-service ready"
              + (" (thresholds calibrated)" if calibrated else ""))

        self.gateway = Gateway(self.crane, self.historian, self.validator,
                               cfg, self._client(),
                               simulation_service=simulation_service).start()
        ready(f"gateway ready on http://{cfg.gateway_host}:{self.gateway.port}")
        return self

    def stop(self) -> None:
        if self.gateway is not None:
            self.gateway.stop()
        for service in reversed(self._services):
            service.stop()
        if self.crane is not None:
            self.crane.stop()
        for client in self._clients:
            client.close()
        if self.broker is not None:
            self.broker.stop()
        if self.historian is not None:
            self.historian.close()

    def _calibrate(self) -> dict:
        """Seeded nominal run that pins the validation thresholds."""
        cfg = self.config
        self.crane.home()
        handle = self.crane.move_to(cfg.calibration_target_x,
                                    mode="zv_shaped")
        self.crane.wait_run(handle.run_id, timeout=300.0)
        measured, simulated = self._wait_for_traces(handle.run_id)
        thresholds = calibrate_thresholds(measured, simulated,
                                          dtw_band=cfg.dtw_band)
        self.crane.home()  # leave the crane at the origin
        return thresholds

    def _wait_for_traces(self, run_id: str, timeout: float = 30.0):
        deadline = time.monotonic() + timeout
        while True:
            try:
                measured = self.historian.query_trace(run_id, "measured")
                simulated = self.historian.query_trace(run_id, "simulated")
                if measured.samples and simulated.samples and \
                        len(measured.samples) >= len(simulated.samples):
                    return measured, simulated
            except NotFoundError:
                pass
            if time.monotonic() >= deadline:
                raise TimeoutError(
                    f"traces for calibration run {run_id} did not appear")
            time.sleep(0.05)
