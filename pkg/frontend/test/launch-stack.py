"""Starts a full twin stack on ephemeral ports for the HMI tests and prints
the ports as one JSON line; stays up until SIGTERM/SIGINT."""

import json
import signal
import sys
import tempfile
import threading

from cranetwin.config import TwinConfig
from cranetwin.stack import TwinStack

config = TwinConfig()
config.broker_port = 0
config.gateway_port = 0
config.data_dir = tempfile.mkdtemp(prefix="cranetwin-hmi-test-")
config.time_scale = 8.0  # 8x real time: fast, but busy windows stay observable
config.heartbeat_period = 1.0
config.thresholds = None  # calibrate on startup

stack = TwinStack(config).start()
print(json.dumps({"gateway": stack.gateway.port,
                  "broker": stack.broker.port,
                  "data_dir": config.data_dir}), flush=True)

stop = threading.Event()
signal.signal(signal.SIGTERM, lambda *_: stop.set())
signal.signal(signal.SIGINT, lambda *_: stop.set())
stop.wait()
stack.stop()
sys.exit(0)
