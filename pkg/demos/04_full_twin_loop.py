"""The whole twin loop on one machine: command -> trajectory -> execution ->
logging -> simulation -> continuous validation -> alert.

Brings the full stack up in-process (as-fast-as-possible time base), performs
a nominal move (validation passes), injects a damping fault and moves again
(validation fails and raises an operator alert), then prints both reports.

Run:  python demos/04_full_twin_loop.py
"""

import tempfile
import time

from cranetwin import BusClient, FaultSpec, TwinConfig, TwinStack

config = TwinConfig()
config.broker_port = 0       # ephemeral ports: safe to run anywhere
config.gateway_port = 0
config.data_dir = tempfile.mkdtemp(prefix="cranetwin-demo-")
config.time_scale = 0.0      # as fast as possible
config.thresholds = None     # calibrate on first start

print("starting the twin stack (first start calibrates thresholds)...")
stack = TwinStack(config).start(on_ready=lambda line: print(" ", line))

alerts = BusClient(port=stack.broker.port).connect().subscribe(
    "dt/validation/alert")


def move_and_report(label, target):
    handle = stack.crane.move_to(target, mode="zv_shaped")
    stack.crane.wait_run(handle.run_id)
    deadline = time.monotonic() + 30
    while time.monotonic() < deadline:
        try:
            report = stack.historian.query_report(handle.run_id)
            break
        except Exception:
            time.sleep(0.1)
    verdict = "PASS" if report["overall_pass"] else "FAIL"
    print(f"\n{label}: run {handle.run_id} -> {verdict}")
    for r in report["results"]:
        marker = "ok  " if r["pass"] else "FAIL"
        print(f"  [{marker}] {r['signal']:5s} {r['metric']:7s} "
              f"value {r['value']:.3e}  threshold {r['threshold']:.3e}")
    return handle.run_id


move_and_report("nominal move to 0.5 m", 0.5)

print("\ninjecting fault: swing damping scaled by 1.5")
stack.crane.inject_fault(FaultSpec(damping_scale=1.5, active=True))
move_and_report("faulted move back to 0.0 m", 0.0)

time.sleep(0.5)
for msg in alerts.drain():
    print(f"\noperator alert on {msg.topic}: {msg.payload['message']}")

stack.crane.clear_fault()
print(f"\nrun data kept under {config.data_dir}")
stack.stop()
