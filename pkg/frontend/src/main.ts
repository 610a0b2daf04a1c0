// Application bootstrap: wire the gateway client, the event stream and the
// four panels together. boot() is exported so tests can drive the same code
// against a live gateway with an injected document and base URL.

import { GatewayClient } from "./api";
import { mountControlPanel } from "./panels/control";
import { mountLivePanel } from "./panels/live";
import { mountRunsPanel, RunsPanel } from "./panels/runs";
import { mountSettingsPanel } from "./panels/settings";
import { StreamConnection } from "./stream";
import { ViewModel } from "./viewmodel";

export interface App {
  vm: ViewModel;
  runsPanel: RunsPanel;
  stream: StreamConnection;
  stop(): void;
}

export function boot(root: Document, baseUrl = ""): App {
  const api = new GatewayClient(baseUrl);
  const vm = new ViewModel(api);

  const alertsBox = root.getElementById("alerts")!;
  vm.subscribe(() => {
    alertsBox.innerHTML = "";
    vm.alerts.forEach((alert, index) => {
      const banner = root.createElement("div");
      banner.className = "alert-banner";
      const text = root.createElement("span");
      text.textContent = `VALIDATION ALERT: ${alert.message}`;
      const ack = root.createElement("button");
      ack.className = "ack";
      ack.textContent = "acknowledge";
      ack.addEventListener("click", () => vm.acknowledgeAlert(index));
      banner.append(text, ack);
      alertsBox.appendChild(banner);
    });
  });

  mountControlPanel(root.getElementById("control-panel")!, vm);
  mountLivePanel(root.getElementById("live-panel")!, vm);
  const runsPanel = mountRunsPanel(root.getElementById("runs-panel")!, vm);
  mountSettingsPanel(root.getElementById("settings-panel")!, vm);

  const stream = new StreamConnection(baseUrl + "/api/stream", {
    onState: (event) => vm.pushState(event),
    onAlert: (event) => vm.pushAlert(event),
    onStale: (stale) => vm.setStale(stale),
  });
  stream.connect();

  void vm.refreshStatus();
  void vm.refreshRuns();
  void vm.refreshConfig();
  const statusPoll = setInterval(() => void vm.refreshStatus(), 500);
  const runsPoll = setInterval(() => void vm.refreshRuns(), 2000);

  return {
    vm,
    runsPanel,
    stream,
    stop() {
      clearInterval(statusPoll);
      clearInterval(runsPoll);
      stream.close();
    },
  };
}

declare global {
  interface Window {
    craneTwinApp?: App;
  }
}

if (typeof window !== "undefined" && typeof document !== "undefined"
    && document.getElementById("control-panel")) {
  window.craneTwinApp = boot(document, "");
}
