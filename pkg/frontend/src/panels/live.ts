// Live view: numeric gauges plus a strip chart fed from the event stream.

import { StripChart } from "../chart";
import { ViewModel } from "../viewmodel";

const GAUGES: Array<[string, string, (vm: ViewModel) => number | undefined]> = [
  ["gauge-x", "cart x [m]", (vm) => vm.status?.state.x],
  ["gauge-l", "rope l [m]", (vm) => vm.status?.state.l],
  ["gauge-theta", "swing theta [rad]", (vm) => vm.status?.state.theta],
  ["gauge-wind", "wind [m/s]", (vm) => vm.status?.state.wind],
];

const TRACES: Array<[keyof import("../api").CraneStateDto, string]> = [
  ["x", "#4fa3ff"],
  ["l", "#ffb454"],
  ["theta", "#7ce38b"],
  ["wind", "#b58cff"],
];

export function mountLivePanel(container: HTMLElement, vm: ViewModel): void {
  container.innerHTML = "";
  const title = document.createElement("h2");
  title.textContent = "Live";
  const stale = document.createElement("span");
  stale.id = "stale-indicator";
  stale.className = "badge stale";
  stale.textContent = "STALE";
  stale.style.display = "none";
  title.appendChild(stale);
  container.appendChild(title);

  const flags = document.createElement("div");
  flags.id = "status-flags";
  flags.className = "row";
  container.appendChild(flags);

  const gaugeRow = document.createElement("div");
  gaugeRow.className = "gauges";
  const gaugeEls = new Map<string, HTMLElement>();
  for (const [id, label] of GAUGES) {
    const cell = document.createElement("div");
    cell.className = "gauge";
    const labelEl = document.createElement("div");
    labelEl.className = "gauge-label";
    labelEl.textContent = label;
    const valueEl = document.createElement("div");
    valueEl.className = "gauge-value";
    valueEl.id = id;
    valueEl.textContent = "--";
    cell.append(labelEl, valueEl);
    gaugeRow.appendChild(cell);
    gaugeEls.set(id, valueEl);
  }
  container.appendChild(gaugeRow);

  const canvas = document.createElement("canvas");
  canvas.id = "live-chart";
  canvas.width = 860;
  canvas.height = 220;
  container.appendChild(canvas);
  const chart = new StripChart(canvas);

  vm.subscribe(() => {
    for (const [id, , read] of GAUGES) {
      const value = read(vm);
      gaugeEls.get(id)!.textContent =
        value === undefined ? "--" : value.toFixed(4);
    }
    stale.style.display = vm.stale ? "inline-block" : "none";
    const status = vm.status;
    flags.innerHTML = "";
    for (const [name, active] of [
      ["homed", status?.homed],
      ["busy", status?.busy],
      ["fault", status?.fault_active],
      ["magnet", status?.state.magnet_on],
    ] as Array<[string, boolean | undefined]>) {
      const badge = document.createElement("span");
      badge.className = `badge ${active ? "on" : "off"}`;
      badge.id = `flag-${name}`;
      badge.textContent = name;
      flags.appendChild(badge);
    }

    const t = vm.liveStates.map((e) => e.state.t);
    chart.setData(
      TRACES.map(([field, color]) => ({
        label: String(field),
        t,
        y: vm.liveStates.map((e) => Number(e.state[field])),
        color,
      })),
    );
  });
}
