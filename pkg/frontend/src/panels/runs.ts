// Run explorer: stored runs, overlay chart of measured vs simulated with the
// confidence band, and the validation report with failed metrics highlighted.

import { TraceDto } from "../api";
import { Band, Series, StripChart } from "../chart";
import { SelectedRun, ViewModel } from "../viewmodel";

const SIGNALS = ["theta", "x", "l"] as const;
type Signal = (typeof SIGNALS)[number];

function signalOf(trace: TraceDto, signal: Signal): number[] {
  return trace.samples.map((s) => Number(s[signal]));
}

function timesOf(trace: TraceDto): number[] {
  return trace.samples.map((s) => s.t);
}

export interface RunsPanel {
  chart: StripChart;
  currentSignal(): Signal;
}

export function mountRunsPanel(container: HTMLElement, vm: ViewModel): RunsPanel {
  container.innerHTML = "";
  const title = document.createElement("h2");
  title.textContent = "Runs";
  container.appendChild(title);

  const empty = document.createElement("div");
  empty.id = "runs-empty";
  empty.textContent = "No runs yet. Home the crane and start a move.";
  container.appendChild(empty);

  const table = document.createElement("table");
  table.id = "runs-table";
  table.innerHTML =
    "<thead><tr><th>run</th><th>mode</th><th>status</th>" +
    "<th>verdict</th></tr></thead>";
  const tbody = document.createElement("tbody");
  table.appendChild(tbody);
  container.appendChild(table);

  const detail = document.createElement("div");
  detail.id = "run-detail";
  detail.style.display = "none";

  const verdict = document.createElement("div");
  verdict.id = "run-verdict";
  detail.appendChild(verdict);

  const signalSelect = document.createElement("select");
  signalSelect.id = "run-signal";
  for (const signal of SIGNALS) {
    const opt = document.createElement("option");
    opt.value = signal;
    opt.textContent = signal;
    signalSelect.appendChild(opt);
  }
  detail.appendChild(signalSelect);

  const canvas = document.createElement("canvas");
  canvas.id = "run-chart";
  canvas.width = 860;
  canvas.height = 260;
  detail.appendChild(canvas);
  const chart = new StripChart(canvas);

  const reportTable = document.createElement("table");
  reportTable.id = "validation-table";
  reportTable.innerHTML =
    "<thead><tr><th>signal</th><th>metric</th><th>value</th>" +
    "<th>threshold</th><th>pass</th></tr></thead>";
  const reportBody = document.createElement("tbody");
  reportTable.appendChild(reportBody);
  detail.appendChild(reportTable);

  container.appendChild(detail);

  function drawSelected(selected: SelectedRun): void {
    const signal = signalSelect.value as Signal;
    const series: Series[] = [];
    if (selected.measured) {
      series.push({
        label: "measured",
        t: timesOf(selected.measured),
        y: signalOf(selected.measured, signal),
        color: "#4fa3ff",
      });
    }
    if (selected.simulated) {
      series.push({
        label: "simulated",
        t: timesOf(selected.simulated),
        y: signalOf(selected.simulated, signal),
        color: "#ffb454",
      });
    }
    let band: Band | null = null;
    if (selected.envelopeLower && selected.envelopeUpper) {
      band = {
        t: timesOf(selected.envelopeLower),
        lower: signalOf(selected.envelopeLower, signal),
        upper: signalOf(selected.envelopeUpper, signal),
        color: "rgba(124, 227, 139, 0.25)",
      };
    }
    chart.setData(series, band);
  }

  signalSelect.addEventListener("change", () => {
    if (vm.selected) drawSelected(vm.selected);
  });

  vm.subscribe(() => {
    empty.style.display = vm.runs.length === 0 ? "block" : "none";
    table.style.display = vm.runs.length === 0 ? "none" : "table";
    tbody.innerHTML = "";
    for (const run of vm.runs) {
      const tr = document.createElement("tr");
      tr.dataset.runId = run.run_id;
      if (vm.selected?.record.run_id === run.run_id) tr.className = "selected";
      const verdictText =
        run.overall_pass == null ? "" : run.overall_pass ? "PASS" : "FAIL";
      tr.innerHTML =
        `<td>${run.run_id}</td><td>${run.mode}</td>` +
        `<td>${run.status}</td><td>${verdictText}</td>`;
      tr.addEventListener("click", () => void vm.selectRun(run.run_id));
      tbody.appendChild(tr);
    }

    const selected = vm.selected;
    detail.style.display = selected ? "block" : "none";
    if (!selected) return;
    const report = selected.report;
    verdict.textContent = report
      ? `run ${selected.record.run_id}: ${report.overall_pass ? "PASS" : "FAIL"}`
      : `run ${selected.record.run_id}: no validation report yet`;
    verdict.className = report
      ? report.overall_pass ? "verdict pass" : "verdict fail"
      : "verdict";

    reportBody.innerHTML = "";
    for (const row of report?.results ?? []) {
      const tr = document.createElement("tr");
      tr.className = row.pass ? "metric-ok" : "metric-failed";
      tr.innerHTML =
        `<td>${row.signal}</td><td>${row.metric}</td>` +
        `<td>${row.value.toExponential(3)}</td>` +
        `<td>${row.threshold.toExponential(3)}</td>` +
        `<td>${row.pass ? "ok" : "FAILED"}</td>`;
      reportBody.appendChild(tr);
    }

    drawSelected(selected);
  });

  return { chart, currentSignal: () => signalSelect.value as Signal };
}
