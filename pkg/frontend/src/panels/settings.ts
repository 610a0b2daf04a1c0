// Settings: logger writeout decimation, validation thresholds and envelope
// ensemble, applied atomically through PUT /api/config. Drafts are validated
// client-side; invalid fields block the submit with a per-field message.

import { ThresholdsDto } from "../api";
import { ViewModel } from "../viewmodel";

const SIGNALS = ["x", "theta", "l"];
const METRICS = ["rmse", "max_dev", "dtw"];

interface FieldCheck {
  input: HTMLInputElement;
  error: HTMLElement;
  validate(value: number): string | null;
}

function field(id: string, label: string, validate: (v: number) => string | null,
               step = "1"): [HTMLElement, FieldCheck] {
  const wrap = document.createElement("label");
  wrap.className = "field";
  wrap.textContent = label;
  const input = document.createElement("input");
  input.type = "number";
  input.id = id;
  input.step = step;
  const error = document.createElement("span");
  error.className = "field-error";
  wrap.append(input, error);
  return [wrap, { input, error, validate }];
}

export function mountSettingsPanel(container: HTMLElement, vm: ViewModel): void {
  container.innerHTML = "";
  const title = document.createElement("h2");
  title.textContent = "Settings";
  container.appendChild(title);

  const checks: FieldCheck[] = [];

  const [decimationEl, decimation] = field(
    "cfg-decimation", "writeout decimation ",
    (v) => Number.isInteger(v) && v >= 1 ? null : "must be an integer >= 1");
  const [flushEl, flush] = field(
    "cfg-flush", "flush period [s] ",
    (v) => v > 0 ? null : "must be > 0", "0.1");
  const [ensembleEl, ensemble] = field(
    "cfg-ensemble", "envelope ensemble size ",
    (v) => Number.isInteger(v) && v >= 1 ? null : "must be an integer >= 1");
  const [perturbEl, perturb] = field(
    "cfg-perturbation", "envelope perturbation ",
    (v) => v >= 0 && v < 1 ? null : "must be in [0, 1)", "0.01");
  checks.push(decimation, flush, ensemble, perturb);

  container.append(decimationEl, flushEl, ensembleEl, perturbEl);

  const thrTitle = document.createElement("h3");
  thrTitle.textContent = "Validation thresholds";
  container.appendChild(thrTitle);

  const thrTable = document.createElement("table");
  thrTable.id = "thresholds-table";
  const head = document.createElement("tr");
  head.innerHTML = "<th></th>" + METRICS.map((m) => `<th>${m}</th>`).join("");
  thrTable.appendChild(head);
  const thrChecks = new Map<string, FieldCheck>();
  for (const signal of SIGNALS) {
    const tr = document.createElement("tr");
    const nameCell = document.createElement("td");
    nameCell.textContent = signal;
    tr.appendChild(nameCell);
    for (const metric of METRICS) {
      const td = document.createElement("td");
      const input = document.createElement("input");
      input.type = "number";
      input.step = "any";
      input.id = `thr-${signal}-${metric}`;
      const error = document.createElement("span");
      error.className = "field-error";
      td.append(input, error);
      tr.appendChild(td);
      const check: FieldCheck = {
        input, error,
        validate: (v) => v >= 0 ? null : "must be >= 0",
      };
      thrChecks.set(`${signal}/${metric}`, check);
      checks.push(check);
    }
    thrTable.appendChild(tr);
  }
  container.appendChild(thrTable);

  const applyBtn = document.createElement("button");
  applyBtn.id = "btn-apply-config";
  applyBtn.textContent = "Apply";
  const status = document.createElement("div");
  status.id = "settings-status";
  container.append(applyBtn, status);

  function populate(): void {
    const config = vm.config;
    if (!config) return;
    decimation.input.value = String(config.logger.writeout_decimation);
    flush.input.value = String(config.logger.buffer_flush_period);
    ensemble.input.value = String(config.envelope.ensemble_size);
    perturb.input.value = String(config.envelope.perturbation);
    for (const signal of SIGNALS) {
      for (const metric of METRICS) {
        const check = thrChecks.get(`${signal}/${metric}`)!;
        check.input.value = String(config.thresholds?.[signal]?.[metric] ?? 0);
      }
    }
  }

  let populated = false;
  vm.subscribe(() => {
    if (!populated && vm.config) {
      populated = true;
      populate();
    }
  });

  applyBtn.addEventListener("click", () => {
    let valid = true;
    for (const check of checks) {
      const message = check.validate(parseFloat(check.input.value));
      check.error.textContent = message ?? "";
      if (message) valid = false;
    }
    status.textContent = "";
    status.className = "";
    if (!valid) {
      status.textContent = "not applied: fix the highlighted fields";
      status.className = "inline-error";
      return;
    }
    const thresholds: ThresholdsDto = {};
    for (const signal of SIGNALS) {
      thresholds[signal] = {};
      for (const metric of METRICS) {
        thresholds[signal][metric] =
          parseFloat(thrChecks.get(`${signal}/${metric}`)!.input.value);
      }
    }
    const update = {
      logger: {
        writeout_decimation: parseInt(decimation.input.value, 10),
        buffer_flush_period: parseFloat(flush.input.value),
      },
      envelope: {
        ensemble_size: parseInt(ensemble.input.value, 10),
        perturbation: parseFloat(perturb.input.value),
        seed: vm.config?.envelope.seed ?? 0,
        perturbed_parameters: vm.config?.envelope.perturbed_parameters
          ?? ["l", "c_theta", "k_w"],
      },
      thresholds,
    };
    void (async () => {
      try {
        await vm.api.putConfig(update);
        await vm.refreshConfig();
        populate();
        status.textContent = "applied";
        status.className = "ok";
      } catch (err) {
        status.textContent = `rejected by gateway: ${err}`;
        status.className = "inline-error";
      }
    })();
  });
}
