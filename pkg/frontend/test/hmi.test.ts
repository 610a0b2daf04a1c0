// DOM-level integration tests against a live twin stack (spawned as a
// subprocess on ephemeral ports). No browser binary is available in this
// environment, so jsdom + an SSE polyfill stand in for one; the assertions
// run against the same DOM and app code the bundle ships.

import { spawn, ChildProcess } from "node:child_process";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { boot, App } from "../src/main";
import { installEventSourcePolyfill } from "./sse-polyfill";

const HERE = dirname(fileURLToPath(import.meta.url));

let stackProcess: ChildProcess;
let base: string;
let app: App;

function el<T extends HTMLElement>(id: string): T {
  const found = document.getElementById(id);
  if (!found) throw new Error(`element #${id} not in DOM`);
  return found as T;
}

async function waitFor(
  condition: () => boolean,
  what: string,
  timeoutMs = 90_000,
): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  while (Date.now() < deadline) {
    if (condition()) return;
    await new Promise((r) => setTimeout(r, 50));
  }
  throw new Error(`timed out waiting for ${what}`);
}

async function api(path: string): Promise<any> {
  const response = await fetch(base + path);
  return response.json();
}

async function startStack(): Promise<void> {
  stackProcess = spawn("python3", [join(HERE, "launch-stack.py")], {
    stdio: ["ignore", "pipe", "inherit"],
  });
  const ports = await new Promise<{ gateway: number }>((resolve, reject) => {
    let buffer = "";
    stackProcess.stdout!.on("data", (chunk: Buffer) => {
      buffer += chunk.toString();
      const newline = buffer.indexOf("\n");
      if (newline >= 0) resolve(JSON.parse(buffer.slice(0, newline)));
    });
    stackProcess.on("exit", (code) =>
      reject(new Error(`stack exited early with code ${code}`)));
    setTimeout(() => reject(new Error("stack startup timed out")), 120_000);
  });
  base = `http://127.0.0.1:${ports.gateway}`;
}

beforeAll(async () => {
  await startStack();
  installEventSourcePolyfill();
  document.body.innerHTML = `
    <div id="alerts"></div>
    <section id="control-panel"></section>
    <section id="live-panel"></section>
    <section id="runs-panel"></section>
    <section id="settings-panel"></section>`;
  app = boot(document, base);
  await waitFor(() => app.vm.status !== null, "first status fetch");
}, 180_000);

afterAll(async () => {
  app?.stop();
  stackProcess?.kill("SIGTERM");
  await new Promise((r) => setTimeout(r, 500));
  stackProcess?.kill("SIGKILL");
});

async function moveAndAwaitVerdict(
  targetX: number,
  mode: "zv" | "trap" = "zv",
): Promise<string> {
  const moveBtn = el<HTMLButtonElement>("btn-move");
  await waitFor(() => !moveBtn.disabled, "move button enabled");
  el<HTMLInputElement>("move-x").value = String(targetX);
  (el<HTMLSelectElement>("move-mode")).value = mode;
  const runsBefore = new Set(app.vm.runs.map((r) => r.run_id));
  moveBtn.click();
  let runId = "";
  await waitFor(() => {
    const fresh = app.vm.runs.find((r) => !runsBefore.has(r.run_id));
    if (fresh) runId = fresh.run_id;
    return runId !== "";
  }, "new run listed");
  await waitFor(() => {
    const run = app.vm.runs.find((r) => r.run_id === runId);
    return run?.overall_pass != null;
  }, `verdict for ${runId}`);
  return runId;
}

function clickRunRow(runId: string): void {
  const row = document.querySelector(
    `#runs-table tbody tr[data-run-id="${runId}"]`,
  ) as HTMLElement | null;
  expect(row, `run row for ${runId}`).toBeTruthy();
  row!.click();
}

describe("operator flow", () => {
  it("homes, moves anti-sway, shows the run inside the envelope band",
    async () => {
      const homeBtn = el<HTMLButtonElement>("btn-home");
      await waitFor(() => !homeBtn.disabled, "home button enabled");
      homeBtn.click();
      await waitFor(() => app.vm.status?.homed === true
        && app.vm.status.busy === false, "homed status");

      const runId = await moveAndAwaitVerdict(0.5);
      const run = app.vm.runs.find((r) => r.run_id === runId)!;
      expect(run.overall_pass).toBe(true);

      clickRunRow(runId);
      await waitFor(() => app.vm.selected?.record.run_id === runId
        && app.vm.selected.report !== null, "run detail loaded");

      const selected = app.vm.selected!;
      expect(selected.report!.overall_pass).toBe(true);
      expect(el("run-verdict").textContent).toContain("PASS");
      expect(el("run-verdict").className).toContain("pass");

      // chart got measured + simulated series and the envelope band
      expect(app.runsPanel.chart.series.length).toBeGreaterThanOrEqual(2);
      expect(app.runsPanel.chart.hasBand()).toBe(true);

      // measured curve sits inside the envelope band (allowing the encoder
      // quantization the band does not model; x is exact)
      const config = await api("/api/config");
      const resolution: number = config.sensors.encoder_resolution;
      const measured = selected.measured!.samples;
      const lower = selected.envelopeLower!.samples;
      const upper = selected.envelopeUpper!.samples;
      expect(measured.length).toBe(lower.length);
      for (let i = 0; i < measured.length; i++) {
        expect(measured[i].theta).toBeGreaterThanOrEqual(
          lower[i].theta - resolution);
        expect(measured[i].theta).toBeLessThanOrEqual(
          upper[i].theta + resolution);
        expect(measured[i].x).toBeGreaterThanOrEqual(lower[i].x - 1e-12);
        expect(measured[i].x).toBeLessThanOrEqual(upper[i].x + 1e-12);
      }
    }, 180_000);

  it("run detail shows visibly smaller residual swing for zv than trapezoid",
    async () => {
      // same target, both modes; compare the tail of the measured traces
      // the chart renders (data comes straight from the gateway)
      async function tailPeak(runId: string): Promise<number> {
        clickRunRow(runId);
        await waitFor(() => app.vm.selected?.record.run_id === runId
          && app.vm.selected.measured !== null, `detail for ${runId}`);
        const samples = app.vm.selected!.measured!.samples;
        const tEnd = samples[samples.length - 1].t;
        return Math.max(...samples
          .filter((s) => s.t > tEnd - 1.0)
          .map((s) => Math.abs(s.theta)));
      }

      const trapRun = await moveAndAwaitVerdict(0.45, "trap");
      const zvRun = await moveAndAwaitVerdict(0.05, "zv");
      const trapPeak = await tailPeak(trapRun);
      const zvPeak = await tailPeak(zvRun);
      expect(trapPeak).toBeGreaterThan(5 * zvPeak);
    }, 180_000);

  it("disables motion controls while busy and surfaces conflicts inline",
    async () => {
      const moveBtn = el<HTMLButtonElement>("btn-move");
      await waitFor(() => !moveBtn.disabled, "move button enabled");
      el<HTMLInputElement>("move-x").value = "0.1";
      moveBtn.click();
      await waitFor(() => app.vm.status?.busy === true, "busy status");
      expect(moveBtn.disabled).toBe(true);
      expect(el<HTMLButtonElement>("btn-hoist").disabled).toBe(true);
      expect(el<HTMLButtonElement>("btn-home").disabled).toBe(true);

      // bypass the disabled button deliberately: the gateway 409 must land
      // in the inline error box, and no duplicate run may appear
      const runCount = app.vm.runs.length;
      await app.vm.command(() => app.vm.api.move(0.3, "zv"));
      expect(app.vm.lastError ?? "").toContain("conflict");
      expect(el("control-error").style.display).toBe("block");

      await waitFor(() => app.vm.status?.busy === false, "run finished");
      await app.vm.refreshRuns();
      const extra = app.vm.runs.length - runCount;
      expect(extra).toBeLessThanOrEqual(1); // only the legitimate run
    }, 180_000);

  it("fault run raises a persistent banner alert and highlights the failed "
    + "metric row", async () => {
      el<HTMLInputElement>("fault-damping").value = "1.5";
      el<HTMLButtonElement>("btn-fault-inject").click();
      await waitFor(() => app.vm.status?.fault_active === true,
        "fault active");

      const runId = await moveAndAwaitVerdict(0.4);
      const run = app.vm.runs.find((r) => r.run_id === runId)!;
      expect(run.overall_pass).toBe(false);

      // banner alert arrived over the stream and persists until acknowledged
      await waitFor(() => app.vm.alerts.some((a) => a.runId === runId),
        "alert banner");
      const banner = document.querySelector(".alert-banner")!;
      expect(banner.textContent).toContain("VALIDATION ALERT");
      app.vm.notify(); // re-render: banner must persist
      expect(document.querySelector(".alert-banner")).toBeTruthy();

      clickRunRow(runId);
      await waitFor(() => app.vm.selected?.record.run_id === runId
        && app.vm.selected.report !== null, "fault run detail");
      expect(el("run-verdict").textContent).toContain("FAIL");
      const failedRows = Array.from(
        document.querySelectorAll("#validation-table tr.metric-failed"));
      expect(failedRows.length).toBeGreaterThanOrEqual(1);
      const texts = failedRows.map((r) => r.textContent ?? "");
      expect(texts.some((t) => t.includes("theta") && t.includes("rmse")))
        .toBe(true);

      // acknowledging removes the banner
      (document.querySelector(".alert-banner .ack") as HTMLElement).click();
      expect(document.querySelectorAll(".alert-banner").length).toBe(0);

      el<HTMLButtonElement>("btn-fault-clear").click();
      await waitFor(() => app.vm.status?.fault_active === false,
        "fault cleared");
    }, 180_000);
});

describe("settings", () => {
  it("blocks invalid decimation client-side without calling the gateway",
    async () => {
      await waitFor(() => app.vm.config !== null, "config loaded");
      const before = (await api("/api/config")).logger.writeout_decimation;
      el<HTMLInputElement>("cfg-decimation").value = "0";
      el<HTMLButtonElement>("btn-apply-config").click();
      await waitFor(() =>
        (el("settings-status").textContent ?? "").includes("not applied"),
        "client-side rejection");
      const after = (await api("/api/config")).logger.writeout_decimation;
      expect(after).toBe(before); // nothing was sent
    }, 60_000);

  it("applies decimation and threshold edits; both show up in the next run",
    async () => {
      await waitFor(() => app.vm.config !== null, "config loaded");
      el<HTMLInputElement>("cfg-decimation").value = "10";
      el<HTMLInputElement>("thr-theta-rmse").value = "0.5";
      el<HTMLButtonElement>("btn-apply-config").click();
      await waitFor(() =>
        (el("settings-status").textContent ?? "") === "applied",
        "config applied");
      expect((await api("/api/config")).logger.writeout_decimation).toBe(10);

      const runId = await moveAndAwaitVerdict(0.2);
      clickRunRow(runId);
      await waitFor(() => app.vm.selected?.record.run_id === runId
        && app.vm.selected.report !== null, "run detail");

      const report = app.vm.selected!.report!;
      const thetaRmse = report.results.find(
        (r) => r.signal === "theta" && r.metric === "rmse")!;
      expect(thetaRmse.threshold).toBe(0.5);

      // decimation 10: measured keeps ~1/10 of the simulated sample count
      const measured = app.vm.selected!.measured!.samples.length;
      const simulated = app.vm.selected!.simulated!.samples.length;
      expect(measured).toBeGreaterThan(0);
      expect(measured).toBeLessThanOrEqual(Math.ceil(simulated / 10) + 1);
      expect(measured).toBeGreaterThanOrEqual(Math.floor(simulated / 10) - 1);

      // restore
      el<HTMLInputElement>("cfg-decimation").value = "1";
      el<HTMLButtonElement>("btn-apply-config").click();
      await waitFor(() =>
        (el("settings-status").textContent ?? "") === "applied",
        "config restored");
    }, 180_000);
});

describe("live view", () => {
  it("heartbeats keep the stale indicator off while idle", async () => {
    await waitFor(() => app.vm.status?.busy === false, "idle crane");
    await new Promise((r) => setTimeout(r, 2500));
    expect(app.vm.stale).toBe(false);
    expect(el("stale-indicator").style.display).toBe("none");
  }, 60_000);

  it("stream state events advance the live chart during a run", async () => {
    // liveStates is a capped rolling window; measure progress by sim time
    const lastT = () =>
      app.vm.liveStates[app.vm.liveStates.length - 1]?.state.t ?? -1;
    const before = lastT();
    await moveAndAwaitVerdict(0.3);
    expect(app.vm.liveStates.length).toBeGreaterThan(10);
    expect(lastT()).toBeGreaterThan(before + 1.0); // run spans seconds
    const gauge = el("gauge-x").textContent ?? "";
    expect(gauge).not.toBe("--");
  }, 180_000);
});
