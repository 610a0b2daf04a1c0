// Central application state. Every value here traces back to a gateway
// response; panels subscribe and re-render on change.

import {
  ApiError,
  ConfigDto,
  GatewayClient,
  RunDto,
  StatusDto,
  TraceDto,
  ValidationReportDto,
} from "./api";
import { AlertEvent, StateEvent } from "./stream";

export interface SelectedRun {
  record: RunDto;
  measured: TraceDto | null;
  simulated: TraceDto | null;
  envelopeLower: TraceDto | null;
  envelopeUpper: TraceDto | null;
  report: ValidationReportDto | null;
}

export interface Alert {
  runId: string;
  message: string;
  at: number;
}

type Listener = () => void;

export class ViewModel {
  status: StatusDto | null = null;
  runs: RunDto[] = [];
  selected: SelectedRun | null = null;
  alerts: Alert[] = [];
  config: ConfigDto | null = null;
  stale = false;
  lastError: string | null = null;
  liveStates: StateEvent[] = [];
  private listeners: Listener[] = [];
  private liveLimit = 600;
  private renderTimer: ReturnType<typeof setTimeout> | null = null;

  constructor(public api: GatewayClient) {}

  subscribe(listener: Listener): void {
    this.listeners.push(listener);
  }

  notify(): void {
    for (const fn of this.listeners) fn();
  }

  // -- stream feed ----------------------------------------------------------

  pushState(event: StateEvent): void {
    this.liveStates.push(event);
    if (this.liveStates.length > this.liveLimit) {
      this.liveStates.splice(0, this.liveStates.length - this.liveLimit);
    }
    // state events can arrive far faster than a display frame; coalesce
    // re-renders instead of redrawing per event
    if (this.renderTimer === null) {
      this.renderTimer = setTimeout(() => {
        this.renderTimer = null;
        this.notify();
      }, 50);
    }
  }

  pushAlert(event: AlertEvent): void {
    this.alerts.push({ runId: event.run_id, message: event.message, at: Date.now() });
    this.notify();
    void this.refreshRuns();
  }

  acknowledgeAlert(index: number): void {
    this.alerts.splice(index, 1);
    this.notify();
  }

  setStale(stale: boolean): void {
    if (this.stale !== stale) {
      this.stale = stale;
      this.notify();
    }
  }

  // -- fetch actions ---------------------------------------------------------

  async refreshStatus(): Promise<void> {
    try {
      this.status = await this.api.status();
      this.lastError = null;
    } catch (err) {
      this.lastError = String(err);
    }
    this.notify();
  }

  async refreshRuns(): Promise<void> {
    try {
      this.runs = await this.api.runs();
      this.notify();
    } catch {
      // transient; next poll retries
    }
  }

  async refreshConfig(): Promise<void> {
    this.config = await this.api.config();
    this.notify();
  }

  async selectRun(runId: string): Promise<void> {
    const record = await this.api.run(runId);
    const fetchOrNull = (kind: string) =>
      this.api.trace(runId, kind).catch(() => null);
    const [measured, simulated, envelopeLower, envelopeUpper] = await Promise.all([
      fetchOrNull("measured"),
      fetchOrNull("simulated"),
      fetchOrNull("envelope_lower"),
      fetchOrNull("envelope_upper"),
    ]);
    const report = await this.api.validation(runId).catch(() => null);
    this.selected = { record, measured, simulated, envelopeLower, envelopeUpper, report };
    this.notify();
  }

  // -- commands (errors surface inline, never thrown at callers) -------------

  async command(action: () => Promise<unknown>): Promise<boolean> {
    try {
      await action();
      this.lastError = null;
      await this.refreshStatus();
      void this.refreshRuns();
      return true;
    } catch (err) {
      this.lastError = err instanceof ApiError ? `${err.code}: ${err.message}` : String(err);
      this.notify();
      return false;
    }
  }
}
