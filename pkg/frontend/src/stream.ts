// Server-sent-events subscription to /api/stream with reconnect and a
// staleness watchdog (heartbeats keep the indicator off while idle).

export interface StateEvent {
  run_id: string | null;
  state: import("./api").CraneStateDto;
}

export interface AlertEvent {
  run_id: string;
  failed: string[];
  message: string;
}

export interface StreamHandlers {
  onState?(event: StateEvent): void;
  onAlert?(event: AlertEvent): void;
  onStale?(stale: boolean): void;
}

interface EventSourceLike {
  addEventListener(type: string, listener: (ev: MessageEvent) => void): void;
  close(): void;
  onerror: ((ev: unknown) => void) | null;
}

type EventSourceCtor = new (url: string) => EventSourceLike;

export class StreamConnection {
  private source: EventSourceLike | null = null;
  private watchdog: ReturnType<typeof setTimeout> | null = null;
  private reconnectDelay = 500;
  private closed = false;

  constructor(
    private url: string,
    private handlers: StreamHandlers,
    private staleAfterMs = 12_000,
  ) {}

  connect(): void {
    const Ctor = (globalThis as { EventSource?: EventSourceCtor }).EventSource;
    if (!Ctor) {
      throw new Error("EventSource is not available in this environment");
    }
    const source = new Ctor(this.url);
    this.source = source;
    for (const type of ["state", "alert", "heartbeat"]) {
      source.addEventListener(type, (ev) => this.onEvent(type, ev));
    }
    source.onerror = () => this.scheduleReconnect();
    this.feedWatchdog();
  }

  close(): void {
    this.closed = true;
    this.source?.close();
    if (this.watchdog) clearTimeout(this.watchdog);
  }

  private onEvent(type: string, ev: MessageEvent): void {
    this.feedWatchdog();
    this.reconnectDelay = 500;
    if (type === "heartbeat") return;
    const data = JSON.parse(String(ev.data));
    if (type === "state") this.handlers.onState?.(data as StateEvent);
    else if (type === "alert") this.handlers.onAlert?.(data as AlertEvent);
  }

  private feedWatchdog(): void {
    this.handlers.onStale?.(false);
    if (this.watchdog) clearTimeout(this.watchdog);
    this.watchdog = setTimeout(() => {
      this.handlers.onStale?.(true);
    }, this.staleAfterMs);
  }

  private scheduleReconnect(): void {
    if (this.closed) return;
    this.source?.close();
    this.handlers.onStale?.(true);
    const delay = this.reconnectDelay;
    this.reconnectDelay = Math.min(this.reconnectDelay * 1.5, 10_000);
    setTimeout(() => {
      if (!this.closed) this.connect();
    }, delay);
  }
}
