// Typed client for the crane twin gateway. The HMI never derives physics or
// metric values itself: everything rendered comes from these endpoints.

export interface CraneStateDto {
  t: number;
  x: number;
  v: number;
  l: number;
  l_dot: number;
  theta: number;
  theta_dot: number;
  wind: number;
  magnet_on: boolean;
}

export interface StatusDto {
  state: CraneStateDto;
  homed: boolean;
  busy: boolean;
  fault_active: boolean;
}

export interface RunDto {
  run_id: string;
  trajectory_id: string;
  mode: string;
  started_at: number;
  completed_at: number | null;
  status: string;
  fault_active: boolean;
  overall_pass?: boolean | null;
}

export interface RunHandleDto {
  run_id: string;
  trajectory_id: string;
  started_at: number;
  status: string;
}

export interface TraceDto {
  run_id: string;
  kind: string;
  dt: number;
  samples: CraneStateDto[];
}

export interface MetricResultDto {
  signal: string;
  metric: string;
  value: number;
  threshold: number;
  pass: boolean;
}

export interface ValidationReportDto {
  run_id: string;
  created_at: number;
  results: MetricResultDto[];
  overall_pass: boolean;
  notes: string;
}

export interface LoggerConfigDto {
  writeout_decimation: number;
  buffer_flush_period: number;
}

export interface EnvelopeConfigDto {
  ensemble_size: number;
  perturbation: number;
  perturbed_parameters: string[];
  seed: number;
}

export type ThresholdsDto = Record<string, Record<string, number>>;

export interface ConfigDto {
  logger: LoggerConfigDto;
  thresholds: ThresholdsDto | null;
  envelope: EnvelopeConfigDto;
  [key: string]: unknown;
}

export interface FaultDto {
  damping_scale: number;
  rope_length_offset: number;
  encoder_bias_extra: number;
  active: boolean;
}

export class ApiError extends Error {
  constructor(
    public status: number,
    public code: string,
    message: string,
  ) {
    super(message);
  }
}

export class GatewayClient {
  constructor(private base: string = "") {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const init: RequestInit = { method };
    if (body !== undefined) {
      init.body = JSON.stringify(body);
      init.headers = { "Content-Type": "application/json" };
    }
    let response: Response;
    try {
      response = await fetch(this.base + path, init);
    } catch (err) {
      throw new ApiError(0, "unreachable", `gateway unreachable: ${err}`);
    }
    const payload = await response.json().catch(() => ({}));
    if (!response.ok) {
      throw new ApiError(
        response.status,
        (payload as { code?: string }).code ?? "internal",
        (payload as { message?: string }).message ?? `HTTP ${response.status}`,
      );
    }
    return payload as T;
  }

  status(): Promise<StatusDto> {
    return this.request("GET", "/api/status");
  }

  move(targetX: number, mode: "zv" | "trap"): Promise<RunHandleDto> {
    return this.request("POST", "/api/move", { target_x: targetX, mode });
  }

  hoist(targetL: number): Promise<RunHandleDto> {
    return this.request("POST", "/api/hoist", { target_l: targetL });
  }

  home(): Promise<void> {
    return this.request("POST", "/api/home");
  }

  zero(): Promise<void> {
    return this.request("POST", "/api/zero");
  }

  magnet(on: boolean): Promise<void> {
    return this.request("POST", "/api/magnet", { on });
  }

  injectFault(fault: Partial<FaultDto>): Promise<void> {
    return this.request("POST", "/api/faults", { ...fault, active: true });
  }

  clearFault(): Promise<void> {
    return this.request("POST", "/api/faults", { clear: true });
  }

  runs(): Promise<RunDto[]> {
    return this.request<{ runs: RunDto[] }>("GET", "/api/runs").then((r) => r.runs);
  }

  run(runId: string): Promise<RunDto> {
    return this.request("GET", `/api/runs/${runId}`);
  }

  trace(runId: string, kind: string): Promise<TraceDto> {
    return this.request("GET", `/api/runs/${runId}/trace?kind=${kind}`);
  }

  validation(runId: string): Promise<ValidationReportDto> {
    return this.request("GET", `/api/runs/${runId}/validation`);
  }

  config(): Promise<ConfigDto> {
    return this.request("GET", "/api/config");
  }

  putConfig(update: Partial<ConfigDto>): Promise<ConfigDto> {
    return this.request("PUT", "/api/config", update);
  }
}
