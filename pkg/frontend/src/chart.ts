// Canvas time-series chart with an optional shaded min/max band.
// Rendering degrades to a no-op where no 2D context exists (headless tests);
// the assigned series stay inspectable either way. Axis scaling is the only
// arithmetic done client-side.

export interface Series {
  label: string;
  t: number[];
  y: number[];
  color: string;
}

export interface Band {
  t: number[];
  lower: number[];
  upper: number[];
  color: string;
}

const MAX_POINTS = 10_000;

function decimate(t: number[], y: number[]): [number[], number[]] {
  if (t.length <= MAX_POINTS) return [t, y];
  const stride = Math.ceil(t.length / MAX_POINTS);
  const td: number[] = [];
  const yd: number[] = [];
  for (let i = 0; i < t.length; i += stride) {
    td.push(t[i]);
    yd.push(y[i]);
  }
  return [td, yd];
}

export class StripChart {
  series: Series[] = [];
  band: Band | null = null;
  private ctx: CanvasRenderingContext2D | null;

  constructor(private canvas: HTMLCanvasElement) {
    this.ctx = canvas.getContext ? canvas.getContext("2d") : null;
  }

  setData(series: Series[], band: Band | null = null): void {
    this.series = series;
    this.band = band;
    this.draw();
  }

  hasBand(): boolean {
    return this.band !== null && this.band.t.length > 0;
  }

  private extent(): { t0: number; t1: number; y0: number; y1: number } {
    let t0 = Infinity, t1 = -Infinity, y0 = Infinity, y1 = -Infinity;
    const consider = (ts: number[], ys: number[]) => {
      for (let i = 0; i < ts.length; i++) {
        if (ts[i] < t0) t0 = ts[i];
        if (ts[i] > t1) t1 = ts[i];
        if (ys[i] < y0) y0 = ys[i];
        if (ys[i] > y1) y1 = ys[i];
      }
    };
    for (const s of this.series) consider(s.t, s.y);
    if (this.band) {
      consider(this.band.t, this.band.lower);
      consider(this.band.t, this.band.upper);
    }
    if (!isFinite(t0)) return { t0: 0, t1: 1, y0: 0, y1: 1 };
    if (t1 === t0) t1 = t0 + 1;
    if (y1 === y0) {
      y0 -= 0.5;
      y1 += 0.5;
    }
    const pad = (y1 - y0) * 0.08;
    return { t0, t1, y0: y0 - pad, y1: y1 + pad };
  }

  draw(): void {
    const ctx = this.ctx;
    if (!ctx) return;
    const { width, height } = this.canvas;
    const { t0, t1, y0, y1 } = this.extent();
    const px = (t: number) => ((t - t0) / (t1 - t0)) * width;
    const py = (y: number) => height - ((y - y0) / (y1 - y0)) * height;

    ctx.clearRect(0, 0, width, height);
    ctx.fillStyle = "#10141c";
    ctx.fillRect(0, 0, width, height);

    ctx.strokeStyle = "#2a3242";
    ctx.lineWidth = 1;
    for (let g = 1; g < 5; g++) {
      const y = (height / 5) * g;
      ctx.beginPath();
      ctx.moveTo(0, y);
      ctx.lineTo(width, y);
      ctx.stroke();
    }

    if (this.band) {
      const [t, lo] = decimate(this.band.t, this.band.lower);
      const [, hi] = decimate(this.band.t, this.band.upper);
      ctx.beginPath();
      ctx.moveTo(px(t[0]), py(lo[0]));
      for (let i = 1; i < t.length; i++) ctx.lineTo(px(t[i]), py(lo[i]));
      for (let i = t.length - 1; i >= 0; i--) ctx.lineTo(px(t[i]), py(hi[i]));
      ctx.closePath();
      ctx.fillStyle = this.band.color;
      ctx.fill();
    }

    for (const s of this.series) {
      const [t, y] = decimate(s.t, s.y);
      if (t.length === 0) continue;
      ctx.beginPath();
      ctx.moveTo(px(t[0]), py(y[0]));
      for (let i = 1; i < t.length; i++) ctx.lineTo(px(t[i]), py(y[i]));
      ctx.strokeStyle = s.color;
      ctx.lineWidth = 1.5;
      ctx.stroke();
    }
  }
}
