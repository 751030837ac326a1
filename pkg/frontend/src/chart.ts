// Scrolling strip chart of the three zone temperatures and the skin
// estimate, drawn directly on a canvas.

export interface Sample {
  at: number; // ms timestamp
  zones: [number, number, number];
  skin: number;
}

const ZONE_COLORS = ["#e05d44", "#dfa31d", "#3f8cc8"];
const SKIN_COLOR = "#7a4ea3";
const WINDOW_MS = 120_000;

export class StripChart {
  private samples: Sample[] = [];

  constructor(private canvas: HTMLCanvasElement) {}

  push(sample: Sample) {
    this.samples.push(sample);
    const cutoff = sample.at - WINDOW_MS;
    while (this.samples.length && this.samples[0].at < cutoff) {
      this.samples.shift();
    }
    this.draw();
  }

  clear() {
    this.samples = [];
    this.draw();
  }

  get size(): number {
    return this.samples.length;
  }

  /** Visible y-range with a little headroom, never narrower than 5 degC. */
  range(): [number, number] {
    let lo = Infinity;
    let hi = -Infinity;
    for (const s of this.samples) {
      for (const v of [...s.zones, s.skin]) {
        lo = Math.min(lo, v);
        hi = Math.max(hi, v);
      }
    }
    if (!this.samples.length) return [25, 60];
    const pad = Math.max(1, (hi - lo) * 0.1);
    lo -= pad;
    hi += pad;
    if (hi - lo < 5) {
      const mid = (hi + lo) / 2;
      return [mid - 2.5, mid + 2.5];
    }
    return [lo, hi];
  }

  private draw() {
    const ctx = this.canvas.getContext("2d");
    if (!ctx) return;
    const { width, height } = this.canvas;
    ctx.clearRect(0, 0, width, height);
    if (this.samples.length < 2) return;

    const [lo, hi] = this.range();
    const t1 = this.samples[this.samples.length - 1].at;
    const t0 = t1 - WINDOW_MS;
    const x = (at: number) => ((at - t0) / WINDOW_MS) * width;
    const y = (v: number) => height - ((v - lo) / (hi - lo)) * height;

    ctx.strokeStyle = "#ccc";
    ctx.setLineDash([4, 4]);
    for (const line of [40, 45, 50, 55]) {
      if (line < lo || line > hi) continue;
      ctx.beginPath();
      ctx.moveTo(0, y(line));
      ctx.lineTo(width, y(line));
      ctx.stroke();
      ctx.fillStyle = "#999";
      ctx.fillText(`${line}°`, 4, y(line) - 3);
    }
    ctx.setLineDash([]);

    const series = (pick: (s: Sample) => number, color: string) => {
      ctx.strokeStyle = color;
      ctx.lineWidth = 1.5;
      ctx.beginPath();
      this.samples.forEach((s, i) => {
        if (i === 0) ctx.moveTo(x(s.at), y(pick(s)));
        else ctx.lineTo(x(s.at), y(pick(s)));
      });
      ctx.stroke();
    };
    for (let z = 0; z < 3; z++) {
      series((s) => s.zones[z], ZONE_COLORS[z]);
    }
    series((s) => s.skin, SKIN_COLOR);
  }
}
