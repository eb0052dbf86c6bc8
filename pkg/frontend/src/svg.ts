/**
 * Deterministic SVG figure building.
 *
 * Pure string assembly with fixed-precision coordinates: the same inputs
 * always produce byte-identical output.  Only rendering lives here; every
 * physical number drawn by the plot layer comes from a summary document.
 */

export interface Frame {
  width: number;
  height: number;
  left: number;
  right: number;
  top: number;
  bottom: number;
}

export const DEFAULT_FRAME: Frame = {
  width: 720,
  height: 480,
  left: 80,
  right: 30,
  top: 44,
  bottom: 58,
};

export type Scale = (value: number) => number;

function px(v: number): string {
  const r = v.toFixed(2);
  return r === "-0.00" ? "0.00" : r;
}

export function linearScale(lo: number, hi: number, outLo: number, outHi: number): Scale {
  const span = hi - lo || 1;
  return (v: number) => outLo + ((v - lo) / span) * (outHi - outLo);
}

export function log10Scale(lo: number, hi: number, outLo: number, outHi: number): Scale {
  const llo = Math.log10(lo);
  const lhi = Math.log10(hi);
  const inner = linearScale(llo, lhi, outLo, outHi);
  return (v: number) => inner(Math.log10(v));
}

/** Round tick positions for a linear axis: a handful of even steps. */
export function linearTicks(lo: number, hi: number, count = 5): number[] {
  const span = hi - lo || 1;
  const rawStep = span / count;
  const mag = Math.pow(10, Math.floor(Math.log10(rawStep)));
  const step = [1, 2, 5, 10].map((m) => m * mag).find((s) => span / s <= count + 1) ?? mag * 10;
  const first = Math.ceil(lo / step) * step;
  const ticks: number[] = [];
  for (let v = first; v <= hi + 1e-12 * span; v += step) ticks.push(Number(v.toPrecision(12)));
  return ticks;
}

/** Decade ticks for a log axis. */
export function decadeTicks(lo: number, hi: number): number[] {
  const ticks: number[] = [];
  for (let e = Math.ceil(Math.log10(lo) - 1e-9); e <= Math.log10(hi) + 1e-9; e++) {
    ticks.push(Math.pow(10, e));
  }
  return ticks;
}

export function formatTick(v: number): string {
  if (v === 0) return "0";
  const ae = Math.abs(v) >= 1e-4 && Math.abs(v) < 1e5;
  if (ae) {
    return String(Number(v.toPrecision(6)));
  }
  const e = Math.floor(Math.log10(Math.abs(v)));
  const m = v / Math.pow(10, e);
  const ms = Number(m.toPrecision(6));
  return ms === 1 ? `1e${e}` : `${ms}e${e}`;
}

export class Figure {
  private parts: string[] = [];
  constructor(public frame: Frame = DEFAULT_FRAME) {}

  raw(fragment: string): void {
    this.parts.push(fragment);
  }

  text(x: number, y: number, s: string, attrs = ""): void {
    this.parts.push(`<text x="${px(x)}" y="${px(y)}" ${attrs}>${escapeXml(s)}</text>`);
  }

  line(x1: number, y1: number, x2: number, y2: number, attrs: string): void {
    this.parts.push(
      `<line x1="${px(x1)}" y1="${px(y1)}" x2="${px(x2)}" y2="${px(y2)}" ${attrs}/>`,
    );
  }

  circle(x: number, y: number, r: number, attrs: string): void {
    this.parts.push(`<circle cx="${px(x)}" cy="${px(y)}" r="${px(r)}" ${attrs}/>`);
  }

  rect(x: number, y: number, w: number, h: number, attrs: string): void {
    this.parts.push(
      `<rect x="${px(x)}" y="${px(y)}" width="${px(w)}" height="${px(h)}" ${attrs}/>`,
    );
  }

  polyline(points: Array<[number, number]>, attrs: string): void {
    const pts = points.map(([x, y]) => `${px(x)},${px(y)}`).join(" ");
    this.parts.push(`<polyline points="${pts}" ${attrs}/>`);
  }

  title(s: string): void {
    this.text(this.frame.width / 2, 24, s, 'text-anchor="middle" font-size="16"');
  }

  xLabel(s: string): void {
    this.text(
      (this.frame.left + this.frame.width - this.frame.right) / 2,
      this.frame.height - 14,
      s,
      'text-anchor="middle" font-size="13"',
    );
  }

  yLabel(s: string): void {
    const x = 20;
    const y = (this.frame.top + this.frame.height - this.frame.bottom) / 2;
    this.parts.push(
      `<text x="${px(x)}" y="${px(y)}" text-anchor="middle" font-size="13" ` +
        `transform="rotate(-90 ${px(x)} ${px(y)})">${escapeXml(s)}</text>`,
    );
  }

  axes(): void {
    const f = this.frame;
    this.line(f.left, f.top, f.left, f.height - f.bottom, 'stroke="black" stroke-width="1"');
    this.line(
      f.left,
      f.height - f.bottom,
      f.width - f.right,
      f.height - f.bottom,
      'stroke="black" stroke-width="1"',
    );
  }

  xTick(xPix: number, label: string): void {
    const y = this.frame.height - this.frame.bottom;
    this.line(xPix, y, xPix, y + 5, 'stroke="black" stroke-width="1"');
    this.text(xPix, y + 18, label, 'text-anchor="middle" font-size="11"');
  }

  yTick(yPix: number, label: string): void {
    const x = this.frame.left;
    this.line(x - 5, yPix, x, yPix, 'stroke="black" stroke-width="1"');
    this.text(x - 8, yPix + 4, label, 'text-anchor="end" font-size="11"');
  }

  render(): string {
    const f = this.frame;
    return (
      `<svg xmlns="http://www.w3.org/2000/svg" width="${f.width}" height="${f.height}" ` +
      `viewBox="0 0 ${f.width} ${f.height}" font-family="sans-serif">\n` +
      `<rect x="0" y="0" width="${f.width}" height="${f.height}" fill="white"/>\n` +
      this.parts.join("\n") +
      "\n</svg>\n"
    );
  }
}

export function escapeXml(s: string): string {
  return s
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

/** Map a unit value in [0, 1] to a blue-to-red hex color (fixed palette). */
export function heatColor(unit: number): string {
  const t = Math.min(1, Math.max(0, unit));
  const r = Math.round(40 + 215 * t);
  const g = Math.round(60 + 40 * (1 - Math.abs(t - 0.5) * 2));
  const b = Math.round(255 - 215 * t);
  const hex = (n: number) => n.toString(16).padStart(2, "0");
  return `#${hex(r)}${hex(g)}${hex(b)}`;
}
