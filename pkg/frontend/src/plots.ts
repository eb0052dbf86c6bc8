/**
 * Figure builders over verified run artifacts.
 *
 * The plotter is read-only: every annotated number is the JSON rendering of a
 * value found in a summary document (JSON.stringify of a parsed JSON number
 * reproduces the producer's shortest-round-trip text).  Key marks carry
 * data-* attributes with those same strings so downstream checks can trace
 * them without parsing pixel coordinates.
 */

import {
  DataError,
  RunArtifacts,
  VisibilityBlock,
} from "./artifacts.js";
import {
  DEFAULT_FRAME,
  Figure,
  decadeTicks,
  formatTick,
  heatColor,
  linearScale,
  linearTicks,
  log10Scale,
} from "./svg.js";

function num(v: number): string {
  return JSON.stringify(v);
}

/** Log-scale coherence decay with the producer's fitted exponential. */
export function plotDecay(artifacts: RunArtifacts, pair?: [number, number]): string {
  const fitted = artifacts.summary.decay_fit;
  const p = pair ?? fitted?.pair;
  if (!p) {
    throw new DataError("no coherence pair: pass one or run a scenario with a decay_fit analysis");
  }
  const colBase = `coherence_${p[0]}_${p[1]}`;
  const times = artifacts.series.column("time");
  const values = artifacts.series.column(`${colBase}_abs`);

  const fig = new Figure();
  const f = DEFAULT_FRAME;
  const tLo = times[0];
  const tHi = times[times.length - 1];
  const positive = values.filter((v) => v > 0);
  if (positive.length === 0) {
    throw new DataError("coherence series is identically zero; nothing to draw on a log scale");
  }
  const vLo = Math.min(...positive);
  const vHi = Math.max(...positive);
  const x = linearScale(tLo, tHi, f.left, f.width - f.right);
  const y = log10Scale(Math.min(vLo, vHi / 10), vHi * 1.1, f.height - f.bottom, f.top);

  fig.title(`coherence |rho_${p[0]}${p[1]}| (${artifacts.summary.scenario})`);
  fig.axes();
  for (const t of linearTicks(tLo, tHi)) fig.xTick(x(t), formatTick(t));
  for (const v of decadeTicks(Math.min(vLo, vHi / 10), vHi * 1.1)) fig.yTick(y(v), formatTick(v));
  fig.xLabel("time (internal units)");
  fig.yLabel("|coherence| (log scale)");

  const pts: Array<[number, number]> = [];
  for (let i = 0; i < times.length; i++) {
    if (values[i] > 0) pts.push([x(times[i]), y(values[i])]);
  }
  fig.polyline(pts, 'fill="none" stroke="#1f4e9c" stroke-width="1.5" data-role="series"');

  if (fitted && !fitted.failed && !fitted.no_decay) {
    const [w0, w1] = fitted.window;
    const line: Array<[number, number]> = [
      [x(w0), y(Math.exp(fitted.log_intercept - fitted.rate * w0))],
      [x(w1), y(Math.exp(fitted.log_intercept - fitted.rate * w1))],
    ];
    fig.polyline(
      line,
      `fill="none" stroke="#c23b21" stroke-width="1.5" stroke-dasharray="6,3" ` +
        `data-role="fit" data-rate="${num(fitted.rate)}"`,
    );
    fig.text(
      f.left + 12,
      f.top + 16,
      `fitted rate = ${num(fitted.rate)} (se ${num(fitted.rate_se)})`,
      'font-size="12" fill="#c23b21" data-role="rate-annotation"',
    );
  } else {
    fig.text(
      f.left + 12,
      f.top + 16,
      "no decay",
      'font-size="12" fill="#444" data-role="rate-annotation"',
    );
  }
  return fig.render();
}

/** Outcome frequencies with 3 SE whiskers and the squared initial weights. */
export function plotBorn(artifacts: RunArtifacts): string {
  const born = artifacts.summary.born;
  if (!born || !Array.isArray(born.frequencies)) {
    throw new DataError("summary has no outcome-frequency block; run with analysis.born");
  }
  const n = born.frequencies.length;
  const fig = new Figure();
  const f = DEFAULT_FRAME;
  const yMax = Math.max(...born.frequencies, ...born.expected_weights) * 1.25;
  const y = linearScale(0, yMax, f.height - f.bottom, f.top);
  const x = linearScale(-0.6, n - 0.4, f.left, f.width - f.right);

  fig.title(`collapse outcome frequencies (${artifacts.summary.scenario})`);
  fig.axes();
  for (const v of linearTicks(0, yMax)) fig.yTick(y(v), formatTick(v));
  fig.xLabel("outcome");
  fig.yLabel("frequency");

  for (let k = 0; k < n; k++) {
    const freq = born.frequencies[k];
    const se = born.standard_errors[k];
    const x0 = x(k - 0.3);
    const w = x(k + 0.3) - x0;
    fig.rect(
      x0,
      y(freq),
      w,
      y(0) - y(freq),
      `fill="#4878b0" data-role="bar" data-outcome="${k}" data-frequency="${num(freq)}"`,
    );
    const cx = x(k);
    fig.line(cx, y(freq - 3 * se), cx, y(freq + 3 * se), 'stroke="black" stroke-width="1.2"');
    fig.line(
      x(k - 0.35),
      y(born.expected_weights[k]),
      x(k + 0.35),
      y(born.expected_weights[k]),
      `stroke="#c23b21" stroke-width="1.5" stroke-dasharray="4,3" data-role="expected" ` +
        `data-outcome="${k}" data-weight="${num(born.expected_weights[k])}"`,
    );
    fig.text(cx, y(freq) - 6, num(freq), 'text-anchor="middle" font-size="11" data-role="bar-label"');
    fig.xTick(cx, String(k));
  }
  fig.text(
    f.width - f.right - 8,
    f.top + 16,
    `resolved fraction ${num(born.resolved_fraction)}`,
    'text-anchor="end" font-size="12" data-role="resolved-annotation"',
  );
  return fig.render();
}

interface ThresholdPoint {
  ratio: number;
  rateOverBase: number;
  predictedOverBase: number;
}

/** Fitted decay rate versus separation, with the producer's reference rates. */
export function plotThreshold(runs: RunArtifacts[]): string {
  const pts: ThresholdPoint[] = [];
  for (const run of runs) {
    const fit = run.summary.decay_fit;
    if (!fit || fit.failed) continue;
    const params = run.summary.params;
    if (!params || !(params.rate > 0)) {
      throw new DataError(`${run.directory}: summary lacks a positive collapse rate`);
    }
    const sep = fit.separations?.[0];
    if (sep === undefined) {
      throw new DataError(`${run.directory}: decay_fit carries no branch separation`);
    }
    pts.push({
      ratio: sep / params.correlation_length,
      rateOverBase: fit.rate / params.rate,
      predictedOverBase: fit.predicted_rate / params.rate,
    });
  }
  if (pts.length < 2) {
    throw new DataError("threshold plot needs at least two runs with decay fits");
  }
  pts.sort((a, b) => a.ratio - b.ratio);

  const fig = new Figure();
  const f = DEFAULT_FRAME;
  const rLo = pts[0].ratio;
  const rHi = pts[pts.length - 1].ratio;
  const x = log10Scale(rLo / 1.5, rHi * 1.5, f.left, f.width - f.right);
  const y = linearScale(0, 1.15, f.height - f.bottom, f.top);

  fig.title("coherence decay rate across the correlation-length threshold");
  fig.axes();
  for (const t of decadeTicks(rLo / 1.5, rHi * 1.5)) fig.xTick(x(t), formatTick(t));
  for (const t of [0, 0.25, 0.5, 0.75, 1.0]) fig.yTick(y(t), formatTick(t));
  fig.xLabel("separation / correlation length");
  fig.yLabel("rate / per-constituent rate");

  fig.polyline(
    pts.map((p) => [x(p.ratio), y(p.predictedOverBase)]),
    'fill="none" stroke="#c23b21" stroke-width="1.5" stroke-dasharray="6,3" data-role="reference"',
  );
  for (const p of pts) {
    fig.circle(
      x(p.ratio),
      y(p.rateOverBase),
      4,
      `fill="#1f4e9c" data-role="point" data-ratio="${num(p.ratio)}" ` +
        `data-rate="${num(p.rateOverBase)}"`,
    );
  }
  fig.text(
    f.left + 12,
    f.top + 16,
    "dashed: producer reference rate",
    'font-size="12" fill="#c23b21"',
  );
  return fig.render();
}

/** Visibility-decay exponent over the (rate, correlation length) plane. */
export function plotPlane(runs: RunArtifacts[]): string {
  const grid: Array<{ v: VisibilityBlock }> = [];
  const markers: VisibilityBlock[] = [];
  for (const run of runs) {
    const vis = run.summary.visibility_model;
    if (!vis) continue;
    if (vis.preset) markers.push(vis);
    else grid.push({ v: vis });
  }
  if (grid.length < 4) {
    throw new DataError(`parameter plane needs at least 4 sweep points, found ${grid.length}`);
  }
  const rates = uniqueSorted(grid.map(({ v }) => v.rate_si));
  const lengths = uniqueSorted(grid.map(({ v }) => v.correlation_length_si));
  if (rates.length * lengths.length !== grid.length) {
    throw new DataError(
      `inconsistent sweep axes: ${rates.length} rates x ${lengths.length} lengths ` +
        `cannot tile ${grid.length} points`,
    );
  }
  const seen = new Set<string>();
  for (const { v } of grid) {
    const key = `${v.rate_si}|${v.correlation_length_si}`;
    if (seen.has(key)) throw new DataError(`inconsistent sweep axes: duplicate point ${key}`);
    seen.add(key);
  }

  const fig = new Figure();
  const f = DEFAULT_FRAME;
  const x = log10Scale(rates[0] / 3, rates[rates.length - 1] * 3, f.left, f.width - f.right);
  const y = log10Scale(
    lengths[0] / 3,
    lengths[lengths.length - 1] * 3,
    f.height - f.bottom,
    f.top,
  );
  const exps = grid.map(({ v }) => v.exponent).filter((e) => e > 0);
  const eLo = Math.log10(Math.min(...exps));
  const eHi = Math.log10(Math.max(...exps));

  fig.title("predicted visibility-decay exponent (center-of-mass model)");
  fig.axes();
  for (const t of decadeTicks(rates[0] / 3, rates[rates.length - 1] * 3)) {
    fig.xTick(x(t), formatTick(t));
  }
  for (const t of decadeTicks(lengths[0] / 3, lengths[lengths.length - 1] * 3)) {
    fig.yTick(y(t), formatTick(t));
  }
  fig.xLabel("collapse rate (1/s)");
  fig.yLabel("correlation length (m)");

  const cellW = (x(rates[rates.length - 1]) - x(rates[0])) / Math.max(rates.length - 1, 1);
  const cellH = Math.abs(y(lengths[0]) - y(lengths[lengths.length - 1])) / Math.max(lengths.length - 1, 1);
  for (const { v } of grid) {
    const unit = eHi > eLo ? (Math.log10(v.exponent) - eLo) / (eHi - eLo) : 0.5;
    fig.rect(
      x(v.rate_si) - cellW / 2,
      y(v.correlation_length_si) - cellH / 2,
      cellW,
      cellH,
      `fill="${heatColor(unit)}" data-role="cell" data-rate="${num(v.rate_si)}" ` +
        `data-length="${num(v.correlation_length_si)}" data-exponent="${num(v.exponent)}"`,
    );
  }
  for (const vis of markers) {
    fig.circle(
      x(vis.rate_si),
      y(vis.correlation_length_si),
      7,
      `fill="none" stroke="black" stroke-width="2" data-role="marker" ` +
        `data-preset="${vis.preset}" data-rate="${num(vis.rate_si)}"`,
    );
    fig.text(
      x(vis.rate_si),
      y(vis.correlation_length_si) - 12,
      `${vis.preset}`,
      'text-anchor="middle" font-size="12" font-weight="bold" data-role="marker-label"',
    );
  }
  return fig.render();
}

function uniqueSorted(values: number[]): number[] {
  return [...new Set(values)].sort((a, b) => a - b);
}
