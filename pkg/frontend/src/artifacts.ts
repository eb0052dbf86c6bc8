/**
 * Loading and integrity checking of simulation run artifacts.
 *
 * A run directory holds manifest.json, timeseries.csv, and summary.json.
 * The manifest's "core" section is hashed by the producer; the CSV's first
 * line and the summary's manifest_hash field must carry that hash, and the
 * manifest lists the sha256 of both files.  Everything is verified before a
 * single number is plotted.
 */

import { createHash } from "node:crypto";
import { readFileSync, readdirSync, statSync } from "node:fs";
import { join } from "node:path";

export class DataError extends Error {}

export interface Manifest {
  core: {
    config: Record<string, unknown>;
    observable_columns: string[];
    seed_derivation: string;
    units: Record<string, unknown>;
    model_labels: Record<string, string>;
    versions: Record<string, string>;
  };
  core_hash: string;
  artifacts: Record<string, string>;
  run_info: Record<string, unknown>;
}

export interface DecayFitBlock {
  pair: [number, number];
  rate: number;
  rate_se: number;
  r_squared: number;
  window: [number, number];
  n_points: number;
  no_decay: boolean;
  log_intercept: number;
  predicted_rate: number;
  separations: number[];
  failed?: string;
}

export interface BornBlock {
  frequencies: number[];
  standard_errors: number[];
  expected_weights: number[];
  resolved_fraction: number;
  n_resolved: number;
  within_3se: boolean;
}

export interface VisibilityBlock {
  label: string;
  rate_si: number;
  correlation_length_si: number;
  preset: string | null;
  exponent: number;
  visibility: number;
  separation_m: number;
  duration_s: number;
  constituents_per_volume: number;
  volume_count: number;
}

export interface Summary {
  manifest_hash: string;
  scenario: string;
  model: string;
  n_trajectories: number;
  params: {
    rate: number;
    correlation_length: number;
    preset: string | null;
    rate_si: number | null;
    correlation_length_si: number | null;
  };
  decay_fit?: DecayFitBlock;
  born?: BornBlock;
  visibility_model?: VisibilityBlock;
  [key: string]: unknown;
}

export interface TimeSeries {
  columns: string[];
  rows: number[][];
  /** column lookup; throws DataError when absent */
  column(name: string): number[];
  hasColumn(name: string): boolean;
}

export interface RunArtifacts {
  directory: string;
  manifest: Manifest;
  summary: Summary;
  series: TimeSeries;
}

function sha256(data: string | Buffer): string {
  return createHash("sha256").update(data).digest("hex");
}

export function parseTimeSeries(text: string, path = "timeseries.csv"): TimeSeries {
  const lines = text.split("\n");
  if (lines.length > 0 && lines[lines.length - 1] === "") lines.pop();
  if (lines.length < 2) {
    throw new DataError(`${path}: too short to contain a header and data`);
  }
  let start = 0;
  if (lines[0].startsWith("#")) start = 1;
  const columns = lines[start].split(",");
  const rows: number[][] = [];
  for (let i = start + 1; i < lines.length; i++) {
    const parts = lines[i].split(",");
    if (parts.length !== columns.length) {
      throw new DataError(
        `${path}: row ${i + 1} has ${parts.length} fields, expected ${columns.length}`,
      );
    }
    const row = parts.map((p) => Number(p));
    const bad = row.findIndex((v) => !Number.isFinite(v));
    if (bad >= 0) {
      throw new DataError(`${path}: row ${i + 1} column ${columns[bad]} is not a finite number`);
    }
    rows.push(row);
  }
  return {
    columns,
    rows,
    column(name: string): number[] {
      const idx = columns.indexOf(name);
      if (idx < 0) {
        throw new DataError(`${path}: column ${name} not present (have: ${columns.join(", ")})`);
      }
      return rows.map((r) => r[idx]);
    },
    hasColumn(name: string): boolean {
      return columns.includes(name);
    },
  };
}

/** Load one run directory and verify every cross-reference hash. */
export function loadRun(directory: string): RunArtifacts {
  let manifestText: string, csvText: string, summaryText: string;
  try {
    manifestText = readFileSync(join(directory, "manifest.json"), "utf8");
    csvText = readFileSync(join(directory, "timeseries.csv"), "utf8");
    summaryText = readFileSync(join(directory, "summary.json"), "utf8");
  } catch (err) {
    throw new DataError(`${directory}: missing run artifact (${(err as Error).message})`);
  }
  const manifest = JSON.parse(manifestText) as Manifest;
  const summary = JSON.parse(summaryText) as Summary;

  const wantCsv = manifest.artifacts["timeseries.csv"];
  if (sha256(csvText) !== wantCsv) {
    throw new DataError(`${directory}: timeseries.csv does not match the manifest hash`);
  }
  const wantSummary = manifest.artifacts["summary.json"];
  if (sha256(summaryText) !== wantSummary) {
    throw new DataError(`${directory}: summary.json does not match the manifest hash`);
  }
  if (summary.manifest_hash !== manifest.core_hash) {
    throw new DataError(`${directory}: summary cross-reference hash mismatch`);
  }
  const firstLine = csvText.split("\n", 1)[0];
  if (firstLine !== `# manifest_hash=${manifest.core_hash}`) {
    throw new DataError(`${directory}: timeseries cross-reference hash mismatch`);
  }

  const series = parseTimeSeries(csvText, join(directory, "timeseries.csv"));
  const expected = manifest.core.observable_columns;
  if (
    expected.length !== series.columns.length ||
    expected.some((c, i) => series.columns[i] !== c)
  ) {
    throw new DataError(`${directory}: CSV columns do not match the manifest's observable list`);
  }
  return { directory, manifest, summary, series };
}

/** Load every run subdirectory of a sweep directory, sorted by name. */
export function loadSweep(directory: string): RunArtifacts[] {
  let entries: string[];
  try {
    entries = readdirSync(directory).sort();
  } catch (err) {
    throw new DataError(`${directory}: cannot read sweep directory (${(err as Error).message})`);
  }
  const runs: RunArtifacts[] = [];
  for (const name of entries) {
    const sub = join(directory, name);
    if (!statSync(sub).isDirectory()) continue;
    runs.push(loadRun(sub));
  }
  if (runs.length === 0) {
    throw new DataError(`${directory}: sweep directory contains no run subdirectories`);
  }
  return runs;
}
