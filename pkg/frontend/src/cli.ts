#!/usr/bin/env node
/**
 * plot: render figures from simulation run artifacts.
 *
 *   plot decay     --in <run-dir>   --out <file.svg> [--pair i,j]
 *   plot born      --in <run-dir>   --out <file.svg>
 *   plot threshold --in <sweep-dir> --out <file.svg>
 *   plot plane     --in <sweep-dir> --out <file.svg>
 *
 * Exit codes: 0 on success, 2 on usage errors, 3 on data errors.
 */

import { writeFileSync } from "node:fs";

import { DataError, loadRun, loadSweep } from "./artifacts.js";
import { plotBorn, plotDecay, plotPlane, plotThreshold } from "./plots.js";

const KINDS = ["decay", "born", "threshold", "plane"] as const;
type Kind = (typeof KINDS)[number];

interface Args {
  kind: Kind;
  input: string;
  output: string;
  pair?: [number, number];
}

function usage(): string {
  return "usage: plot <decay|born|threshold|plane> --in <dir> --out <file.svg> [--pair i,j]";
}

export function parseArgs(argv: string[]): Args {
  if (argv.length === 0) throw new UsageError(usage());
  const kind = argv[0] as Kind;
  if (!KINDS.includes(kind)) {
    throw new UsageError(`unknown plot kind ${JSON.stringify(argv[0])}\n${usage()}`);
  }
  let input: string | undefined;
  let output: string | undefined;
  let pair: [number, number] | undefined;
  for (let i = 1; i < argv.length; i++) {
    const arg = argv[i];
    const next = () => {
      if (i + 1 >= argv.length) throw new UsageError(`${arg} needs a value`);
      return argv[++i];
    };
    if (arg === "--in") input = next();
    else if (arg === "--out") output = next();
    else if (arg === "--pair") {
      const parts = next().split(",").map((p) => Number(p));
      if (parts.length !== 2 || parts.some((p) => !Number.isInteger(p) || p < 0)) {
        throw new UsageError("--pair expects two non-negative integers, e.g. 0,1");
      }
      pair = [parts[0], parts[1]];
    } else throw new UsageError(`unknown flag ${arg}\n${usage()}`);
  }
  if (!input || !output) throw new UsageError(usage());
  return { kind, input, output, pair };
}

export class UsageError extends Error {}

export function renderFigure(args: Args): string {
  switch (args.kind) {
    case "decay":
      return plotDecay(loadRun(args.input), args.pair);
    case "born":
      return plotBorn(loadRun(args.input));
    case "threshold":
      return plotThreshold(loadSweep(args.input));
    case "plane":
      return plotPlane(loadSweep(args.input));
  }
}

export function main(argv: string[]): number {
  let args: Args;
  try {
    args = parseArgs(argv);
  } catch (err) {
    if (err instanceof UsageError) {
      console.error(err.message);
      return 2;
    }
    throw err;
  }
  try {
    const svg = renderFigure(args);
    writeFileSync(args.output, svg);
    console.log(`wrote ${args.output}`);
    return 0;
  } catch (err) {
    if (err instanceof DataError) {
      console.error(`data error: ${err.message}`);
      return 3;
    }
    throw err;
  }
}

if (import.meta.url === `file://${process.argv[1]}`) {
  process.exit(main(process.argv.slice(2)));
}
