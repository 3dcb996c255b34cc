#!/usr/bin/env node
/**
 * gridsignal-plot: render SVG charts from gridsignal run CSVs.
 *
 *   gridsignal-plot train      --in <dir-of-scheme-runs> --out <dir>
 *   gridsignal-plot test       --in <dir-of-scheme-runs> --out <dir>
 *   gridsignal-plot normalized --in <run-dir>            --out <dir>
 *   gridsignal-plot weights    --in <sweep-dir>          --out <dir>
 */

import * as fs from "node:fs";
import * as path from "node:path";

import {
  normalizedChart,
  testingCharts,
  trainingCharts,
  weightBoxCharts,
} from "./charts.js";
import {
  readMetrics,
  readSummary,
  readWeightSweep,
  schemeDirs,
} from "./io.js";

const USAGE = `usage: gridsignal-plot <command> --in <dir> --out <dir>

commands:
  train       per-episode training curves, one image per metric
              (--in: a directory with one run directory per scheme)
  test        testing time series with demand-segment shading
              (--in: a directory with one run directory per scheme)
  normalized  one run's metrics min-max normalized onto [0, 1]
              (--in: a single run directory)
  weights     box plots over the reward-weight sweep
              (--in: a sweep directory with sweep_weight.csv)
`;

interface Args {
  command: string;
  inDir: string;
  outDir: string;
}

export function parseArgs(argv: string[]): Args {
  const [command, ...rest] = argv;
  if (!command || command === "--help" || command === "-h") {
    throw new UsageError(USAGE);
  }
  if (!["train", "test", "normalized", "weights"].includes(command)) {
    throw new UsageError(`unknown command: ${command}\n\n${USAGE}`);
  }
  let inDir: string | undefined;
  let outDir: string | undefined;
  for (let i = 0; i < rest.length; i += 2) {
    const flag = rest[i];
    const value = rest[i + 1];
    if (value === undefined) {
      throw new UsageError(`missing value for ${flag}`);
    }
    if (flag === "--in") inDir = value;
    else if (flag === "--out") outDir = value;
    else throw new UsageError(`unknown flag: ${flag}\n\n${USAGE}`);
  }
  if (!inDir || !outDir) {
    throw new UsageError(`both --in and --out are required\n\n${USAGE}`);
  }
  return { command, inDir, outDir };
}

export class UsageError extends Error {}

function writeSvg(outDir: string, name: string, svg: string): string {
  fs.mkdirSync(outDir, { recursive: true });
  const file = path.join(outDir, name);
  fs.writeFileSync(file, svg + "\n", "utf8");
  return file;
}

export interface CliResult {
  files: string[];
  warnings: string[];
}

/** Run one plot command; returns what was written (used by main and tests). */
export function runCommand(args: Args): CliResult {
  const files: string[] = [];
  const warnings: string[] = [];
  switch (args.command) {
    case "train": {
      const schemes = schemeDirs(args.inDir).map((entry) => ({
        scheme: entry.scheme,
        rows: readSummary(entry.dir),
      }));
      for (const chart of trainingCharts(schemes)) {
        files.push(writeSvg(args.outDir, `train_${chart.metric}.svg`, chart.svg));
      }
      break;
    }
    case "test": {
      const schemes = schemeDirs(args.inDir).map((entry) => ({
        scheme: entry.scheme,
        rows: readMetrics(entry.dir),
      }));
      for (const chart of testingCharts(schemes)) {
        files.push(writeSvg(args.outDir, `test_${chart.metric}.svg`, chart.svg));
      }
      break;
    }
    case "normalized": {
      const rows = readMetrics(args.inDir);
      const result = normalizedChart(rows);
      warnings.push(...result.warnings);
      files.push(writeSvg(args.outDir, "normalized.svg", result.svg));
      break;
    }
    case "weights": {
      const sweep = readWeightSweep(args.inDir);
      for (const chart of weightBoxCharts(sweep.candidates)) {
        files.push(
          writeSvg(args.outDir, `weights_${chart.metric}.svg`, chart.svg),
        );
      }
      break;
    }
  }
  return { files, warnings };
}

export function main(argv: string[]): number {
  let args: Args;
  try {
    args = parseArgs(argv);
  } catch (err) {
    if (err instanceof UsageError) {
      process.stderr.write(err.message + "\n");
      return 2;
    }
    throw err;
  }
  try {
    const result = runCommand(args);
    for (const warning of result.warnings) {
      process.stderr.write(`warning: ${warning}\n`);
    }
    for (const file of result.files) {
      process.stdout.write(`wrote ${file}\n`);
    }
    return 0;
  } catch (err) {
    process.stderr.write(`error: ${(err as Error).message}\n`);
    return 1;
  }
}

const entry = process.argv[1];
if (entry && (entry.endsWith("cli.js") || entry.endsWith("gridsignal-plot"))) {
  process.exit(main(process.argv.slice(2)));
}
