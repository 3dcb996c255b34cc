/**
 * Locating and reading run directories produced by the gridsignal CLI.
 *
 * A run directory holds per-seed subdirectories (`seed<k>/`), each with
 * `metrics.csv` and `summary.csv`. The plot commands accept either a run
 * directory or a seed directory; multi-scheme commands accept a parent
 * directory with one run directory per scheme.
 */

import * as fs from "node:fs";
import * as path from "node:path";

import {
  MetricsRow,
  SummaryRow,
  SweepWeightRow,
  parseMetricsCsv,
  parseSummaryCsv,
  parseSweepWeightCsv,
} from "./csv.js";

export class InputError extends Error {}

const KNOWN_ORDER = [
  "idql",
  "s2rl",
  "s2r2l",
  "max_pressure",
  "random_baseline",
];

function isDir(p: string): boolean {
  return fs.existsSync(p) && fs.statSync(p).isDirectory();
}

function isFile(p: string): boolean {
  return fs.existsSync(p) && fs.statSync(p).isFile();
}

/**
 * Resolve a directory to the one holding the CSV files: the directory
 * itself if it has them, otherwise its lowest-numbered `seed<k>/` child.
 */
export function resolveRunDir(dir: string): string {
  if (!isDir(dir)) {
    throw new InputError(`not a directory: ${dir}`);
  }
  if (isFile(path.join(dir, "metrics.csv")) || isFile(path.join(dir, "summary.csv"))) {
    return dir;
  }
  const seeds = fs
    .readdirSync(dir)
    .map((name) => {
      const m = /^seed(\d+)$/.exec(name);
      return m && isDir(path.join(dir, name))
        ? { name, seed: Number(m[1]) }
        : null;
    })
    .filter((x): x is { name: string; seed: number } => x !== null)
    .sort((a, b) => a.seed - b.seed);
  if (seeds.length === 0) {
    throw new InputError(
      `no metrics.csv, summary.csv, or seed<k>/ directory under ${dir}`,
    );
  }
  return path.join(dir, seeds[0].name);
}

export function readMetrics(runDir: string): MetricsRow[] {
  const file = path.join(resolveRunDir(runDir), "metrics.csv");
  if (!isFile(file)) {
    throw new InputError(`missing file: ${file}`);
  }
  return parseMetricsCsv(fs.readFileSync(file, "utf8"), file);
}

export function readSummary(runDir: string): SummaryRow[] {
  const file = path.join(resolveRunDir(runDir), "summary.csv");
  if (!isFile(file)) {
    throw new InputError(`missing file: ${file}`);
  }
  return parseSummaryCsv(fs.readFileSync(file, "utf8"), file);
}

/**
 * List the per-scheme run directories under a parent directory, in a
 * stable order (known scheme names first, the rest alphabetical).
 */
export function schemeDirs(root: string): { scheme: string; dir: string }[] {
  if (!isDir(root)) {
    throw new InputError(`not a directory: ${root}`);
  }
  const entries = fs
    .readdirSync(root)
    .filter((name) => isDir(path.join(root, name)))
    .filter((name) => {
      try {
        resolveRunDir(path.join(root, name));
        return true;
      } catch {
        return false;
      }
    });
  if (entries.length === 0) {
    throw new InputError(`no run directories under ${root}`);
  }
  entries.sort((a, b) => {
    const ia = KNOWN_ORDER.indexOf(a);
    const ib = KNOWN_ORDER.indexOf(b);
    if (ia !== -1 || ib !== -1) {
      return (ia === -1 ? KNOWN_ORDER.length : ia) -
        (ib === -1 ? KNOWN_ORDER.length : ib);
    }
    return a < b ? -1 : a > b ? 1 : 0;
  });
  return entries.map((name) => ({ scheme: name, dir: path.join(root, name) }));
}

export interface WeightSweepInput {
  table: SweepWeightRow[];
  candidates: { label: string; rows: MetricsRow[] }[];
}

/**
 * Read a reward-weight sweep directory: the `sweep_weight.csv` table plus
 * each candidate's testing metrics under `weight_<label>/test/`.
 */
export function readWeightSweep(root: string): WeightSweepInput {
  const tableFile = path.join(root, "sweep_weight.csv");
  if (!isFile(tableFile)) {
    throw new InputError(`missing file: ${tableFile}`);
  }
  const table = parseSweepWeightCsv(fs.readFileSync(tableFile, "utf8"), tableFile);
  const candidates = table.map((row) => {
    const label = formatWeightLabel(row.selfWeightN);
    const testDir = path.join(root, `weight_${label}`, "test");
    return { label, rows: readMetrics(testDir) };
  });
  return { table, candidates };
}

/** Directory label for a weight candidate (mirrors the sweep writer). */
export function formatWeightLabel(value: number): string {
  // The sweep writer names directories with %g formatting: 0.0 -> "0",
  // 0.5 -> "0.5", 2.0 -> "2". String(Number) matches for these magnitudes.
  return String(value);
}
