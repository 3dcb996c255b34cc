/**
 * Strict parsers for the experiment harness CSV schemas.
 *
 * Every parser validates the header verbatim and rejects rows with missing
 * fields or non-numeric values, so a chart can never silently draw garbage.
 */

export class CsvError extends Error {}

export class MissingColumnError extends CsvError {
  constructor(readonly column: string, readonly file: string) {
    super(`missing column "${column}" in ${file}`);
  }
}

export const METRICS_HEADER =
  "episode,time_s,avg_delay_s_per_veh,queued_vehicles,fuel_rate_ml_per_s,inserted,exited,pending";

export const SUMMARY_HEADER =
  "seed,episode,mean_delay_s_per_veh,mean_queued_veh,mean_fuel_ml_per_s,inserted,exited,pending";

export const TRAINING_LOG_HEADER = "episode,learn_steps,mean_abs_td,epsilon,reward_sum";

export const SWEEP_WEIGHT_HEADER =
  "self_weight_n,mean_delay_s_per_veh,mean_queued_veh,mean_fuel_ml_per_s,neighbor_only_degenerate";

export interface MetricsRow {
  episode: number;
  timeS: number;
  avgDelaySPerVeh: number;
  queuedVehicles: number;
  fuelRateMlPerS: number;
  inserted: number;
  exited: number;
  pending: number;
}

export interface SummaryRow {
  seed: number;
  episode: number;
  meanDelaySPerVeh: number;
  meanQueuedVeh: number;
  meanFuelMlPerS: number;
  inserted: number;
  exited: number;
  pending: number;
}

export interface TrainingLogRow {
  episode: number;
  learnSteps: number;
  meanAbsTd: number;
  epsilon: number;
  rewardSum: number;
}

export interface SweepWeightRow {
  selfWeightN: number;
  meanDelaySPerVeh: number;
  meanQueuedVeh: number;
  meanFuelMlPerS: number;
  neighborOnlyDegenerate: boolean;
}

function splitRows(
  text: string,
  expectedHeader: string,
  file: string,
): string[][] {
  const lines = text.split("\n").filter((line) => line.length > 0);
  if (lines.length === 0) {
    throw new CsvError(`${file} is empty`);
  }
  const header = lines[0].trim();
  if (header !== expectedHeader) {
    const expected = expectedHeader.split(",");
    const got = new Set(header.split(","));
    for (const column of expected) {
      if (!got.has(column)) {
        throw new MissingColumnError(column, file);
      }
    }
    throw new CsvError(
      `unexpected header in ${file}: "${header}" (expected "${expectedHeader}")`,
    );
  }
  const width = expectedHeader.split(",").length;
  return lines.slice(1).map((line, i) => {
    const cells = line.trim().split(",");
    if (cells.length !== width) {
      throw new CsvError(
        `${file} row ${i + 2}: expected ${width} fields, got ${cells.length}`,
      );
    }
    return cells;
  });
}

function num(cell: string, file: string): number {
  const value = Number(cell);
  if (cell.trim() === "" || Number.isNaN(value)) {
    throw new CsvError(`${file}: non-numeric value "${cell}"`);
  }
  return value;
}

export function parseMetricsCsv(text: string, file = "metrics.csv"): MetricsRow[] {
  return splitRows(text, METRICS_HEADER, file).map((c) => ({
    episode: num(c[0], file),
    timeS: num(c[1], file),
    avgDelaySPerVeh: num(c[2], file),
    queuedVehicles: num(c[3], file),
    fuelRateMlPerS: num(c[4], file),
    inserted: num(c[5], file),
    exited: num(c[6], file),
    pending: num(c[7], file),
  }));
}

export function parseSummaryCsv(text: string, file = "summary.csv"): SummaryRow[] {
  return splitRows(text, SUMMARY_HEADER, file).map((c) => ({
    seed: num(c[0], file),
    episode: num(c[1], file),
    meanDelaySPerVeh: num(c[2], file),
    meanQueuedVeh: num(c[3], file),
    meanFuelMlPerS: num(c[4], file),
    inserted: num(c[5], file),
    exited: num(c[6], file),
    pending: num(c[7], file),
  }));
}

export function parseTrainingLogCsv(
  text: string,
  file = "training.csv",
): TrainingLogRow[] {
  return splitRows(text, TRAINING_LOG_HEADER, file).map((c) => ({
    episode: num(c[0], file),
    learnSteps: num(c[1], file),
    meanAbsTd: num(c[2], file),
    epsilon: num(c[3], file),
    rewardSum: num(c[4], file),
  }));
}

export function parseSweepWeightCsv(
  text: string,
  file = "sweep_weight.csv",
): SweepWeightRow[] {
  return splitRows(text, SWEEP_WEIGHT_HEADER, file).map((c) => {
    if (c[4] !== "true" && c[4] !== "false") {
      throw new CsvError(`${file}: non-boolean flag "${c[4]}"`);
    }
    return {
      selfWeightN: num(c[0], file),
      meanDelaySPerVeh: num(c[1], file),
      meanQueuedVeh: num(c[2], file),
      meanFuelMlPerS: num(c[3], file),
      neighborOnlyDegenerate: c[4] === "true",
    };
  });
}
