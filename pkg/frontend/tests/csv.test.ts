import * as fs from "node:fs";
import * as path from "node:path";

import { describe, expect, it } from "vitest";

import {
  CsvError,
  MissingColumnError,
  parseMetricsCsv,
  parseSummaryCsv,
  parseSweepWeightCsv,
  parseTrainingLogCsv,
} from "../src/csv.js";
import { FIXTURES } from "./util.js";

const METRICS_FILE = path.join(
  FIXTURES,
  "testing",
  "max_pressure",
  "seed7",
  "metrics.csv",
);

describe("metrics parsing", () => {
  it("parses a real testing run, values verbatim", () => {
    const rows = parseMetricsCsv(fs.readFileSync(METRICS_FILE, "utf8"), METRICS_FILE);
    // 300 s warm-up, then one row per 5 s control step up to 19 995 s.
    expect(rows.length).toBe((20000 - 300) / 5);
    expect(rows[0].timeS).toBe(300);
    expect(rows[rows.length - 1].timeS).toBe(19995);
    // Exact round-trip of the first data line.
    const firstLine = fs
      .readFileSync(METRICS_FILE, "utf8")
      .split("\n")[1]
      .split(",");
    expect(rows[0].avgDelaySPerVeh).toBe(Number(firstLine[2]));
    expect(rows[0].queuedVehicles).toBe(Number(firstLine[3]));
    expect(rows[0].fuelRateMlPerS).toBe(Number(firstLine[4]));
  });

  it("names the missing column when the header lacks one", () => {
    const content = fs.readFileSync(METRICS_FILE, "utf8");
    const doctored = content.replace("avg_delay_s_per_veh", "delay");
    let caught: unknown;
    try {
      parseMetricsCsv(doctored, "doctored.csv");
    } catch (err) {
      caught = err;
    }
    expect(caught).toBeInstanceOf(MissingColumnError);
    expect((caught as MissingColumnError).column).toBe("avg_delay_s_per_veh");
    expect((caught as Error).message).toContain("avg_delay_s_per_veh");
  });

  it("rejects rows with the wrong field count", () => {
    const bad =
      "episode,time_s,avg_delay_s_per_veh,queued_vehicles,fuel_rate_ml_per_s,inserted,exited,pending\n" +
      "0,300,1.5,2\n";
    expect(() => parseMetricsCsv(bad, "bad.csv")).toThrow(CsvError);
  });

  it("rejects non-numeric fields", () => {
    const bad =
      "episode,time_s,avg_delay_s_per_veh,queued_vehicles,fuel_rate_ml_per_s,inserted,exited,pending\n" +
      "0,300,abc,2,3,4,5,6\n";
    expect(() => parseMetricsCsv(bad, "bad.csv")).toThrow(CsvError);
  });

  it("rejects an empty file", () => {
    expect(() => parseMetricsCsv("", "empty.csv")).toThrow(CsvError);
  });
});

describe("summary parsing", () => {
  it("parses a training summary with one row per episode", () => {
    const file = path.join(FIXTURES, "training", "s2r2l", "seed5", "summary.csv");
    const rows = parseSummaryCsv(fs.readFileSync(file, "utf8"), file);
    expect(rows.length).toBe(4);
    expect(rows.map((r) => r.episode)).toEqual([0, 1, 2, 3]);
    expect(rows.every((r) => r.seed === 5)).toBe(true);
  });
});

describe("training-log parsing", () => {
  it("parses the per-agent learning log schema", () => {
    const content =
      "episode,learn_steps,mean_abs_td,epsilon,reward_sum\n" +
      "0,12,0.53,0.98,-140.5\n";
    const rows = parseTrainingLogCsv(content, "log.csv");
    expect(rows).toEqual([
      { episode: 0, learnSteps: 12, meanAbsTd: 0.53, epsilon: 0.98, rewardSum: -140.5 },
    ]);
  });
});

describe("sweep-table parsing", () => {
  it("parses the fixture sweep with its degenerate flag", () => {
    const file = path.join(FIXTURES, "sweep", "sweep_weight.csv");
    const rows = parseSweepWeightCsv(fs.readFileSync(file, "utf8"), file);
    expect(rows.length).toBe(2);
    expect(rows[0].selfWeightN).toBe(0);
    expect(rows[0].neighborOnlyDegenerate).toBe(true);
    expect(rows[1].selfWeightN).toBe(2);
    expect(rows[1].neighborOnlyDegenerate).toBe(false);
  });

  it("rejects booleans other than lowercase true/false", () => {
    const bad =
      "self_weight_n,mean_delay_s_per_veh,mean_queued_veh,mean_fuel_ml_per_s,neighbor_only_degenerate\n" +
      "0.0,1,2,3,TRUE\n";
    expect(() => parseSweepWeightCsv(bad, "bad.csv")).toThrow(CsvError);
  });
});
