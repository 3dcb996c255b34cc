/** Test helpers: independent CSV reading and SVG data-attribute extraction. */

import * as fs from "node:fs";
import * as path from "node:path";
import { fileURLToPath } from "node:url";

export const FIXTURES = path.join(
  path.dirname(fileURLToPath(import.meta.url)),
  "fixtures",
);

/**
 * Minimal independent CSV column reader (deliberately not the production
 * parser): returns the named column as numbers.
 */
export function csvColumn(file: string, column: string): number[] {
  const lines = fs.readFileSync(file, "utf8").trim().split("\n");
  const header = lines[0].split(",");
  const index = header.indexOf(column);
  if (index === -1) {
    throw new Error(`column ${column} not in ${file}`);
  }
  return lines.slice(1).map((line) => Number(line.split(",")[index]));
}

export interface ExtractedSeries {
  name: string;
  x: number[];
  y: number[];
}

/** Pull every polyline's embedded source arrays back out of an SVG. */
export function extractPolylines(svg: string): ExtractedSeries[] {
  const out: ExtractedSeries[] = [];
  const re =
    /<polyline[^>]*data-name="([^"]*)"[^>]*data-x="([^"]*)"[^>]*data-y="([^"]*)"/g;
  for (const m of svg.matchAll(re)) {
    out.push({ name: m[1], x: JSON.parse(m[2]), y: JSON.parse(m[3]) });
  }
  return out;
}

/** The shading boundaries an SVG declares, or null if it has no shading. */
export function extractBoundaries(svg: string): number[] | null {
  const m = /data-segment-boundaries="([^"]*)"/.exec(svg);
  return m ? JSON.parse(m[1]) : null;
}

export interface ExtractedBox {
  label: string;
  min: number;
  q1: number;
  median: number;
  q3: number;
  max: number;
}

/** Pull every box glyph's embedded statistics back out of an SVG. */
export function extractBoxes(svg: string): ExtractedBox[] {
  const out: ExtractedBox[] = [];
  const re =
    /<g[^>]*class="box"[^>]*data-label="([^"]*)"[^>]*data-min="([^"]*)"[^>]*data-q1="([^"]*)"[^>]*data-median="([^"]*)"[^>]*data-q3="([^"]*)"[^>]*data-max="([^"]*)"/g;
  for (const m of svg.matchAll(re)) {
    out.push({
      label: m[1],
      min: Number(m[2]),
      q1: Number(m[3]),
      median: Number(m[4]),
      q3: Number(m[5]),
      max: Number(m[6]),
    });
  }
  return out;
}

/** Median by sorting — an oracle independent of the chart code. */
export function independentMedian(values: number[]): number {
  const s = [...values].sort((a, b) => a - b);
  const n = s.length;
  return n % 2 === 1 ? s[(n - 1) / 2] : (s[n / 2 - 1] + s[n / 2]) / 2;
}
