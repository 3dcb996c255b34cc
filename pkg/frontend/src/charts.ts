/**
 * Chart builders: pure functions from parsed CSV rows to SVG strings.
 *
 * Every polyline and box embeds the exact numbers it was drawn from in
 * `data-*` attributes (JSON), so a rendered chart can be verified against
 * its source CSV value-for-value without re-deriving pixel coordinates.
 */

import { MetricsRow, SummaryRow } from "./csv.js";
import {
  SEGMENT_FILLS,
  SERIES_COLORS,
  el,
  formatTick,
  linearScale,
  text,
  ticks,
} from "./svg.js";

export interface Series {
  name: string;
  x: number[];
  y: number[];
}

export class ChartError extends Error {}

export interface MetricSpec {
  key: "delay" | "queue" | "fuel";
  label: string;
  fromMetrics: (row: MetricsRow) => number;
  fromSummary: (row: SummaryRow) => number;
}

export const METRICS: MetricSpec[] = [
  {
    key: "delay",
    label: "average delay (s/veh)",
    fromMetrics: (r) => r.avgDelaySPerVeh,
    fromSummary: (r) => r.meanDelaySPerVeh,
  },
  {
    key: "queue",
    label: "queued vehicles",
    fromMetrics: (r) => r.queuedVehicles,
    fromSummary: (r) => r.meanQueuedVeh,
  },
  {
    key: "fuel",
    label: "fuel rate (ml/s)",
    fromMetrics: (r) => r.fuelRateMlPerS,
    fromSummary: (r) => r.meanFuelMlPerS,
  },
];

const WIDTH = 860;
const HEIGHT = 420;
const MARGIN = { top: 42, right: 24, bottom: 48, left: 64 };

function validateSeries(series: Series[]): void {
  if (series.length === 0) {
    throw new ChartError("no series to plot");
  }
  for (const s of series) {
    if (s.x.length !== s.y.length) {
      throw new ChartError(
        `series "${s.name}": axis length ${s.x.length} != value length ${s.y.length}`,
      );
    }
    if (s.x.length === 0) {
      throw new ChartError(`series "${s.name}" is empty`);
    }
    for (let i = 1; i < s.x.length; i++) {
      if (!(s.x[i] > s.x[i - 1])) {
        throw new ChartError(
          `series "${s.name}": axis not monotone at index ${i} ` +
            `(${s.x[i - 1]} -> ${s.x[i]})`,
        );
      }
    }
  }
}

function extent(values: number[]): [number, number] {
  let lo = Infinity;
  let hi = -Infinity;
  for (const v of values) {
    if (v < lo) lo = v;
    if (v > hi) hi = v;
  }
  return [lo, hi];
}

export interface LineChartOptions {
  title: string;
  xLabel: string;
  yLabel: string;
  /** Vertical shading boundaries (x values); fills the bands between them. */
  segmentBoundaries?: number[];
  /** Fix the y domain (e.g. [0, 1] for normalized overlays). */
  yDomain?: [number, number];
}

export function lineChart(series: Series[], options: LineChartOptions): string {
  validateSeries(series);
  const xs = series.flatMap((s) => s.x);
  const ys = series.flatMap((s) => s.y);
  const [xLo, xHi] = extent(xs);
  let [yLo, yHi] = options.yDomain ?? extent(ys);
  if (yLo === yHi) {
    yHi = yLo + 1;
  }
  const x = linearScale([xLo, xHi], [MARGIN.left, WIDTH - MARGIN.right]);
  const y = linearScale([yLo, yHi], [HEIGHT - MARGIN.bottom, MARGIN.top]);

  const parts: string[] = [];
  parts.push(
    el("rect", { x: 0, y: 0, width: WIDTH, height: HEIGHT, fill: "#ffffff" }),
  );

  const boundaries = options.segmentBoundaries ?? [];
  if (boundaries.length > 0) {
    const edges = [xLo, ...boundaries, xHi];
    const bands: string[] = [];
    for (let i = 0; i + 1 < edges.length; i++) {
      bands.push(
        el("rect", {
          x: x(edges[i]),
          y: MARGIN.top,
          width: x(edges[i + 1]) - x(edges[i]),
          height: HEIGHT - MARGIN.top - MARGIN.bottom,
          fill: SEGMENT_FILLS[i % SEGMENT_FILLS.length],
          "data-segment": i,
          "data-x-from": edges[i],
          "data-x-to": edges[i + 1],
        }),
      );
    }
    parts.push(
      el(
        "g",
        { "data-segment-boundaries": JSON.stringify(boundaries) },
        bands,
      ),
    );
  }

  const axis: string[] = [];
  for (const tick of ticks([xLo, xHi])) {
    axis.push(
      el("line", {
        x1: x(tick),
        x2: x(tick),
        y1: HEIGHT - MARGIN.bottom,
        y2: HEIGHT - MARGIN.bottom + 5,
        stroke: "#333",
      }),
      text(formatTick(tick), {
        x: x(tick),
        y: HEIGHT - MARGIN.bottom + 18,
        "text-anchor": "middle",
        "font-size": 11,
        fill: "#333",
      }),
    );
  }
  for (const tick of ticks([yLo, yHi])) {
    axis.push(
      el("line", {
        x1: MARGIN.left,
        x2: WIDTH - MARGIN.right,
        y1: y(tick),
        y2: y(tick),
        stroke: "#ddd",
        "stroke-width": 0.6,
      }),
      text(formatTick(tick), {
        x: MARGIN.left - 8,
        y: y(tick) + 4,
        "text-anchor": "end",
        "font-size": 11,
        fill: "#333",
      }),
    );
  }
  axis.push(
    el("line", {
      x1: MARGIN.left,
      x2: WIDTH - MARGIN.right,
      y1: HEIGHT - MARGIN.bottom,
      y2: HEIGHT - MARGIN.bottom,
      stroke: "#333",
    }),
    el("line", {
      x1: MARGIN.left,
      x2: MARGIN.left,
      y1: MARGIN.top,
      y2: HEIGHT - MARGIN.bottom,
      stroke: "#333",
    }),
  );
  parts.push(el("g", { class: "axes" }, axis));

  series.forEach((s, index) => {
    const color = SERIES_COLORS[index % SERIES_COLORS.length];
    const points = s.x
      .map((xv, i) => `${x(xv).toFixed(2)},${y(s.y[i]).toFixed(2)}`)
      .join(" ");
    parts.push(
      el("polyline", {
        points,
        fill: "none",
        stroke: color,
        "stroke-width": 1.6,
        "data-name": s.name,
        "data-x": JSON.stringify(s.x),
        "data-y": JSON.stringify(s.y),
      }),
    );
    const legendY = MARGIN.top + 16 * index;
    parts.push(
      el("line", {
        x1: WIDTH - MARGIN.right - 150,
        x2: WIDTH - MARGIN.right - 126,
        y1: legendY,
        y2: legendY,
        stroke: color,
        "stroke-width": 2,
      }),
      text(s.name, {
        x: WIDTH - MARGIN.right - 120,
        y: legendY + 4,
        "font-size": 12,
        fill: "#111",
        class: "legend-label",
      }),
    );
  });

  parts.push(
    text(options.title, {
      x: WIDTH / 2,
      y: 22,
      "text-anchor": "middle",
      "font-size": 15,
      "font-weight": "bold",
      fill: "#111",
    }),
    text(options.xLabel, {
      x: WIDTH / 2,
      y: HEIGHT - 10,
      "text-anchor": "middle",
      "font-size": 12,
      fill: "#333",
    }),
    text(options.yLabel, {
      x: 16,
      y: HEIGHT / 2,
      "text-anchor": "middle",
      "font-size": 12,
      fill: "#333",
      transform: `rotate(-90 16 ${HEIGHT / 2})`,
    }),
  );

  return el(
    "svg",
    {
      xmlns: "http://www.w3.org/2000/svg",
      width: WIDTH,
      height: HEIGHT,
      viewBox: `0 0 ${WIDTH} ${HEIGHT}`,
    },
    parts,
  );
}

// --------------------------------------------------------------- training
export interface SchemeRows<R> {
  scheme: string;
  rows: R[];
}

export function trainingCharts(
  schemes: SchemeRows<SummaryRow>[],
): { metric: string; svg: string }[] {
  return METRICS.map((metric) => ({
    metric: metric.key,
    svg: lineChart(
      schemes.map((entry) => ({
        name: entry.scheme,
        x: entry.rows.map((r) => r.episode),
        y: entry.rows.map(metric.fromSummary),
      })),
      {
        title: `Training: ${metric.label} per episode`,
        xLabel: "episode",
        yLabel: metric.label,
      },
    ),
  }));
}

// ---------------------------------------------------------------- testing
/**
 * Demand-segment boundaries for a testing run: the schedule is four
 * equal-duration segments, so the boundaries sit at the quarter points of
 * the horizon. Metric rows tick every `step` seconds ending one step short
 * of the horizon (the full-scale schedule: rows to 19 995 s, horizon
 * 20 000 s, boundaries 5000/10000/15000 s).
 */
export function segmentBoundaries(times: number[]): number[] {
  if (times.length < 2) {
    throw new ChartError("need at least two metric rows to place segments");
  }
  const step = times[1] - times[0];
  const horizon = times[times.length - 1] + step;
  return [horizon / 4, horizon / 2, (3 * horizon) / 4];
}

export function testingCharts(
  schemes: SchemeRows<MetricsRow>[],
): { metric: string; svg: string }[] {
  if (schemes.length === 0) {
    throw new ChartError("no testing runs to plot");
  }
  const boundaries = segmentBoundaries(schemes[0].rows.map((r) => r.timeS));
  return METRICS.map((metric) => ({
    metric: metric.key,
    svg: lineChart(
      schemes.map((entry) => ({
        name: entry.scheme,
        x: entry.rows.map((r) => r.timeS),
        y: entry.rows.map(metric.fromMetrics),
      })),
      {
        title: `Testing: ${metric.label} over the demand schedule`,
        xLabel: "time (s)",
        yLabel: metric.label,
        segmentBoundaries: boundaries,
      },
    ),
  }));
}

// ------------------------------------------------------------- normalized
export interface NormalizedResult {
  svg: string;
  warnings: string[];
}

/** Min-max normalize each metric of one run and overlay them on [0, 1]. */
export function normalizedChart(rows: MetricsRow[]): NormalizedResult {
  if (rows.length === 0) {
    throw new ChartError("no metric rows to normalize");
  }
  const warnings: string[] = [];
  const x = rows.map((r) => r.timeS);
  const series: Series[] = METRICS.map((metric) => {
    const raw = rows.map(metric.fromMetrics);
    const [lo, hi] = extent(raw);
    let normalized: number[];
    if (lo === hi) {
      warnings.push(
        `metric "${metric.key}" is constant (${lo}); rendered flat at 0`,
      );
      normalized = raw.map(() => 0);
    } else {
      normalized = raw.map((v) => (v - lo) / (hi - lo));
    }
    return { name: metric.key, x, y: normalized };
  });
  const svg = lineChart(series, {
    title: "Normalized metrics (min-max per metric)",
    xLabel: "time (s)",
    yLabel: "normalized value",
    yDomain: [0, 1],
  });
  return { svg, warnings };
}

// ------------------------------------------------------------- box plots
export interface BoxStats {
  label: string;
  n: number;
  min: number;
  q1: number;
  median: number;
  q3: number;
  max: number;
}

/** Linear-interpolation quantile on a sorted copy (the common default). */
export function quantile(values: number[], q: number): number {
  if (values.length === 0) {
    throw new ChartError("quantile of empty sample");
  }
  const sorted = [...values].sort((a, b) => a - b);
  const h = (sorted.length - 1) * q;
  const lo = Math.floor(h);
  const hi = Math.min(lo + 1, sorted.length - 1);
  return sorted[lo] + (h - lo) * (sorted[hi] - sorted[lo]);
}

/** Classic sorted-midpoint median: average of the two central values. */
export function median(values: number[]): number {
  if (values.length === 0) {
    throw new ChartError("median of empty sample");
  }
  const s = [...values].sort((a, b) => a - b);
  const n = s.length;
  return n % 2 === 1 ? s[(n - 1) / 2] : (s[n / 2 - 1] + s[n / 2]) / 2;
}

export function boxStats(label: string, values: number[]): BoxStats {
  const [min, max] = extent(values);
  return {
    label,
    n: values.length,
    min,
    q1: quantile(values, 0.25),
    median: median(values),
    q3: quantile(values, 0.75),
    max,
  };
}

export function boxChart(boxes: BoxStats[], options: {
  title: string;
  yLabel: string;
}): string {
  if (boxes.length === 0) {
    throw new ChartError("no boxes to plot");
  }
  const yLo = Math.min(...boxes.map((b) => b.min));
  const yHiRaw = Math.max(...boxes.map((b) => b.max));
  const yHi = yHiRaw === yLo ? yLo + 1 : yHiRaw;
  const y = linearScale([yLo, yHi], [HEIGHT - MARGIN.bottom, MARGIN.top]);
  const slot = (WIDTH - MARGIN.left - MARGIN.right) / boxes.length;
  const boxWidth = Math.min(46, slot * 0.5);

  const parts: string[] = [
    el("rect", { x: 0, y: 0, width: WIDTH, height: HEIGHT, fill: "#ffffff" }),
  ];
  for (const tick of ticks([yLo, yHi])) {
    parts.push(
      el("line", {
        x1: MARGIN.left,
        x2: WIDTH - MARGIN.right,
        y1: y(tick),
        y2: y(tick),
        stroke: "#ddd",
        "stroke-width": 0.6,
      }),
      text(formatTick(tick), {
        x: MARGIN.left - 8,
        y: y(tick) + 4,
        "text-anchor": "end",
        "font-size": 11,
        fill: "#333",
      }),
    );
  }

  boxes.forEach((box, index) => {
    const cx = MARGIN.left + slot * (index + 0.5);
    const half = boxWidth / 2;
    const glyph = [
      el("line", {
        x1: cx, x2: cx, y1: y(box.min), y2: y(box.q1), stroke: "#333",
      }),
      el("line", {
        x1: cx, x2: cx, y1: y(box.q3), y2: y(box.max), stroke: "#333",
      }),
      el("line", {
        x1: cx - half / 2, x2: cx + half / 2,
        y1: y(box.min), y2: y(box.min), stroke: "#333",
      }),
      el("line", {
        x1: cx - half / 2, x2: cx + half / 2,
        y1: y(box.max), y2: y(box.max), stroke: "#333",
      }),
      el("rect", {
        x: cx - half,
        y: y(box.q3),
        width: boxWidth,
        height: Math.max(0.5, y(box.q1) - y(box.q3)),
        fill: "#9ecae1",
        stroke: "#333",
      }),
      el("line", {
        x1: cx - half,
        x2: cx + half,
        y1: y(box.median),
        y2: y(box.median),
        stroke: "#08306b",
        "stroke-width": 2,
      }),
      text(box.label, {
        x: cx,
        y: HEIGHT - MARGIN.bottom + 18,
        "text-anchor": "middle",
        "font-size": 11,
        fill: "#333",
      }),
    ];
    parts.push(
      el(
        "g",
        {
          class: "box",
          "data-label": box.label,
          "data-n": box.n,
          "data-min": box.min,
          "data-q1": box.q1,
          "data-median": box.median,
          "data-q3": box.q3,
          "data-max": box.max,
        },
        glyph,
      ),
    );
  });

  parts.push(
    el("line", {
      x1: MARGIN.left,
      x2: MARGIN.left,
      y1: MARGIN.top,
      y2: HEIGHT - MARGIN.bottom,
      stroke: "#333",
    }),
    el("line", {
      x1: MARGIN.left,
      x2: WIDTH - MARGIN.right,
      y1: HEIGHT - MARGIN.bottom,
      y2: HEIGHT - MARGIN.bottom,
      stroke: "#333",
    }),
    text(options.title, {
      x: WIDTH / 2,
      y: 22,
      "text-anchor": "middle",
      "font-size": 15,
      "font-weight": "bold",
      fill: "#111",
    }),
    text(options.yLabel, {
      x: 16,
      y: HEIGHT / 2,
      "text-anchor": "middle",
      "font-size": 12,
      fill: "#333",
      transform: `rotate(-90 16 ${HEIGHT / 2})`,
    }),
  );

  return el(
    "svg",
    {
      xmlns: "http://www.w3.org/2000/svg",
      width: WIDTH,
      height: HEIGHT,
      viewBox: `0 0 ${WIDTH} ${HEIGHT}`,
    },
    parts,
  );
}

/** One box chart per metric: a box per reward-weight candidate. */
export function weightBoxCharts(
  candidates: { label: string; rows: MetricsRow[] }[],
): { metric: string; svg: string }[] {
  if (candidates.length === 0) {
    throw new ChartError("no weight candidates to plot");
  }
  return METRICS.map((metric) => ({
    metric: metric.key,
    svg: boxChart(
      candidates.map((c) =>
        boxStats(c.label, c.rows.map(metric.fromMetrics)),
      ),
      {
        title: `Reward self-weight sweep: ${metric.label}`,
        yLabel: metric.label,
      },
    ),
  }));
}
