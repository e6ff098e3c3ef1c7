/**
 * Figure construction for sweep results: three standard layouts, each a set
 * of per-series curves versus SNR. Error-probability axes are logarithmic,
 * rate and delay axes linear. Rendering is plain SVG text, so identical
 * inputs give byte-identical images.
 */

import { applyFilter, groupRows, parseResults, ResultRow } from "./csv.js";

export type FigureKind = "pep_rate" | "ber_rate" | "ber_delay";

export interface FigureSpec {
  kind: FigureKind;
  groupBy: string[];
  filter?: string;
  split?: boolean;
}

export interface SeriesPoint {
  x: number;
  y: number | null;
}

export interface Series {
  label: string;
  color: string;
  dash?: string;
  points: SeriesPoint[];
}

export interface FigureData {
  primary: Series[];
  primaryLabel: string;
  secondary: Series[];
  secondaryLabel: string;
  snrValues: number[];
}

export interface Panel {
  suffix: string;
  svg: string;
}

interface MetricSpec {
  column: string;
  tag: string;
  dash?: string;
}

const LAYOUTS: Record<
  FigureKind,
  { primary: MetricSpec; primaryLabel: string; secondary: MetricSpec[]; secondaryLabel: string }
> = {
  pep_rate: {
    primary: { column: "pep_theory_mean", tag: "PEP" },
    primaryLabel: "theoretical worst-case PEP",
    secondary: [
      { column: "mmd_rate_ul", tag: "uplink rate" },
      { column: "mmd_rate_dl", tag: "downlink rate", dash: "5,3" },
    ],
    secondaryLabel: "MMD computation rate",
  },
  ber_rate: {
    primary: { column: "ber", tag: "BER" },
    primaryLabel: "bit error rate",
    secondary: [
      { column: "mmd_rate_ul", tag: "uplink rate" },
      { column: "mmd_rate_dl", tag: "downlink rate", dash: "5,3" },
    ],
    secondaryLabel: "MMD computation rate",
  },
  ber_delay: {
    primary: { column: "ber", tag: "BER" },
    primaryLabel: "bit error rate",
    secondary: [
      { column: "avg_delay_slots", tag: "delay", dash: "5,3" },
    ],
    secondaryLabel: "average delay (slots)",
  },
};

export const FIGURE_KINDS = Object.keys(LAYOUTS) as FigureKind[];

const PALETTE = [
  "#1f77b4", "#d62728", "#2ca02c", "#9467bd",
  "#ff7f0e", "#8c564b", "#e377c2", "#17becf",
];

export class FigureError extends Error {}

function seriesFrom(
  rows: ResultRow[],
  metric: MetricSpec,
  label: string,
  color: string,
  snrValues: number[],
): Series {
  const bySnr = new Map<number, number[]>();
  for (const row of rows) {
    const snr = row["snr_db"];
    const val = row[metric.column];
    if (typeof snr !== "number") throw new FigureError("snr_db must be numeric");
    if (val === null) continue; // e.g. delay of a run with no deliveries
    if (typeof val !== "number") {
      throw new FigureError(`column '${metric.column}' holds non-numeric data`);
    }
    const bucket = bySnr.get(snr);
    if (bucket) bucket.push(val);
    else bySnr.set(snr, [val]);
  }
  // replication seeds give several rows per (series, snr); plot their mean
  const points = snrValues.map((x) => {
    const vals = bySnr.get(x);
    return { x, y: vals ? vals.reduce((a, b) => a + b, 0) / vals.length : null };
  });
  return { label, color, dash: metric.dash, points };
}

export function buildFigure(csvText: string, spec: FigureSpec): FigureData {
  const layout = LAYOUTS[spec.kind];
  if (!layout) {
    throw new FigureError(
      `unknown figure kind '${spec.kind}' (expected ${FIGURE_KINDS.join(", ")})`,
    );
  }
  const table = parseResults(csvText);
  for (const metric of [layout.primary, ...layout.secondary]) {
    if (!table.header.includes(metric.column)) {
      throw new FigureError(`CSV is missing required column '${metric.column}'`);
    }
  }
  const rows = applyFilter(table, spec.filter);
  const groups = groupRows(rows, table.header, spec.groupBy);
  const snrValues = [...new Set(rows.map((r) => r["snr_db"] as number))].sort(
    (a, b) => a - b,
  );

  const primary: Series[] = [];
  const secondary: Series[] = [];
  let i = 0;
  for (const [label, groupRowsList] of groups) {
    const color = PALETTE[i % PALETTE.length];
    primary.push(seriesFrom(groupRowsList, layout.primary, label, color, snrValues));
    for (const metric of layout.secondary) {
      secondary.push(
        seriesFrom(groupRowsList, metric, `${label} (${metric.tag})`, color, snrValues),
      );
    }
    i += 1;
  }
  return {
    primary,
    primaryLabel: layout.primaryLabel,
    secondary,
    secondaryLabel: layout.secondaryLabel,
    snrValues,
  };
}

// ---------------------------------------------------------------------------
// scales
// ---------------------------------------------------------------------------

export function niceTicks(min: number, max: number, count: number): number[] {
  const range = max - min || 1;
  const rough = range / count;
  const mag = Math.pow(10, Math.floor(Math.log10(rough)));
  const step = [1, 2, 5, 10].map((m) => m * mag).find((n) => n >= rough) ?? rough;
  const start = Math.ceil(min / step) * step;
  const ticks: number[] = [];
  for (let v = start; v <= max + step * 1e-9; v += step) ticks.push(v);
  return ticks;
}

/** 10^e as the same double a numeric literal would give. */
function pow10(e: number): number {
  return Number(`1e${e}`);
}

/** Decade tick values covering [min, max], min > 0. */
export function logTicks(min: number, max: number): number[] {
  const lo = Math.floor(Math.log10(min));
  const hi = Math.ceil(Math.log10(max));
  const ticks: number[] = [];
  for (let e = lo; e <= hi; e++) ticks.push(pow10(e));
  return ticks;
}

function fmtLog(v: number): string {
  const e = Math.round(Math.log10(v));
  return e >= -1 && e <= 1 ? String(v) : `1e${e}`;
}

function fmtLin(v: number): string {
  return Math.abs(v - Math.round(v)) < 1e-9 ? String(Math.round(v)) : v.toFixed(2);
}

function esc(s: string): string {
  return s.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
}

// ---------------------------------------------------------------------------
// SVG rendering
// ---------------------------------------------------------------------------

const W = 720;
const H = 440;
const ML = 64;
const MT = 40;
const MB = 48;

interface YAxis {
  map(v: number): number;
  ticks: number[];
  fmt(v: number): string;
  label: string;
}

function logAxis(series: Series[], top: number, height: number, label: string): YAxis {
  const vals = series.flatMap((s) => s.points.map((p) => p.y))
    .filter((v): v is number => v !== null);
  const positive = vals.filter((v) => v > 0);
  if (positive.length === 0) {
    throw new FigureError(`no positive values to place on the log axis '${label}'`);
  }
  const lo = pow10(Math.floor(Math.log10(Math.min(...positive))));
  const hiRaw = Math.max(...positive);
  const hi = pow10(Math.ceil(Math.log10(hiRaw) - 1e-12));
  const span = Math.log10(hi) - Math.log10(lo) || 1;
  return {
    map: (v: number) => {
      const clamped = Math.max(v, lo); // zero cells sit on the axis floor
      return top + height - ((Math.log10(clamped) - Math.log10(lo)) / span) * height;
    },
    ticks: logTicks(lo, hi),
    fmt: fmtLog,
    label,
  };
}

function linearAxis(series: Series[], top: number, height: number, label: string): YAxis {
  const vals = series.flatMap((s) => s.points.map((p) => p.y))
    .filter((v): v is number => v !== null);
  const lo = Math.min(0, ...vals);
  const hi = (Math.max(...vals, 0) || 1) * 1.05;
  return {
    map: (v: number) => top + height - ((v - lo) / (hi - lo || 1)) * height,
    ticks: niceTicks(lo, hi, 5),
    fmt: fmtLin,
    label,
  };
}

function drawSeries(
  s: Series,
  xOf: (v: number) => number,
  axis: YAxis,
  marker: boolean,
): string {
  const drawn = s.points.filter((p): p is { x: number; y: number } => p.y !== null);
  if (drawn.length === 0) return "";
  const pts = drawn
    .map((p) => `${xOf(p.x).toFixed(2)},${axis.map(p.y).toFixed(2)}`)
    .join(" ");
  let out = `<polyline fill="none" stroke="${s.color}" stroke-width="${marker ? 1.6 : 1.1}"` +
    (s.dash ? ` stroke-dasharray="${s.dash}"` : "") +
    (marker ? "" : ` opacity="0.85"`) +
    ` points="${pts}"/>\n`;
  if (marker) {
    for (const p of drawn) {
      out += `<circle cx="${xOf(p.x).toFixed(2)}" cy="${axis.map(p.y).toFixed(2)}" r="2.6" fill="${s.color}"/>\n`;
    }
  }
  return out;
}

function panelSvg(
  title: string,
  snrValues: number[],
  left: { series: Series[]; axis: YAxis; marker: boolean },
  right?: { series: Series[]; axis: YAxis },
): string {
  const mr = right ? 64 : 24;
  const pw = W - ML - mr;
  const ph = H - MT - MB;
  const xMin = Math.min(...snrValues);
  const xMax = Math.max(...snrValues);
  const xOf = (v: number) => ML + ((v - xMin) / (xMax - xMin || 1)) * pw;

  let s = `<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 ${W} ${H}" font-family="Helvetica, Arial, sans-serif">\n`;
  s += `<rect width="${W}" height="${H}" fill="#fff"/>\n`;
  s += `<text x="${ML}" y="${MT - 18}" font-size="13" font-weight="600" fill="#222">${esc(title)}</text>\n`;

  // frame and x grid
  s += `<rect x="${ML}" y="${MT}" width="${pw}" height="${ph}" fill="none" stroke="#999" stroke-width="0.8"/>\n`;
  for (const v of snrValues) {
    const x = xOf(v);
    s += `<line x1="${x.toFixed(2)}" y1="${MT}" x2="${x.toFixed(2)}" y2="${MT + ph}" stroke="#eee" stroke-width="0.6"/>\n`;
    s += `<text x="${x.toFixed(2)}" y="${MT + ph + 16}" font-size="10" text-anchor="middle" fill="#444">${fmtLin(v)}</text>\n`;
  }
  s += `<text x="${ML + pw / 2}" y="${H - 10}" font-size="11" text-anchor="middle" fill="#222">SNR (dB)</text>\n`;

  // left axis
  for (const v of left.axis.ticks) {
    const y = left.axis.map(v);
    s += `<line x1="${ML}" y1="${y.toFixed(2)}" x2="${ML + pw}" y2="${y.toFixed(2)}" stroke="#eee" stroke-width="0.6"/>\n`;
    s += `<text x="${ML - 6}" y="${(y + 3).toFixed(2)}" font-size="10" text-anchor="end" fill="#444">${left.axis.fmt(v)}</text>\n`;
  }
  s += `<text transform="rotate(-90 14 ${MT + ph / 2})" x="14" y="${MT + ph / 2}" font-size="11" text-anchor="middle" fill="#222">${esc(left.axis.label)}</text>\n`;
  for (const sr of left.series) s += drawSeries(sr, xOf, left.axis, left.marker);

  // right axis
  if (right) {
    for (const v of right.axis.ticks) {
      const y = right.axis.map(v);
      s += `<text x="${ML + pw + 6}" y="${(y + 3).toFixed(2)}" font-size="10" fill="#444">${right.axis.fmt(v)}</text>\n`;
    }
    s += `<text transform="rotate(90 ${W - 14} ${MT + ph / 2})" x="${W - 14}" y="${MT + ph / 2}" font-size="11" text-anchor="middle" fill="#222">${esc(right.axis.label)}</text>\n`;
    for (const sr of right.series) s += drawSeries(sr, xOf, right.axis, false);
  }

  // legend, boxed so curves stay readable behind it
  const entries = right ? [...left.series, ...right.series] : left.series;
  const lx = ML + pw - 190;
  s += `<rect x="${lx - 8}" y="${MT + 2}" width="196" height="${entries.length * 13 + 12}" ` +
    `fill="#fff" opacity="0.88" stroke="#ddd" stroke-width="0.6"/>\n`;
  let ly = MT + 12;
  for (const sr of entries) {
    s += `<line x1="${lx}" y1="${ly}" x2="${lx + 22}" y2="${ly}" stroke="${sr.color}" stroke-width="1.6"` +
      (sr.dash ? ` stroke-dasharray="${sr.dash}"` : "") + `/>\n`;
    s += `<text x="${lx + 28}" y="${ly + 3}" font-size="9.5" fill="#333">${esc(sr.label)}</text>\n`;
    ly += 13;
  }

  s += `</svg>\n`;
  return s;
}

/**
 * Render the figure, either as one dual-axis panel (default) or as two
 * separate panels when `spec.split` is set.
 */
export function renderFigure(csvText: string, spec: FigureSpec): Panel[] {
  const data = buildFigure(csvText, spec);
  const ph = H - MT - MB;
  const title = `${data.primaryLabel} and ${data.secondaryLabel} vs SNR`;
  if (!spec.split) {
    const leftAxis = logAxis(data.primary, MT, ph, data.primaryLabel);
    const rightAxis = linearAxis(data.secondary, MT, ph, data.secondaryLabel);
    const svg = panelSvg(title, data.snrValues,
      { series: data.primary, axis: leftAxis, marker: true },
      { series: data.secondary, axis: rightAxis });
    return [{ suffix: "", svg }];
  }
  const metricAxis = logAxis(data.primary, MT, ph, data.primaryLabel);
  const metricPanel = panelSvg(`${data.primaryLabel} vs SNR`, data.snrValues,
    { series: data.primary, axis: metricAxis, marker: true });
  const secAxis = linearAxis(data.secondary, MT, ph, data.secondaryLabel);
  const secPanel = panelSvg(`${data.secondaryLabel} vs SNR`, data.snrValues,
    { series: data.secondary, axis: secAxis, marker: false });
  return [
    { suffix: "-metric", svg: metricPanel },
    { suffix: "-aux", svg: secPanel },
  ];
}
