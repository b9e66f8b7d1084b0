/**
 * Deterministic SVG construction for the convergence figure: a grid of
 * panels (feasibility and primal objective per network, log-scale y), one
 * polyline per method, shared legend strip. No DOM, no randomness; the
 * same inputs always produce the same bytes.
 */

import { Trace, methodLabel } from "./csv.js";

export interface Series {
  label: string;
  points: Array<{ x: number; y: number }>;
}

export interface PanelSpec {
  title: string;
  yLabel: string;
  series: Series[];
}

export interface FigureSpec {
  panels: PanelSpec[];
  columns: number;
  width?: number;
  height?: number;
}

const METHOD_COLORS: Record<string, string> = {
  "gradient": "#d62728",
  "exact-newton": "#1f77b4",
  "sddm-newton": "#2ca02c",
  "neumann-newton": "#9467bd",
};

const FALLBACK_COLORS = ["#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"];

export function colorFor(label: string, index: number): string {
  return METHOD_COLORS[label] ?? FALLBACK_COLORS[index % FALLBACK_COLORS.length];
}

/** Positive-value series for a log-scale metric; nonpositive points drop. */
export function metricSeries(traces: Trace[], metric: "feas" | "f"): Series[] {
  return traces.map((t) => ({
    label: methodLabel(t),
    points: t.rows
      .filter((r) => r[metric] > 0)
      .map((r) => ({ x: r.k, y: r[metric] })),
  }));
}

function fmt(v: number): string {
  return Number(v.toFixed(2)).toString();
}

function logTicks(lo: number, hi: number): number[] {
  const ticks: number[] = [];
  const start = Math.ceil(Math.log10(lo) - 1e-9);
  const stop = Math.floor(Math.log10(hi) + 1e-9);
  const step = Math.max(1, Math.ceil((stop - start) / 6));
  for (let e = start; e <= stop; e += step) ticks.push(e);
  return ticks;
}

function linTicks(hi: number): number[] {
  const raw = hi / 4;
  const mag = Math.pow(10, Math.floor(Math.log10(Math.max(raw, 1))));
  const step = Math.max(1, Math.round(raw / mag) * mag);
  const out: number[] = [];
  for (let v = 0; v <= hi + 1e-9; v += step) out.push(v);
  return out;
}

function expLabel(e: number): string {
  if (e === 0) return "1";
  return `1e${e}`;
}

interface Box { x: number; y: number; w: number; h: number }

function renderPanel(p: PanelSpec, box: Box, out: string[]): void {
  const margin = { left: 52, right: 10, top: 26, bottom: 34 };
  const plot: Box = {
    x: box.x + margin.left,
    y: box.y + margin.top,
    w: box.w - margin.left - margin.right,
    h: box.h - margin.top - margin.bottom,
  };
  const ys = p.series.flatMap((s) => s.points.map((pt) => pt.y));
  const xs = p.series.flatMap((s) => s.points.map((pt) => pt.x));
  out.push(`<rect x="${plot.x}" y="${plot.y}" width="${plot.w}" height="${plot.h}" fill="white" stroke="#444" stroke-width="1"/>`);
  out.push(`<text x="${box.x + box.w / 2}" y="${box.y + 16}" text-anchor="middle" font-size="12" font-weight="bold">${p.title}</text>`);
  if (ys.length === 0) {
    out.push(`<text x="${plot.x + plot.w / 2}" y="${plot.y + plot.h / 2}" text-anchor="middle" font-size="11" fill="#888">no positive values</text>`);
    return;
  }
  const yLo = Math.min(...ys);
  const yHi = Math.max(...ys);
  const xHi = Math.max(...xs, 1);
  const logLo = Math.log10(yLo);
  const logHi = Math.log10(yHi) === logLo ? logLo + 1 : Math.log10(yHi);
  const sx = (x: number) => plot.x + (x / xHi) * plot.w;
  const sy = (y: number) =>
    plot.y + plot.h - ((Math.log10(y) - logLo) / (logHi - logLo)) * plot.h;

  for (const e of logTicks(yLo, yHi)) {
    const yy = sy(Math.pow(10, e));
    if (yy < plot.y - 1 || yy > plot.y + plot.h + 1) continue;
    out.push(`<line x1="${plot.x}" y1="${fmt(yy)}" x2="${plot.x + plot.w}" y2="${fmt(yy)}" stroke="#ddd" stroke-width="0.6"/>`);
    out.push(`<text x="${plot.x - 4}" y="${fmt(yy + 3)}" text-anchor="end" font-size="9">${expLabel(e)}</text>`);
  }
  for (const v of linTicks(xHi)) {
    const xx = sx(v);
    out.push(`<line x1="${fmt(xx)}" y1="${plot.y + plot.h}" x2="${fmt(xx)}" y2="${plot.y + plot.h + 3}" stroke="#444" stroke-width="0.8"/>`);
    out.push(`<text x="${fmt(xx)}" y="${plot.y + plot.h + 14}" text-anchor="middle" font-size="9">${v}</text>`);
  }
  out.push(`<text x="${box.x + box.w / 2}" y="${box.y + box.h - 4}" text-anchor="middle" font-size="10">iteration k</text>`);
  out.push(`<text x="${box.x + 12}" y="${plot.y + plot.h / 2}" text-anchor="middle" font-size="10" transform="rotate(-90 ${box.x + 12} ${plot.y + plot.h / 2})">${p.yLabel}</text>`);

  p.series.forEach((s, i) => {
    if (s.points.length === 0) return;
    const pts = s.points
      .map((pt) => `${fmt(sx(pt.x))},${fmt(sy(pt.y))}`)
      .join(" ");
    out.push(`<polyline points="${pts}" fill="none" stroke="${colorFor(s.label, i)}" stroke-width="1.4"/>`);
  });
}

export function renderFigure(spec: FigureSpec): string {
  const cols = Math.max(1, spec.columns);
  const rows = Math.ceil(spec.panels.length / cols);
  const panelW = 330;
  const panelH = 250;
  const legendH = 24;
  const width = spec.width ?? cols * panelW;
  const height = spec.height ?? rows * panelH + legendH;
  const out: string[] = [];
  out.push(`<svg xmlns="http://www.w3.org/2000/svg" width="${width}" height="${height}" viewBox="0 0 ${width} ${height}" font-family="Helvetica, Arial, sans-serif">`);
  out.push(`<rect width="${width}" height="${height}" fill="white"/>`);

  const labels: string[] = [];
  for (const p of spec.panels) {
    for (const s of p.series) {
      if (!labels.includes(s.label)) labels.push(s.label);
    }
  }
  let lx = 12;
  labels.forEach((label, i) => {
    out.push(`<line x1="${lx}" y1="${legendH / 2}" x2="${lx + 18}" y2="${legendH / 2}" stroke="${colorFor(label, i)}" stroke-width="2"/>`);
    out.push(`<text x="${lx + 22}" y="${legendH / 2 + 4}" font-size="11">${label}</text>`);
    lx += 30 + 7 * label.length;
  });

  spec.panels.forEach((p, i) => {
    const box: Box = {
      x: (i % cols) * panelW,
      y: legendH + Math.floor(i / cols) * panelH,
      w: panelW,
      h: panelH,
    };
    renderPanel(p, box, out);
  });
  out.push("</svg>");
  return out.join("\n");
}
