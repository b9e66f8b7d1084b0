/**
 * Input orchestration: trace CSVs (directly, or named by a benchmark
 * summary.json) grouped per network into a feasibility panel and a primal
 * objective panel, written as SVG and PNG.
 */

import * as fs from "node:fs";
import * as path from "node:path";

import { Resvg } from "@resvg/resvg-js";

import { Trace, networkKey, parseTrace } from "./csv.js";
import { FigureSpec, metricSeries, renderFigure } from "./figure.js";

export interface RenderResult {
  svgPath: string;
  pngPath: string;
  panelCount: number;
  networks: string[];
}

function loadTracesFromSummary(summaryPath: string): Trace[] {
  const dir = path.dirname(summaryPath);
  const raw = JSON.parse(fs.readFileSync(summaryPath, "utf8"));
  const methods = raw?.methods;
  if (typeof methods !== "object" || methods === null) {
    throw new Error(`${summaryPath}: missing "methods" object`);
  }
  return Object.values(methods as Record<string, { csv?: string }>)
    .map((entry) => {
      if (!entry.csv) throw new Error(`${summaryPath}: method entry without csv`);
      const csvPath = path.join(dir, entry.csv);
      return parseTrace(fs.readFileSync(csvPath, "utf8"), csvPath);
    });
}

export function loadTraces(inputs: string[]): Trace[] {
  const traces: Trace[] = [];
  for (const input of inputs) {
    if (input.endsWith(".json")) {
      traces.push(...loadTracesFromSummary(input));
    } else {
      traces.push(parseTrace(fs.readFileSync(input, "utf8"), input));
    }
  }
  return traces;
}

/** Group traces by network and lay out (feasibility | objective) rows. */
export function figureFromTraces(traces: Trace[]): FigureSpec {
  const groups = new Map<string, Trace[]>();
  for (const t of traces) {
    const key = networkKey(t);
    const list = groups.get(key) ?? [];
    list.push(t);
    groups.set(key, list);
  }
  const panels = [...groups.entries()].flatMap(([key, group]) => [
    {
      title: `feasibility |Ax-b| — ${key}`,
      yLabel: "feasibility",
      series: metricSeries(group, "feas"),
    },
    {
      title: `primal objective f(x_k) — ${key}`,
      yLabel: "objective",
      series: metricSeries(group, "f"),
    },
  ]);
  return { panels, columns: 2 };
}

export function render(inputs: string[], outDir: string,
                       baseName = "convergence"): RenderResult {
  const traces = loadTraces(inputs);
  if (traces.length === 0) {
    throw new Error("no input traces given");
  }
  const spec = figureFromTraces(traces);
  const svg = renderFigure(spec);
  fs.mkdirSync(outDir, { recursive: true });
  const svgPath = path.join(outDir, `${baseName}.svg`);
  const pngPath = path.join(outDir, `${baseName}.png`);
  fs.writeFileSync(svgPath, svg);
  const png = new Resvg(svg, { fitTo: { mode: "zoom", value: 2 } }).render();
  fs.writeFileSync(pngPath, png.asPng());
  return {
    svgPath,
    pngPath,
    panelCount: spec.panels.length,
    networks: [...new Set(traces.map(networkKey))],
  };
}
