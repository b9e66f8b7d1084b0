#!/usr/bin/env node
/**
 * render_figures <summary.json|trace.csv ...> [--out figs/] [--name base]
 *
 * Reads benchmark outputs (summary.json files resolve their per-method
 * CSVs) and writes <out>/<name>.svg and .png. Exit 1 on bad usage or
 * malformed inputs.
 */

import { render } from "./render.js";

function usage(): void {
  console.error(
    "usage: render_figures <summary.json|trace.csv ...> [--out DIR] [--name BASE]");
}

export function main(argv: string[]): number {
  const inputs: string[] = [];
  let outDir = "figs";
  let name = "convergence";
  for (let i = 0; i < argv.length; i++) {
    const arg = argv[i];
    if (arg === "--out") {
      outDir = argv[++i];
      if (outDir === undefined) { usage(); return 1; }
    } else if (arg === "--name") {
      name = argv[++i];
      if (name === undefined) { usage(); return 1; }
    } else if (arg.startsWith("--")) {
      usage();
      return 1;
    } else {
      inputs.push(arg);
    }
  }
  if (inputs.length === 0) {
    usage();
    return 1;
  }
  try {
    const result = render(inputs, outDir, name);
    console.log(
      `wrote ${result.svgPath} and ${result.pngPath} ` +
      `(${result.panelCount} panels: ${result.networks.join("; ")})`);
    return 0;
  } catch (err) {
    console.error(err instanceof Error ? err.message : String(err));
    return 1;
  }
}

process.exit(main(process.argv.slice(2)));
