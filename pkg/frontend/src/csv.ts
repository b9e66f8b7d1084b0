/**
 * Trace CSV parsing. The contract: `# key=value` header lines, then the
 * fixed column row `k,q,f,feas,gnormL,phase,messages,rounds,ms`, then one
 * row per iteration. Parse failures name the file and 1-based line.
 */

export const TRACE_COLUMNS = [
  "k", "q", "f", "feas", "gnormL", "phase", "messages", "rounds", "ms",
] as const;

export interface TraceRow {
  k: number;
  q: number;
  f: number;
  feas: number;
  gnormL: number;
  phase: string;
  messages: number;
  rounds: number;
  ms: number;
}

export interface Trace {
  header: Record<string, string>;
  rows: TraceRow[];
  file: string;
}

export class ParseError extends Error {
  constructor(file: string, line: number, detail: string) {
    super(`${file}:${line}: ${detail}`);
    this.name = "ParseError";
  }
}

function parseNumber(file: string, line: number, field: string, raw: string): number {
  const v = Number(raw);
  if (raw.trim() === "" || Number.isNaN(v)) {
    throw new ParseError(file, line, `bad numeric value for ${field}: ${JSON.stringify(raw)}`);
  }
  return v;
}

export function parseTrace(text: string, file: string): Trace {
  const lines = text.split(/\r?\n/);
  const header: Record<string, string> = {};
  let i = 0;
  for (; i < lines.length; i++) {
    const line = lines[i];
    if (line.startsWith("# ")) {
      const eq = line.indexOf("=");
      if (eq < 0) throw new ParseError(file, i + 1, "header line without '='");
      header[line.slice(2, eq)] = line.slice(eq + 1);
    } else {
      break;
    }
  }
  if (i >= lines.length || lines[i] !== TRACE_COLUMNS.join(",")) {
    throw new ParseError(file, i + 1,
      `expected column header "${TRACE_COLUMNS.join(",")}"`);
  }
  const rows: TraceRow[] = [];
  for (let j = i + 1; j < lines.length; j++) {
    const line = lines[j];
    if (line === "") continue;
    const parts = line.split(",");
    if (parts.length !== TRACE_COLUMNS.length) {
      throw new ParseError(file, j + 1,
        `expected ${TRACE_COLUMNS.length} fields, got ${parts.length}`);
    }
    rows.push({
      k: parseNumber(file, j + 1, "k", parts[0]),
      q: parseNumber(file, j + 1, "q", parts[1]),
      f: parseNumber(file, j + 1, "f", parts[2]),
      feas: parseNumber(file, j + 1, "feas", parts[3]),
      gnormL: parseNumber(file, j + 1, "gnormL", parts[4]),
      phase: parts[5],
      messages: parseNumber(file, j + 1, "messages", parts[6]),
      rounds: parseNumber(file, j + 1, "rounds", parts[7]),
      ms: parseNumber(file, j + 1, "ms", parts[8]),
    });
  }
  if (rows.length === 0) {
    throw new ParseError(file, lines.length, "trace has no data rows");
  }
  return { header, rows, file };
}

/** Label for the legend: the method recorded in the trace header. */
export function methodLabel(trace: Trace): string {
  return trace.header["method"] ?? trace.file;
}

/** Network identity (node/edge counts) used to group traces into panels. */
export function networkKey(trace: Trace): string {
  const n = trace.header["n"] ?? "?";
  const m = trace.header["m"] ?? "?";
  return `${n} nodes, ${m} edges`;
}
