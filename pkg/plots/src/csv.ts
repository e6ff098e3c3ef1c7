/**
 * Reader for the simulator's result CSV: header-first, comma separated,
 * UTF-8, one row per simulated cell. Cells parse to numbers where they
 * look numeric, empty cells to null, anything else stays a string.
 */

export type Cell = string | number | null;
export type ResultRow = Record<string, Cell>;

export interface ResultTable {
  header: string[];
  rows: ResultRow[];
}

export class CsvError extends Error {}
export class FilterError extends Error {}

export function parseResults(text: string): ResultTable {
  const lines = text.split("\n").filter((l) => l.length > 0);
  if (lines.length === 0) throw new CsvError("empty CSV input");
  const header = lines[0].split(",");
  const rows = lines.slice(1).map((line, i) => {
    const cells = line.split(",");
    if (cells.length !== header.length) {
      throw new CsvError(`row ${i + 1}: expected ${header.length} cells, got ${cells.length}`);
    }
    const row: ResultRow = {};
    header.forEach((key, c) => {
      const raw = cells[c];
      if (raw === "") {
        row[key] = null;
      } else {
        const num = Number(raw);
        row[key] = Number.isNaN(num) ? raw : num;
      }
    });
    return row;
  });
  return { header, rows };
}

/** One clause of a filter expression: column = value. */
interface Clause {
  column: string;
  value: Cell;
}

function parseClauses(expr: string): Clause[] {
  return expr
    .split(",")
    .map((part) => part.trim())
    .filter((part) => part.length > 0)
    .map((part) => {
      const eq = part.indexOf("=");
      if (eq < 1) throw new FilterError(`filter clause '${part}' is not 'column=value'`);
      const column = part.slice(0, eq).trim();
      const raw = part.slice(eq + 1).trim();
      const num = Number(raw);
      return { column, value: raw === "" ? null : Number.isNaN(num) ? raw : num };
    });
}

/**
 * Keep rows matching every `column=value` clause of the comma-separated
 * expression. Numeric clauses compare as numbers, so `L=0` matches `0.0`.
 * Unknown columns and empty selections are reported with the offender.
 */
export function applyFilter(table: ResultTable, expr: string | undefined): ResultRow[] {
  if (!expr) return table.rows;
  const clauses = parseClauses(expr);
  for (const clause of clauses) {
    if (!table.header.includes(clause.column)) {
      throw new FilterError(`filter references missing column '${clause.column}'`);
    }
  }
  const kept = table.rows.filter((row) =>
    clauses.every((c) => row[c.column] === c.value),
  );
  if (kept.length === 0) {
    throw new FilterError(`filter '${expr}' selects no rows`);
  }
  return kept;
}

/** Group rows by the values of the given columns, insertion-ordered. */
export function groupRows(
  rows: ResultRow[],
  header: string[],
  keys: string[],
): Map<string, ResultRow[]> {
  for (const key of keys) {
    if (!header.includes(key)) {
      throw new FilterError(`group-by references missing column '${key}'`);
    }
  }
  const groups = new Map<string, ResultRow[]>();
  for (const row of rows) {
    const label = keys.length
      ? keys.map((k) => `${k}=${row[k]}`).join(", ")
      : "all";
    const bucket = groups.get(label);
    if (bucket) bucket.push(row);
    else groups.set(label, [row]);
  }
  return groups;
}
