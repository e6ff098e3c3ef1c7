#!/usr/bin/env node
/**
 * plot --csv PATH --figure KIND --group-by KEYS [--filter EXPR]
 *      [--out PATH] [--split]
 *
 * Reads a sweep CSV and writes the requested figure as SVG. KIND is one of
 * pep_rate, ber_rate, ber_delay; KEYS is a comma-separated column list that
 * defines the series (e.g. "p" gives one curve per swept p value); EXPR
 * keeps only rows matching every "column=value" clause. With --split the
 * two axes are written as separate panels (suffixes -metric and -aux).
 */

import { readFileSync, writeFileSync } from "node:fs";
import { parseArgs } from "node:util";

import { CsvError, FilterError } from "./csv.js";
import { FIGURE_KINDS, FigureError, FigureKind, renderFigure } from "./figures.js";

function outPaths(out: string, suffix: string): string {
  if (suffix === "") return out;
  const dot = out.lastIndexOf(".");
  return dot > 0 ? out.slice(0, dot) + suffix + out.slice(dot) : out + suffix;
}

export function main(argv: string[]): number {
  let args;
  try {
    args = parseArgs({
      args: argv,
      options: {
        csv: { type: "string" },
        figure: { type: "string" },
        "group-by": { type: "string", default: "" },
        filter: { type: "string" },
        out: { type: "string", default: "figure.svg" },
        split: { type: "boolean", default: false },
      },
    }).values;
  } catch (err) {
    console.error(`argument error: ${(err as Error).message}`);
    return 2;
  }
  if (!args.csv || !args.figure) {
    console.error("usage: plot --csv PATH --figure KIND --group-by KEYS " +
      "[--filter EXPR] [--out PATH] [--split]");
    return 2;
  }
  if (!FIGURE_KINDS.includes(args.figure as FigureKind)) {
    console.error(`unknown figure kind '${args.figure}' ` +
      `(expected ${FIGURE_KINDS.join(", ")})`);
    return 2;
  }

  let text: string;
  try {
    text = readFileSync(args.csv, "utf-8");
  } catch (err) {
    console.error(`cannot read ${args.csv}: ${(err as Error).message}`);
    return 1;
  }

  try {
    const panels = renderFigure(text, {
      kind: args.figure as FigureKind,
      groupBy: args["group-by"] ? args["group-by"].split(",").map((s) => s.trim()) : [],
      filter: args.filter,
      split: args.split,
    });
    for (const panel of panels) {
      const path = outPaths(args.out!, panel.suffix);
      writeFileSync(path, panel.svg);
      console.log(`wrote ${path}`);
    }
  } catch (err) {
    if (err instanceof FilterError || err instanceof FigureError ||
        err instanceof CsvError) {
      console.error(err.message);
      return 1;
    }
    throw err;
  }
  return 0;
}

const entry = process.argv[1] ?? "";
if (entry.endsWith("cli.js") || entry.endsWith("plot")) {
  process.exit(main(process.argv.slice(2)));
}
