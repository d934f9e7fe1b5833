#!/usr/bin/env node
import { parseArgs } from "node:util";
import { exportEmbeddings } from "./export";
import type { Mode } from "./pheb";

const USAGE =
  "usage: export-embeddings --corpus corpus.jsonl --model <name> " +
  "[--mode averaged|per_chunk] --out emb.pheb [--endpoint URL] " +
  "[--vocab vocab.txt] [--dim N]";

async function main(argv: string[]): Promise<number> {
  let values;
  try {
    ({ values } = parseArgs({
      args: argv,
      options: {
        corpus: { type: "string" },
        model: { type: "string" },
        mode: { type: "string", default: "averaged" },
        out: { type: "string" },
        endpoint: { type: "string" },
        vocab: { type: "string" },
        dim: { type: "string" },
        help: { type: "boolean", short: "h" },
      },
    }));
  } catch (err) {
    console.error(`error: ${(err as Error).message}`);
    console.error(USAGE);
    return 1;
  }
  if (values.help) {
    console.log(USAGE);
    return 0;
  }
  for (const key of ["corpus", "model", "out"] as const) {
    if (!values[key]) {
      console.error(`error: --${key} is required`);
      console.error(USAGE);
      return 1;
    }
  }
  if (values.mode !== "averaged" && values.mode !== "per_chunk") {
    console.error(`error: --mode must be averaged or per_chunk, got ${JSON.stringify(values.mode)}`);
    return 1;
  }
  const dim = values.dim === undefined ? undefined : Number(values.dim);
  if (dim !== undefined && (!Number.isInteger(dim) || dim <= 0)) {
    console.error(`error: --dim must be a positive integer, got ${JSON.stringify(values.dim)}`);
    return 1;
  }

  try {
    const result = await exportEmbeddings({
      corpus: values.corpus!,
      model: values.model!,
      mode: values.mode as Mode,
      out: values.out!,
      endpoint: values.endpoint,
      vocab: values.vocab,
      dim,
    });
    const skipNote = result.skipped.length ? `, skipped ${result.skipped.length}` : "";
    console.log(
      `exported ${result.exported} notes (model ${values.model} rev ${result.revision})${skipNote} -> ${values.out}`,
    );
    return 0;
  } catch (err) {
    console.error(`error: ${(err as Error).message}`);
    return 2;
  }
}

main(process.argv.slice(2)).then((code) => {
  process.exitCode = code;
});
