import { writeFileSync } from "node:fs";
import { readCorpusJsonl } from "./corpus";
import { WordPieceTokenizer } from "./tokenizer";
import { planChunks } from "./chunker";
import { Encoder, localEncoder, httpEncoder, DEFAULT_DIM } from "./encoder";
import { writePheb, Mode, PhebRecord } from "./pheb";

export interface ExportOptions {
  corpus: string;
  model: string;
  mode: Mode;
  out: string;
  /** POST chunks to this URL instead of using the local encoder. */
  endpoint?: string;
  /** Override the bundled WordPiece vocab. */
  vocab?: string;
  dim?: number;
}

export interface SkippedNote {
  id: string;
  reason: string;
}

export interface ExportResult {
  exported: number;
  skipped: SkippedNote[];
  revision: string;
  manifestPath: string;
}

function average(vectors: Float32Array[], dim: number): Float32Array {
  const sum = new Float64Array(dim);
  for (const vec of vectors) {
    for (let i = 0; i < dim; i++) sum[i] += vec[i];
  }
  const out = new Float32Array(dim);
  for (let i = 0; i < dim; i++) out[i] = sum[i] / vectors.length;
  return out;
}

export async function exportEmbeddings(opts: ExportOptions): Promise<ExportResult> {
  const dim = opts.dim ?? DEFAULT_DIM;
  const tokenizer = opts.vocab
    ? WordPieceTokenizer.fromFile(opts.vocab)
    : WordPieceTokenizer.bundled();
  const encoder: Encoder = opts.endpoint
    ? httpEncoder(opts.model, opts.endpoint, dim)
    : localEncoder(opts.model, dim);

  const notes = readCorpusJsonl(opts.corpus);
  const records: PhebRecord[] = [];
  const skipped: SkippedNote[] = [];
  const chunkCounts: Record<string, number> = {};
  for (const note of notes) {
    const contentIds = tokenizer.tokenize(note.text);
    if (contentIds.length === 0) {
      skipped.push({ id: note.id, reason: "empty after tokenization" });
      continue;
    }
    const chunks = planChunks(contentIds, tokenizer.clsId, tokenizer.sepId);
    const vectors = await encoder.encode(chunks);
    chunkCounts[note.id] = chunks.length;
    records.push({
      id: note.id,
      vectors: opts.mode === "averaged" ? [average(vectors, dim)] : vectors,
    });
  }

  writePheb(opts.out, opts.mode, dim, records);
  const manifestPath = `${opts.out}.manifest.json`;
  const manifest = {
    model: opts.model,
    revision: encoder.revision(),
    encoder: opts.endpoint ? "http" : "local",
    mode: opts.mode,
    dim,
    corpus: opts.corpus,
    exported: records.length,
    chunk_counts: chunkCounts,
    skipped,
  };
  writeFileSync(manifestPath, JSON.stringify(manifest, null, 2) + "\n");
  return {
    exported: records.length,
    skipped,
    revision: encoder.revision(),
    manifestPath,
  };
}
