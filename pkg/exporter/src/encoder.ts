import { createHash } from "node:crypto";
import type { Chunk } from "./chunker";

export const DEFAULT_DIM = 768;

/** Produces one CLS vector per chunk. */
export interface Encoder {
  readonly name: string;
  readonly dim: number;
  /** Model revision hash, recorded in the manifest. */
  revision(): string;
  encode(chunks: Chunk[]): Promise<Float32Array[]>;
}

function sfc32(a: number, b: number, c: number, d: number): () => number {
  return () => {
    a |= 0; b |= 0; c |= 0; d |= 0;
    const t = (((a + b) | 0) + d) | 0;
    d = (d + 1) | 0;
    a = b ^ (b >>> 9);
    b = (c + (c << 3)) | 0;
    c = (c << 21) | (c >>> 11);
    c = (c + t) | 0;
    return (t >>> 0) / 4294967296;
  };
}

/**
 * Deterministic stand-in encoder: the CLS vector is a pure function of the
 * model name and the chunk's token ids, so re-runs are bit-identical and no
 * weights or network are needed.
 */
export function localEncoder(name: string, dim: number = DEFAULT_DIM): Encoder {
  const rev = createHash("sha256").update(`local:${name}:${dim}`).digest("hex").slice(0, 12);
  return {
    name,
    dim,
    revision: () => rev,
    encode: async (chunks) =>
      chunks.map((chunk) => {
        const digest = createHash("sha256")
          .update(`${name}:${rev}:${chunk.ids.join(",")}`)
          .digest();
        const rand = sfc32(
          digest.readUInt32LE(0),
          digest.readUInt32LE(4),
          digest.readUInt32LE(8),
          digest.readUInt32LE(12),
        );
        const vec = new Float32Array(dim);
        for (let i = 0; i < dim; i++) vec[i] = rand() * 2 - 1;
        return vec;
      }),
  };
}

/**
 * Remote encoder: POSTs {model, chunks:[{ids,mask}]} to the endpoint and
 * expects {vectors: number[][], revision?: string} back.
 */
export function httpEncoder(name: string, endpoint: string, dim: number = DEFAULT_DIM): Encoder {
  let rev = "unknown";
  return {
    name,
    dim,
    revision: () => rev,
    encode: async (chunks) => {
      const resp = await fetch(endpoint, {
        method: "POST",
        headers: { "content-type": "application/json" },
        body: JSON.stringify({ model: name, chunks }),
      });
      if (!resp.ok) {
        throw new Error(`encoder endpoint ${endpoint} returned ${resp.status}`);
      }
      const payload = (await resp.json()) as { vectors?: number[][]; revision?: string };
      if (typeof payload.revision === "string") rev = payload.revision;
      const vectors = payload.vectors;
      if (!Array.isArray(vectors) || vectors.length !== chunks.length) {
        throw new Error(`encoder endpoint returned ${vectors?.length ?? 0} vectors for ${chunks.length} chunks`);
      }
      return vectors.map((v, i) => {
        if (!Array.isArray(v) || v.length !== dim) {
          throw new Error(`encoder endpoint vector ${i} has dim ${v?.length ?? 0}, expected ${dim}`);
        }
        return Float32Array.from(v);
      });
    },
  };
}
