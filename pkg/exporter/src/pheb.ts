import { readFileSync, writeFileSync } from "node:fs";

export type Mode = "averaged" | "per_chunk";

export interface PhebRecord {
  id: string;
  /** One vector in averaged mode; one per chunk in per_chunk mode. */
  vectors: Float32Array[];
}

const MAGIC = Buffer.from("PHEB1", "ascii");
const VERSION = 1;
const HEADER_BYTES = 15;

/** Write a PHEB1 file: 15-byte header, then little-endian records. */
export function writePheb(path: string, mode: Mode, dim: number, records: PhebRecord[]): void {
  const parts: Buffer[] = [];
  const header = Buffer.alloc(HEADER_BYTES);
  MAGIC.copy(header, 0);
  header.writeUInt8(VERSION, 5);
  header.writeUInt8(mode === "averaged" ? 0 : 1, 6);
  header.writeUInt32LE(records.length, 7);
  header.writeUInt32LE(dim, 11);
  parts.push(header);

  for (const rec of records) {
    const idBytes = Buffer.from(rec.id, "utf-8");
    if (idBytes.length > 0xffff) {
      throw new Error(`record id ${JSON.stringify(rec.id)} is longer than 65535 bytes`);
    }
    if (mode === "averaged" && rec.vectors.length !== 1) {
      throw new Error(`averaged record ${JSON.stringify(rec.id)} must hold exactly one vector`);
    }
    if (rec.vectors.length === 0) {
      throw new Error(`record ${JSON.stringify(rec.id)} has zero chunks`);
    }
    for (const vec of rec.vectors) {
      if (vec.length !== dim) {
        throw new Error(`record ${JSON.stringify(rec.id)} has a vector of dim ${vec.length}, expected ${dim}`);
      }
    }
    const head = Buffer.alloc(2 + idBytes.length + (mode === "per_chunk" ? 2 : 0));
    head.writeUInt16LE(idBytes.length, 0);
    idBytes.copy(head, 2);
    if (mode === "per_chunk") {
      head.writeUInt16LE(rec.vectors.length, 2 + idBytes.length);
    }
    parts.push(head);
    const data = Buffer.alloc(4 * dim * rec.vectors.length);
    let off = 0;
    for (const vec of rec.vectors) {
      for (let i = 0; i < dim; i++) {
        data.writeFloatLE(vec[i], off);
        off += 4;
      }
    }
    parts.push(data);
  }
  writeFileSync(path, Buffer.concat(parts));
}

/** Parse a PHEB1 file; errors carry the byte offset of the problem. */
export function readPheb(path: string): { mode: Mode; dim: number; records: PhebRecord[] } {
  const buf = readFileSync(path);
  if (buf.length < HEADER_BYTES || !buf.subarray(0, 5).equals(MAGIC)) {
    throw new Error(`${path}: not a PHEB1 file`);
  }
  const version = buf.readUInt8(5);
  if (version !== VERSION) {
    throw new Error(`${path}: unsupported version ${version} at offset 5`);
  }
  const modeByte = buf.readUInt8(6);
  if (modeByte !== 0 && modeByte !== 1) {
    throw new Error(`${path}: bad mode byte ${modeByte} at offset 6`);
  }
  const mode: Mode = modeByte === 0 ? "averaged" : "per_chunk";
  const count = buf.readUInt32LE(7);
  const dim = buf.readUInt32LE(11);
  let pos = HEADER_BYTES;
  const need = (n: number, what: string) => {
    if (pos + n > buf.length) {
      throw new Error(`${path}: wanted ${n} bytes for ${what} at offset ${pos}`);
    }
  };
  const records: PhebRecord[] = [];
  for (let r = 0; r < count; r++) {
    need(2, `id length of record ${r}`);
    const idLen = buf.readUInt16LE(pos);
    pos += 2;
    need(idLen, `id of record ${r}`);
    const id = buf.subarray(pos, pos + idLen).toString("utf-8");
    pos += idLen;
    let chunks = 1;
    if (mode === "per_chunk") {
      need(2, `chunk count of record ${r}`);
      chunks = buf.readUInt16LE(pos);
      pos += 2;
      if (chunks === 0) throw new Error(`${path}: record ${r} has zero chunks at offset ${pos - 2}`);
    }
    need(4 * dim * chunks, `vectors of record ${r}`);
    const vectors: Float32Array[] = [];
    for (let c = 0; c < chunks; c++) {
      const vec = new Float32Array(dim);
      for (let i = 0; i < dim; i++) {
        vec[i] = buf.readFloatLE(pos);
        pos += 4;
      }
      vectors.push(vec);
    }
    records.push({ id, vectors });
  }
  if (pos !== buf.length) {
    throw new Error(`${path}: ${buf.length - pos} trailing bytes after the last record (offset ${pos})`);
  }
  return { mode, dim, records };
}
