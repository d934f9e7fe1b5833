import { describe, it, expect } from "vitest";
import { execFileSync } from "node:child_process";
import { mkdtempSync, readFileSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { writePheb, readPheb, PhebRecord } from "../src/pheb";

const dir = () => mkdtempSync(join(tmpdir(), "pheb-"));

function vec(dim: number, fill: number): Float32Array {
  return Float32Array.from({ length: dim }, (_, i) => fill + i / 16);
}

describe("write/read round trip", () => {
  it("preserves averaged records exactly", () => {
    const path = join(dir(), "a.pheb");
    const records: PhebRecord[] = [
      { id: "n1", vectors: [vec(4, 1)] },
      { id: "nöte-β", vectors: [vec(4, -2)] },
    ];
    writePheb(path, "averaged", 4, records);
    const back = readPheb(path);
    expect(back.mode).toBe("averaged");
    expect(back.dim).toBe(4);
    expect(back.records.map((r) => r.id)).toEqual(["n1", "nöte-β"]);
    expect(Array.from(back.records[1].vectors[0])).toEqual(Array.from(records[1].vectors[0]));
  });

  it("preserves per-chunk records with varying chunk counts", () => {
    const path = join(dir(), "c.pheb");
    const records: PhebRecord[] = [
      { id: "one", vectors: [vec(3, 0)] },
      { id: "three", vectors: [vec(3, 1), vec(3, 2), vec(3, 3)] },
    ];
    writePheb(path, "per_chunk", 3, records);
    const back = readPheb(path);
    expect(back.mode).toBe("per_chunk");
    expect(back.records[1].vectors.length).toBe(3);
    expect(Array.from(back.records[1].vectors[2])).toEqual(Array.from(records[1].vectors[2]));
  });

  it("handles a zero-record file as exactly the 15-byte header", () => {
    const path = join(dir(), "z.pheb");
    writePheb(path, "averaged", 16, []);
    expect(readFileSync(path).length).toBe(15);
    expect(readPheb(path).records).toEqual([]);
  });
});

describe("byte layout", () => {
  it("writes the documented little-endian header", () => {
    const path = join(dir(), "h.pheb");
    writePheb(path, "per_chunk", 7, [{ id: "ab", vectors: [vec(7, 0), vec(7, 1)] }]);
    const buf = readFileSync(path);
    expect(buf.subarray(0, 5).toString("ascii")).toBe("PHEB1");
    expect(buf.readUInt8(5)).toBe(1); // version
    expect(buf.readUInt8(6)).toBe(1); // per_chunk
    expect(buf.readUInt32LE(7)).toBe(1); // count
    expect(buf.readUInt32LE(11)).toBe(7); // dim
    expect(buf.readUInt16LE(15)).toBe(2); // id length
    expect(buf.subarray(17, 19).toString()).toBe("ab");
    expect(buf.readUInt16LE(19)).toBe(2); // chunk count
    expect(buf.length).toBe(15 + 2 + 2 + 2 + 2 * 7 * 4);
  });

  it("stores float32 values little-endian", () => {
    const path = join(dir(), "le.pheb");
    writePheb(path, "averaged", 1, [{ id: "x", vectors: [Float32Array.from([1.0])] }]);
    const buf = readFileSync(path);
    expect(Array.from(buf.subarray(buf.length - 4))).toEqual([0, 0, 128, 63]); // 1.0f LE
  });
});

describe("validation", () => {
  it("rejects oversized ids", () => {
    expect(() =>
      writePheb(join(dir(), "x.pheb"), "averaged", 2, [
        { id: "a".repeat(70000), vectors: [vec(2, 0)] },
      ]),
    ).toThrow(/longer than 65535/);
  });

  it("rejects wrong-dim vectors", () => {
    expect(() =>
      writePheb(join(dir(), "x.pheb"), "averaged", 3, [{ id: "a", vectors: [vec(2, 0)] }]),
    ).toThrow(/dim 2, expected 3/);
  });

  it("reports trailing bytes with their offset", () => {
    const path = join(dir(), "t.pheb");
    writePheb(path, "averaged", 2, [{ id: "a", vectors: [vec(2, 0)] }]);
    const good = readFileSync(path);
    writeFileSync(path, Buffer.concat([good, Buffer.from([9, 9, 9])]));
    expect(() => readPheb(path)).toThrow(
      new RegExp(`3 trailing bytes after the last record \\(offset ${good.length}\\)`),
    );
  });

  it("reports truncated vector data with an offset", () => {
    const path = join(dir(), "tr.pheb");
    writePheb(path, "averaged", 2, [{ id: "a", vectors: [vec(2, 0)] }]);
    writeFileSync(path, readFileSync(path).subarray(0, 20));
    expect(() => readPheb(path)).toThrow(/wanted 8 bytes for vectors of record 0/);
  });
});

describe("interop with the python reader/writer", () => {
  it("parses a file produced by phenotext embed synth", () => {
    const d = dir();
    const path = join(d, "py.pheb");
    execFileSync("phenotext", [
      "embed", "synth", "--n", "6", "--dim", "5", "--mode", "per_chunk",
      "--seed", "3", "--out", path,
    ]);
    const back = readPheb(path);
    expect(back.mode).toBe("per_chunk");
    expect(back.dim).toBe(5);
    expect(back.records.length).toBe(6);
    for (const rec of back.records) {
      expect(rec.vectors.length).toBeGreaterThanOrEqual(1);
      expect(rec.vectors[0].length).toBe(5);
    }
  });
});
