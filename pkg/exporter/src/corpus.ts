import { readFileSync } from "node:fs";

export interface CorpusNote {
  id: string;
  text: string;
  label?: string;
}

/** Read a JSONL corpus ({"id","text","label"} per line, label optional here). */
export function readCorpusJsonl(path: string): CorpusNote[] {
  const raw = readFileSync(path, "utf-8");
  const notes: CorpusNote[] = [];
  const seen = new Set<string>();
  const lines = raw.split("\n");
  for (let i = 0; i < lines.length; i++) {
    const line = lines[i].trim();
    if (!line) continue;
    let rec: unknown;
    try {
      rec = JSON.parse(line);
    } catch (err) {
      throw new Error(`${path}: line ${i + 1}: invalid JSON: ${(err as Error).message}`);
    }
    if (typeof rec !== "object" || rec === null) {
      throw new Error(`${path}: line ${i + 1}: expected an object`);
    }
    const obj = rec as Record<string, unknown>;
    if (typeof obj.id !== "string" || typeof obj.text !== "string") {
      throw new Error(`${path}: line ${i + 1}: need string id and text fields`);
    }
    if (seen.has(obj.id)) {
      throw new Error(`${path}: line ${i + 1}: duplicate id ${JSON.stringify(obj.id)}`);
    }
    seen.add(obj.id);
    notes.push({
      id: obj.id,
      text: obj.text,
      label: typeof obj.label === "string" ? obj.label : undefined,
    });
  }
  return notes;
}
