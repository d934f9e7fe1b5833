import { readFileSync } from "node:fs";
import { join } from "node:path";

const MAX_WORD_CHARS = 100;

/** Greedy longest-match-first WordPiece over a newline-delimited vocab. */
export class WordPieceTokenizer {
  private vocab = new Map<string, number>();
  readonly padId: number;
  readonly unkId: number;
  readonly clsId: number;
  readonly sepId: number;

  constructor(vocabLines: string[]) {
    for (const line of vocabLines) {
      const token = line.trim();
      if (token && !this.vocab.has(token)) this.vocab.set(token, this.vocab.size);
    }
    for (const special of ["[PAD]", "[UNK]", "[CLS]", "[SEP]"]) {
      if (!this.vocab.has(special)) throw new Error(`vocab is missing ${special}`);
    }
    this.padId = this.vocab.get("[PAD]")!;
    this.unkId = this.vocab.get("[UNK]")!;
    this.clsId = this.vocab.get("[CLS]")!;
    this.sepId = this.vocab.get("[SEP]")!;
  }

  static fromFile(path: string): WordPieceTokenizer {
    return new WordPieceTokenizer(readFileSync(path, "utf-8").split("\n"));
  }

  static bundled(): WordPieceTokenizer {
    return WordPieceTokenizer.fromFile(join(__dirname, "..", "data", "vocab.txt"));
  }

  get size(): number {
    return this.vocab.size;
  }

  idOf(token: string): number | undefined {
    return this.vocab.get(token);
  }

  /** Content token ids for a text: no specials, lowercased, punctuation split off. */
  tokenize(text: string): number[] {
    const ids: number[] = [];
    const words = text.toLowerCase().match(/[a-z0-9]+|[^\sa-z0-9]/g) ?? [];
    for (const word of words) {
      for (const piece of this.wordpiece(word)) {
        ids.push(this.vocab.get(piece) ?? this.unkId);
      }
    }
    return ids;
  }

  private wordpiece(word: string): string[] {
    if (word.length > MAX_WORD_CHARS) return ["[UNK]"];
    const pieces: string[] = [];
    let start = 0;
    while (start < word.length) {
      let end = word.length;
      let match: string | null = null;
      while (end > start) {
        const candidate = (start > 0 ? "##" : "") + word.slice(start, end);
        if (this.vocab.has(candidate)) {
          match = candidate;
          break;
        }
        end--;
      }
      if (match === null) return ["[UNK]"];
      pieces.push(match);
      start = end;
    }
    return pieces;
  }
}
