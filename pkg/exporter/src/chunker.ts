/** Encoder sequence limit is 512 including [CLS]/[SEP], so 510 content tokens. */
export const MAX_CONTENT_TOKENS = 510;

export interface Chunk {
  ids: number[]; // [CLS] + content slice + [SEP]
  mask: number[]; // attention mask, same length as ids
}

/**
 * Split content tokens into consecutive non-overlapping chunks of at most
 * MAX_CONTENT_TOKENS, each framed with the [CLS]/[SEP] specials. An empty
 * token list yields no chunks (the caller skips the note).
 */
export function planChunks(contentIds: number[], clsId: number, sepId: number): Chunk[] {
  const chunks: Chunk[] = [];
  for (let start = 0; start < contentIds.length; start += MAX_CONTENT_TOKENS) {
    const body = contentIds.slice(start, start + MAX_CONTENT_TOKENS);
    const ids = [clsId, ...body, sepId];
    chunks.push({ ids, mask: ids.map(() => 1) });
  }
  return chunks;
}
