/**
 * Contiguous, non-overlapping, left-to-right chunks of at most `chunkSize`
 * tokens; the final chunk keeps its natural (shorter) length.  Boundary
 * semantics must stay identical to the training pipeline's chunker: the
 * interop suite compares both on a shared fixture corpus.
 */
export function chunkTokens(tokens: string[], chunkSize: number): string[][] {
  if (chunkSize < 1) {
    throw new Error(`chunk size must be >= 1, got ${chunkSize}`);
  }
  if (tokens.length === 0) {
    throw new Error("cannot chunk an empty token sequence");
  }
  const chunks: string[][] = [];
  for (let start = 0; start < tokens.length; start += chunkSize) {
    chunks.push(tokens.slice(start, start + chunkSize));
  }
  return chunks;
}
