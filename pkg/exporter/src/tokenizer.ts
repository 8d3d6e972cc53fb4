/** Whitespace tokenization after lowercasing, matching the training pipeline. */
export function tokenize(text: string): string[] {
  return text.toLowerCase().split(/\s+/).filter((t) => t.length > 0);
}
