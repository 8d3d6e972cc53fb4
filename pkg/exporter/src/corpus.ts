import * as fs from "fs";

import { tokenize } from "./tokenizer";

export interface CaseRecord {
  id: string;
  tokens: string[];
}

/** Read a JSON-lines corpus; records carry either `tokens` or raw `text`. */
export function readCorpus(path: string): CaseRecord[] {
  const lines = fs.readFileSync(path, "utf-8").split("\n");
  const records: CaseRecord[] = [];
  lines.forEach((line, index) => {
    const trimmed = line.trim();
    if (!trimmed) return;
    let parsed: unknown;
    try {
      parsed = JSON.parse(trimmed);
    } catch (err) {
      throw new Error(`${path}:${index + 1}: invalid record: ${(err as Error).message}`);
    }
    const rec = parsed as { id?: unknown; tokens?: unknown; text?: unknown };
    if (typeof rec.id !== "string") {
      throw new Error(`${path}:${index + 1}: record needs a string id`);
    }
    let tokens: string[];
    if (Array.isArray(rec.tokens)) {
      tokens = rec.tokens.map(String);
    } else if (typeof rec.text === "string") {
      tokens = tokenize(rec.text);
    } else {
      throw new Error(`${path}:${index + 1}: record needs tokens or text`);
    }
    if (tokens.length === 0) {
      throw new Error(`${path}:${index + 1}: document ${rec.id} has no tokens`);
    }
    records.push({ id: rec.id, tokens });
  });
  return records;
}
