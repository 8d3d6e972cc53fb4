import * as crypto from "crypto";
import * as fs from "fs";

import { chunkTokens } from "./chunker";
import { readCorpus } from "./corpus";
import { Encoder, resolveEncoder } from "./encoder";
import { SemtEntry, writeSemt } from "./semt";

export interface ExportJob {
  corpusPath: string;
  modelId: string;
  chunkSize: number;
  outPath: string;
}

export interface ExportSummary {
  documents: number;
  entries: number;
  dimension: number;
  manifestPath: string;
}

function sha256(path: string): string {
  return crypto.createHash("sha256").update(fs.readFileSync(path)).digest("hex");
}

function toFloat32(rows: Float64Array[]): Float32Array {
  const dim = rows[0].length;
  const out = new Float32Array(rows.length * dim);
  rows.forEach((row, r) => {
    for (let j = 0; j < dim; j++) {
      out[r * dim + j] = Math.fround(row[j]);
    }
  });
  return out;
}

/**
 * Encode every (document, chunk) pair and write one SEMT entry per pair,
 * keyed by (document id, chunk index), plus a JSON manifest next to the
 * output recording the model, chunk size and corpus hash.
 */
export function runExport(job: ExportJob): ExportSummary {
  const encoder: Encoder = resolveEncoder(job.modelId);
  if (job.chunkSize > encoder.positionalLimit) {
    throw new Error(
      `chunk size ${job.chunkSize} exceeds the encoder's positional limit ${encoder.positionalLimit}`,
    );
  }
  const docs = readCorpus(job.corpusPath);
  const entries: SemtEntry[] = [];
  for (const doc of docs) {
    const chunks = chunkTokens(doc.tokens, job.chunkSize);
    chunks.forEach((chunk, index) => {
      const rows = encoder.encodeChunk(chunk, index);
      entries.push({
        id: doc.id,
        chunkIndex: index,
        rows: toFloat32(rows),
        rowCount: rows.length,
      });
    });
  }
  writeSemt(job.outPath, encoder.dimension, entries);
  const manifest = {
    model: encoder.id,
    chunkSize: job.chunkSize,
    dimension: encoder.dimension,
    corpus: job.corpusPath,
    corpusSha256: sha256(job.corpusPath),
    documents: docs.length,
    entries: entries.length,
  };
  const manifestPath = `${job.outPath}.manifest.json`;
  fs.writeFileSync(manifestPath, JSON.stringify(manifest, null, 2) + "\n");
  return {
    documents: docs.length,
    entries: entries.length,
    dimension: encoder.dimension,
    manifestPath,
  };
}
