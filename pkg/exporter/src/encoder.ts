/**
 * Chunk encoders.  An encoder turns one chunk of tokens into a matrix of
 * hidden-state rows: row 0 is the first-position (CLS-role) vector, rows
 * 1..n correspond to the chunk's tokens in order.
 *
 * The built-in `hash-rotor-<dim>` family is fully deterministic and offline:
 * token vectors come from seeded integer hashing, mixed with a decaying
 * left-context state so rows are mildly contextual.  Hosted transformer
 * models (BERT/XLNet-class) plug in by implementing the same interface;
 * they are not bundled because this tool must run without model downloads.
 */

export interface Encoder {
  readonly id: string;
  readonly dimension: number;
  /** Hard cap on tokens per chunk (transformer positional limit analogue). */
  readonly positionalLimit: number;
  encodeChunk(tokens: string[], chunkIndex: number): Float64Array[];
}

/** FNV-1a, 32 bit; stable across platforms. */
export function fnv1a(text: string, seed: number): number {
  let hash = (0x811c9dc5 ^ seed) >>> 0;
  for (let i = 0; i < text.length; i++) {
    hash ^= text.charCodeAt(i);
    hash = Math.imul(hash, 0x01000193) >>> 0;
  }
  return hash >>> 0;
}

function laneValue(token: string, lane: number): number {
  // map a 32-bit hash into [-1, 1)
  return (fnv1a(token, lane * 0x9e3779b9) / 0x80000000) - 1.0;
}

export class HashRotorEncoder implements Encoder {
  readonly id: string;
  readonly dimension: number;
  readonly positionalLimit = 512;
  private readonly contextDecay = 0.5;

  constructor(dimension: number) {
    if (!Number.isInteger(dimension) || dimension < 1) {
      throw new Error(`encoder dimension must be a positive integer, got ${dimension}`);
    }
    this.dimension = dimension;
    this.id = `hash-rotor-${dimension}`;
  }

  tokenVector(token: string): Float64Array {
    const vec = new Float64Array(this.dimension);
    for (let lane = 0; lane < this.dimension; lane++) {
      vec[lane] = laneValue(token, lane);
    }
    return vec;
  }

  encodeChunk(tokens: string[], chunkIndex: number): Float64Array[] {
    if (tokens.length === 0) {
      throw new Error("cannot encode an empty chunk");
    }
    if (tokens.length > this.positionalLimit) {
      throw new Error(
        `chunk of ${tokens.length} tokens exceeds the encoder's positional limit ${this.positionalLimit}`,
      );
    }
    const rows: Float64Array[] = [];
    let context = new Float64Array(this.dimension);
    for (const token of tokens) {
      const base = this.tokenVector(token);
      const row = new Float64Array(this.dimension);
      for (let j = 0; j < this.dimension; j++) {
        row[j] = base[j] + this.contextDecay * context[(j + 1) % this.dimension];
      }
      rows.push(row);
      context = row;
    }
    // CLS-role vector: summary of the chunk's rows, tagged with the index lane
    const cls = new Float64Array(this.dimension);
    for (const row of rows) {
      for (let j = 0; j < this.dimension; j++) {
        cls[j] += row[j] / rows.length;
      }
    }
    cls[0] += Math.tanh(chunkIndex / 16.0);
    return [cls, ...rows];
  }
}

const HASH_ROTOR = /^hash-rotor-(\d+)$/;

/** Resolve a model identifier; throws when the encoder cannot be loaded. */
export function resolveEncoder(modelId: string): Encoder {
  const match = HASH_ROTOR.exec(modelId);
  if (match) {
    return new HashRotorEncoder(parseInt(match[1], 10));
  }
  throw new Error(
    `cannot load encoder ${modelId}: only the deterministic hash-rotor-<dim> family ships with this tool`,
  );
}
