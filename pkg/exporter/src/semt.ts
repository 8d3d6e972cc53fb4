/**
 * The SEMT binary tensor container, little-endian:
 *
 *   magic "SEMT" | u32 version | u32 dimension | u32 entryCount
 *   per entry: u16 idLen | id bytes (UTF-8) | u32 chunkIndex | u32 rowCount
 *              | rowCount * dimension float32
 *
 * Byte-for-byte compatible with the training pipeline's reader and its
 * `validate` command.
 */

import * as fs from "fs";

export const MAGIC = "SEMT";
export const VERSION = 1;

export interface SemtEntry {
  id: string;
  chunkIndex: number;
  /** rowCount x dimension, row-major. */
  rows: Float32Array;
  rowCount: number;
}

export function encodeSemt(dimension: number, entries: SemtEntry[]): Buffer {
  if (!Number.isInteger(dimension) || dimension < 1) {
    throw new Error(`dimension must be a positive integer, got ${dimension}`);
  }
  const parts: Buffer[] = [];
  const header = Buffer.alloc(16);
  header.write(MAGIC, 0, "ascii");
  header.writeUInt32LE(VERSION, 4);
  header.writeUInt32LE(dimension, 8);
  header.writeUInt32LE(entries.length, 12);
  parts.push(header);
  for (const entry of entries) {
    const idBytes = Buffer.from(entry.id, "utf-8");
    if (idBytes.length > 0xffff) {
      throw new Error(`entry id too long: ${entry.id}`);
    }
    if (entry.rows.length !== entry.rowCount * dimension) {
      throw new Error(
        `entry ${entry.id}[${entry.chunkIndex}]: ${entry.rows.length} values != ` +
          `${entry.rowCount} rows x ${dimension}`,
      );
    }
    const head = Buffer.alloc(2 + idBytes.length + 8);
    head.writeUInt16LE(idBytes.length, 0);
    idBytes.copy(head, 2);
    head.writeUInt32LE(entry.chunkIndex, 2 + idBytes.length);
    head.writeUInt32LE(entry.rowCount, 6 + idBytes.length);
    parts.push(head);
    const payload = Buffer.alloc(entry.rows.length * 4);
    for (let i = 0; i < entry.rows.length; i++) {
      payload.writeFloatLE(entry.rows[i], i * 4);
    }
    parts.push(payload);
  }
  return Buffer.concat(parts);
}

export function writeSemt(path: string, dimension: number, entries: SemtEntry[]): void {
  fs.writeFileSync(path, encodeSemt(dimension, entries));
}

export interface SemtFile {
  dimension: number;
  entries: SemtEntry[];
}

export function decodeSemt(data: Buffer): SemtFile {
  if (data.length < 16) {
    throw new Error("truncated: shorter than the header");
  }
  if (data.toString("ascii", 0, 4) !== MAGIC) {
    throw new Error(`bad magic ${JSON.stringify(data.toString("ascii", 0, 4))}`);
  }
  const version = data.readUInt32LE(4);
  if (version !== VERSION) {
    throw new Error(`unsupported version ${version}`);
  }
  const dimension = data.readUInt32LE(8);
  const count = data.readUInt32LE(12);
  const entries: SemtEntry[] = [];
  let offset = 16;
  for (let n = 0; n < count; n++) {
    if (offset + 2 > data.length) throw new Error(`truncated at byte ${offset}`);
    const idLen = data.readUInt16LE(offset);
    offset += 2;
    if (offset + idLen + 8 > data.length) throw new Error(`truncated at byte ${offset}`);
    const id = data.toString("utf-8", offset, offset + idLen);
    offset += idLen;
    const chunkIndex = data.readUInt32LE(offset);
    const rowCount = data.readUInt32LE(offset + 4);
    offset += 8;
    const valueCount = rowCount * dimension;
    if (offset + valueCount * 4 > data.length) throw new Error(`truncated at byte ${offset}`);
    const rows = new Float32Array(valueCount);
    for (let i = 0; i < valueCount; i++) {
      rows[i] = data.readFloatLE(offset + i * 4);
    }
    offset += valueCount * 4;
    entries.push({ id, chunkIndex, rows, rowCount });
  }
  if (offset !== data.length) {
    throw new Error(`${data.length - offset} trailing bytes`);
  }
  return { dimension, entries };
}

export function readSemt(path: string): SemtFile {
  return decodeSemt(fs.readFileSync(path));
}
