#!/usr/bin/env node
/**
 * semt-export: encode chunked case documents into the SEMT tensor container.
 *
 *   semt-export export --corpus docs.jsonl --model hash-rotor-32 \
 *                      --chunk-size 512 --out embeddings.semt
 *
 * Exit codes: 0 ok, 1 internal error, 2 input error.
 */

import { runExport } from "./export";

function parseArgs(argv: string[]): Map<string, string> {
  const flags = new Map<string, string>();
  for (let i = 0; i < argv.length; i += 2) {
    const key = argv[i];
    if (!key.startsWith("--") || i + 1 >= argv.length) {
      throw new Error(`expected --flag value pairs, got ${argv.slice(i).join(" ")}`);
    }
    flags.set(key.slice(2), argv[i + 1]);
  }
  return flags;
}

function required(flags: Map<string, string>, name: string): string {
  const value = flags.get(name);
  if (value === undefined) {
    throw new Error(`missing required flag --${name}`);
  }
  return value;
}

export function main(argv: string[]): number {
  const [command, ...rest] = argv;
  if (command !== "export") {
    process.stderr.write(`usage: semt-export export --corpus F --model M --chunk-size N --out F\n`);
    return 2;
  }
  try {
    const flags = parseArgs(rest);
    const summary = runExport({
      corpusPath: required(flags, "corpus"),
      modelId: required(flags, "model"),
      chunkSize: parseInt(required(flags, "chunk-size"), 10),
      outPath: required(flags, "out"),
    });
    process.stdout.write(
      `exported ${summary.entries} chunk tensors (dimension ${summary.dimension}) ` +
        `from ${summary.documents} documents; manifest at ${summary.manifestPath}\n`,
    );
    return 0;
  } catch (err) {
    process.stderr.write(`export failed: ${(err as Error).message}\n`);
    return 2;
  }
}

if (require.main === module) {
  process.exit(main(process.argv.slice(2)));
}
