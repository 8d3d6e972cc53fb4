export { chunkTokens } from "./chunker";
export { readCorpus, CaseRecord } from "./corpus";
export { Encoder, HashRotorEncoder, resolveEncoder } from "./encoder";
export { runExport, ExportJob, ExportSummary } from "./export";
export { decodeSemt, encodeSemt, readSemt, writeSemt, SemtEntry, SemtFile } from "./semt";
export { tokenize } from "./tokenizer";
