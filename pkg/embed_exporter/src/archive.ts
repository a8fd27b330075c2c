import { existsSync, mkdirSync, readFileSync, renameSync, statSync, writeFileSync } from "node:fs";
import { join } from "node:path";

/**
 * The archive is two files the evaluation pipeline memory-maps:
 *
 *   manifest.json  {"dim": D, "dtype": "f32le", "entries": {key: byteOffset}}
 *   vectors.bin    little-endian float32, one record of D floats per key
 *
 * Keys are sorted and offsets are consecutive whole records, so the reader
 * can validate the layout without touching the blob.
 */

export const ARCHIVE_MANIFEST = "manifest.json";
export const ARCHIVE_VECTORS = "vectors.bin";
export const ARCHIVE_DTYPE = "f32le";

function atomicWrite(path: string, data: Buffer | string): void {
  const tmp = `${path}.tmp-${process.pid}`;
  writeFileSync(tmp, data);
  renameSync(tmp, path);
}

export function writeArchive(entries: Iterable<[string, Float32Array]>, outDir: string): void {
  const byKey = new Map<string, Float32Array>();
  let dim: number | null = null;
  for (const [key, vector] of entries) {
    if (byKey.has(key)) {
      throw new Error(`duplicate archive key ${key}`);
    }
    if (dim === null) {
      dim = vector.length;
    } else if (vector.length !== dim) {
      throw new Error(`vector for ${key} has dim ${vector.length}, expected ${dim}`);
    }
    byKey.set(key, vector);
  }
  if (dim === null) {
    throw new Error("cannot write an empty archive");
  }
  const sorted = [...byKey.keys()].sort();
  const record = dim * 4;
  const offsets: Record<string, number> = {};
  const blob = Buffer.alloc(sorted.length * record);
  sorted.forEach((key, index) => {
    offsets[key] = index * record;
    const vector = byKey.get(key)!;
    for (let i = 0; i < dim!; i++) {
      blob.writeFloatLE(vector[i]!, index * record + i * 4);
    }
  });
  const doc = { dim, dtype: ARCHIVE_DTYPE, entries: offsets };
  mkdirSync(outDir, { recursive: true });
  atomicWrite(join(outDir, ARCHIVE_MANIFEST), JSON.stringify(doc, null, 2) + "\n");
  atomicWrite(join(outDir, ARCHIVE_VECTORS), blob);
}

export interface Archive {
  dim: number;
  keys: string[];
  get(key: string): Float32Array;
}

export function readArchive(dir: string): Archive {
  const manifestPath = join(dir, ARCHIVE_MANIFEST);
  const blobPath = join(dir, ARCHIVE_VECTORS);
  if (!existsSync(manifestPath) || !existsSync(blobPath)) {
    throw new Error(`archive at ${dir} is missing ${ARCHIVE_MANIFEST} or ${ARCHIVE_VECTORS}`);
  }
  let doc: { dim?: unknown; dtype?: unknown; entries?: unknown };
  try {
    doc = JSON.parse(readFileSync(manifestPath, "utf8"));
  } catch (err) {
    throw new Error(`archive manifest is not valid JSON: ${(err as Error).message}`);
  }
  if (doc.dtype !== ARCHIVE_DTYPE) {
    throw new Error(`unsupported archive dtype ${JSON.stringify(doc.dtype)}`);
  }
  const dim = doc.dim;
  if (typeof dim !== "number" || !Number.isInteger(dim) || dim < 1) {
    throw new Error(`bad archive dimension ${JSON.stringify(dim)}`);
  }
  const offsets = doc.entries;
  if (typeof offsets !== "object" || offsets === null || Array.isArray(offsets)) {
    throw new Error("archive manifest entries must be a mapping");
  }
  const entries = offsets as Record<string, number>;
  const keys = Object.keys(entries).sort();
  const record = dim * 4;
  keys.forEach((key, index) => {
    if (entries[key] !== index * record) {
      throw new Error("archive offsets are not increasing whole records over sorted keys");
    }
  });
  const blobSize = statSync(blobPath).size;
  if (blobSize !== keys.length * record) {
    throw new Error(`archive blob holds ${blobSize} bytes, expected ${keys.length * record}`);
  }
  const blob = readFileSync(blobPath);
  return {
    dim,
    keys,
    get(key: string): Float32Array {
      const offset = entries[key];
      if (offset === undefined) {
        throw new Error(`embedding key not found: ${key}`);
      }
      const out = new Float32Array(dim);
      for (let i = 0; i < dim; i++) {
        out[i] = blob.readFloatLE(offset + i * 4);
      }
      return out;
    },
  };
}

/** Euclidean norm accumulated in float64, the same way the reader checks it. */
export function l2norm(vector: Float32Array): number {
  let squared = 0;
  for (let i = 0; i < vector.length; i++) {
    squared += vector[i]! * vector[i]!;
  }
  return Math.sqrt(squared);
}

export function cosine(u: Float32Array, v: Float32Array): number {
  if (u.length !== v.length) {
    throw new Error(`cosine over lengths ${u.length} and ${v.length}`);
  }
  let dot = 0;
  for (let i = 0; i < u.length; i++) {
    dot += u[i]! * v[i]!;
  }
  const denom = l2norm(u) * l2norm(v);
  if (denom === 0) {
    throw new Error("cosine with a zero vector");
  }
  return Math.max(-1, Math.min(1, dot / denom));
}
