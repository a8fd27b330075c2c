import { existsSync } from "node:fs";
import { join } from "node:path";

import { l2norm, writeArchive } from "./archive.js";
import type { Box, ExportManifest, ManifestEntry } from "./manifest.js";

/** What an encoder sees for one manifest entry, sources already located. */
export interface EncodeRequest {
  key: string;
  kind: ManifestEntry["kind"];
  /** Literal prompt, set for text entries. */
  text?: string;
  /** Absolute path of the source image or PNG, set for the other kinds. */
  imagePath?: string;
  /** Crop rectangle [x, y, w, h]; null means encode the whole image. */
  box?: Box | null;
}

export interface Encoder {
  readonly id: string;
  /** False lets the exporter skip decoding pixels (sources are still required to exist). */
  readonly needsFiles: boolean;
  encode(requests: EncodeRequest[]): Promise<Float32Array[]>;
}

export interface ExportOptions {
  imagesDir: string;
  atlasDir: string;
  outDir: string;
  batchSize?: number;
}

export interface ExportSummary {
  entries: number;
  dim: number;
  encoder: string;
  outDir: string;
}

const UNIT_NORM_TOLERANCE = 1e-4;

function toRequest(entry: ManifestEntry, imagesDir: string, atlasDir: string): EncodeRequest {
  switch (entry.kind) {
    case "text":
      return { key: entry.key, kind: "text", text: entry.prompt };
    case "region":
    case "union":
      return {
        key: entry.key,
        kind: entry.kind,
        imagePath: join(imagesDir, entry.image),
        box: entry.box,
      };
    case "spatial":
      return { key: entry.key, kind: "spatial", imagePath: join(atlasDir, entry.png), box: null };
  }
}

function* batches<T>(items: T[], size: number): Generator<T[]> {
  for (let start = 0; start < items.length; start += size) {
    yield items.slice(start, start + size);
  }
}

/**
 * Fill every manifest entry with a vector and write the archive.
 *
 * Sources are checked up front so a typo'd image directory fails before any
 * encoding happens. Vectors are validated against the manifest dimension
 * and must come back unit-norm; the encoder owns normalization so that
 * encoders with exact layouts (the mock) are written untouched.
 */
export async function exportArchive(
  manifest: ExportManifest,
  encoder: Encoder,
  options: ExportOptions,
): Promise<ExportSummary> {
  const batchSize = options.batchSize ?? 16;
  if (!Number.isInteger(batchSize) || batchSize < 1) {
    throw new Error(`batch size must be a positive integer, got ${batchSize}`);
  }
  const requests = manifest.entries.map((entry) =>
    toRequest(entry, options.imagesDir, options.atlasDir),
  );
  for (const request of requests) {
    if (request.imagePath !== undefined && !existsSync(request.imagePath)) {
      throw new Error(`missing source file for ${request.key}: ${request.imagePath}`);
    }
  }
  const pairs: [string, Float32Array][] = [];
  for (const batch of batches(requests, batchSize)) {
    const vectors = await encoder.encode(batch);
    if (vectors.length !== batch.length) {
      throw new Error(
        `encoder returned ${vectors.length} vectors for a batch of ${batch.length}`,
      );
    }
    batch.forEach((request, index) => {
      const vector = vectors[index]!;
      if (vector.length !== manifest.dim) {
        throw new Error(
          `dimension mismatch for ${request.key}: encoder produced ${vector.length}, ` +
            `manifest expects ${manifest.dim}`,
        );
      }
      const norm = l2norm(vector);
      if (Math.abs(norm - 1) > UNIT_NORM_TOLERANCE) {
        throw new Error(`vector for ${request.key} is not unit-norm (|v| = ${norm})`);
      }
      pairs.push([request.key, vector]);
    });
  }
  if (pairs.length === 0) {
    throw new Error("manifest has no entries to export");
  }
  writeArchive(pairs, options.outDir);
  return {
    entries: pairs.length,
    dim: manifest.dim,
    encoder: encoder.id,
    outDir: options.outDir,
  };
}
