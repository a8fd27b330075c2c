import { createHash } from "node:crypto";

import type { Encoder, EncodeRequest } from "./export.js";

/**
 * Deterministic stand-in encoder: every vector is derived from the key
 * string alone, so no weights, no pixels, and no network are involved.
 *
 * The byte layout is fixed so independent implementations agree bit for bit
 * at float32: SHA-256(key || counter) in counter mode with a 4-byte
 * big-endian counter starting at 0; the stream is consumed as big-endian
 * uint32 words; each word u maps to x = u/2^31 - 1 in float64; the squared
 * norm accumulates left to right in float64; each component is x/norm cast
 * to float32. A zero stream (never observed) would yield the first basis
 * vector.
 */
export function mockEmbed(key: string, dim: number): Float32Array {
  if (dim < 2) {
    throw new RangeError("dim must be >= 2");
  }
  const seed = Buffer.from(key, "utf8");
  const counterBuf = Buffer.alloc(4);
  const chunks: Buffer[] = [];
  let have = 0;
  for (let counter = 0; have < dim * 4; counter++) {
    counterBuf.writeUInt32BE(counter, 0);
    const digest = createHash("sha256").update(seed).update(counterBuf).digest();
    chunks.push(digest);
    have += digest.length;
  }
  const stream = Buffer.concat(chunks);
  const components = new Float64Array(dim);
  let squared = 0;
  for (let i = 0; i < dim; i++) {
    const x = stream.readUInt32BE(i * 4) / 2147483648 - 1;
    components[i] = x;
    squared += x * x;
  }
  const out = new Float32Array(dim);
  if (squared === 0) {
    out[0] = 1;
    return out;
  }
  const norm = Math.sqrt(squared);
  for (let i = 0; i < dim; i++) {
    out[i] = Math.fround(components[i]! / norm);
  }
  return out;
}

export class MockEncoder implements Encoder {
  readonly id: string;
  readonly needsFiles = false;
  private readonly dim: number;

  constructor(dim: number) {
    this.id = `mock:${dim}`;
    this.dim = dim;
  }

  async encode(requests: EncodeRequest[]): Promise<Float32Array[]> {
    return requests.map((request) => mockEmbed(request.key, this.dim));
  }
}
