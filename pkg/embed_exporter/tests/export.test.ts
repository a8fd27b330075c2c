import { existsSync } from "node:fs";
import { join } from "node:path";

import { describe, expect, it } from "vitest";

import { readArchive } from "../src/archive.js";
import type { Encoder, EncodeRequest } from "../src/export.js";
import { exportArchive } from "../src/export.js";
import { loadManifest } from "../src/manifest.js";
import { MockEncoder, mockEmbed } from "../src/mock.js";
import { fixture, tempDir } from "./helpers.js";

const MANIFEST = loadManifest(fixture("m.json"));

function mockOptions(outDir: string, batchSize?: number) {
  return {
    imagesDir: fixture("images"),
    atlasDir: fixture("atlas"),
    outDir,
    ...(batchSize === undefined ? {} : { batchSize }),
  };
}

/** Encoder that answers with whatever vector the test dictates. */
class StubEncoder implements Encoder {
  readonly id = "stub";
  readonly needsFiles = false;
  constructor(private readonly make: (request: EncodeRequest) => Float32Array) {}
  async encode(requests: EncodeRequest[]): Promise<Float32Array[]> {
    return requests.map(this.make);
  }
}

describe("exportArchive", () => {
  it("fills every manifest entry with the mock encoder", async () => {
    const out = tempDir("exp-");
    const summary = await exportArchive(MANIFEST, new MockEncoder(MANIFEST.dim), mockOptions(out));
    expect(summary).toMatchObject({ entries: 10, dim: 32, encoder: "mock:32" });
    const archive = readArchive(out);
    expect(archive.keys).toEqual(MANIFEST.entries.map((e) => e.key).sort());
    for (const key of archive.keys) {
      expect(Array.from(archive.get(key))).toEqual(Array.from(mockEmbed(key, 32)));
    }
  });

  it("exports a text-only manifest without touching any directory", async () => {
    const manifest = {
      version: 1 as const,
      encoder: "ViT-B/32",
      dim: 8,
      entries: [
        { key: "text:a1", kind: "text" as const, prompt: "a photo of rain" },
        { key: "text:b2", kind: "text" as const, prompt: "a photo of snow" },
        { key: "text:c3", kind: "text" as const, prompt: "a photo of fog" },
      ],
    };
    const out = tempDir("exp-");
    const summary = await exportArchive(manifest, new MockEncoder(8), {
      imagesDir: fixture("nowhere"),
      atlasDir: fixture("nowhere"),
      outDir: out,
    });
    expect(summary.entries).toBe(3);
    expect(readArchive(out).dim).toBe(8);
  });

  it("produces the same archive regardless of batch size", async () => {
    const small = tempDir("exp-");
    const large = tempDir("exp-");
    await exportArchive(MANIFEST, new MockEncoder(32), mockOptions(small, 3));
    await exportArchive(MANIFEST, new MockEncoder(32), mockOptions(large, 64));
    const a = readArchive(small);
    const b = readArchive(large);
    expect(a.keys).toEqual(b.keys);
    for (const key of a.keys) {
      expect(Array.from(a.get(key))).toEqual(Array.from(b.get(key)));
    }
  });

  it("fails before writing anything when a source file is missing", async () => {
    const out = tempDir("exp-");
    const options = { imagesDir: fixture("nowhere"), atlasDir: fixture("atlas"), outDir: out };
    await expect(exportArchive(MANIFEST, new MockEncoder(32), options)).rejects.toThrow(
      /missing source file for region:im0:10:20:50:100/,
    );
    expect(existsSync(join(out, "manifest.json"))).toBe(false);
  });

  it("rejects vectors that do not match the manifest dimension", async () => {
    const stub = new StubEncoder(() => mockEmbed("text:x", 16));
    await expect(
      exportArchive(MANIFEST, stub, mockOptions(tempDir("exp-"))),
    ).rejects.toThrow(/dimension mismatch .* encoder produced 16, manifest expects 32/);
  });

  it("rejects vectors that are not unit-norm", async () => {
    const stub = new StubEncoder(() => {
      const vec = new Float32Array(32);
      vec[0] = 0.5;
      return vec;
    });
    await expect(
      exportArchive(MANIFEST, stub, mockOptions(tempDir("exp-"))),
    ).rejects.toThrow(/not unit-norm/);
  });

  it("rejects an encoder that drops requests", async () => {
    const broken: Encoder = {
      id: "broken",
      needsFiles: false,
      async encode(requests) {
        return requests.slice(1).map((r) => mockEmbed(r.key, 32));
      },
    };
    await expect(
      exportArchive(MANIFEST, broken, mockOptions(tempDir("exp-"))),
    ).rejects.toThrow(/returned 9 vectors for a batch of 10/);
  });

  it("rejects a non-positive batch size", async () => {
    await expect(
      exportArchive(MANIFEST, new MockEncoder(32), mockOptions(tempDir("exp-"), 0)),
    ).rejects.toThrow(/batch size/);
  });
});
