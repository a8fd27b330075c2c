#!/usr/bin/env node
import { pathToFileURL } from "node:url";
import { parseArgs } from "node:util";

import { ClipEncoder } from "./clip.js";
import type { Encoder } from "./export.js";
import { exportArchive } from "./export.js";
import { loadManifest } from "./manifest.js";
import { MockEncoder } from "./mock.js";

const USAGE = `usage: embed-exporter export --manifest m.json --images DIR --atlas DIR --out DIR
                             [--model NAME] [--batch N]

Fills every entry of an embedding manifest and writes the archive
(manifest.json + vectors.bin) the evaluation pipeline reads.

options:
  --manifest FILE   embedding manifest produced by build-manifest
  --images DIR      directory holding the dataset images
  --atlas DIR       directory holding the rendered spatial PNGs
  --out DIR         archive output directory
  --model NAME      encoder: ViT-B/32, ViT-B/16, ViT-L/14, or "mock"
                    (default: the manifest's encoder field)
  --batch N         encoder batch size (default 16)
`;

function pickEncoder(name: string, dim: number): Encoder {
  if (name === "mock") {
    return new MockEncoder(dim);
  }
  return new ClipEncoder(name);
}

export async function run(argv: string[]): Promise<number> {
  if (argv[0] === "--help" || argv[0] === "-h") {
    process.stdout.write(USAGE);
    return 0;
  }
  if (argv[0] !== "export") {
    process.stderr.write(argv.length ? `unknown command: ${argv[0]}\n` : USAGE);
    return argv.length ? 1 : 2;
  }
  let values;
  try {
    ({ values } = parseArgs({
      args: argv.slice(1),
      options: {
        manifest: { type: "string" },
        images: { type: "string" },
        atlas: { type: "string" },
        out: { type: "string" },
        model: { type: "string" },
        batch: { type: "string", default: "16" },
      },
    }));
  } catch (err) {
    process.stderr.write(`${(err as Error).message}\n`);
    return 2;
  }
  for (const flag of ["manifest", "images", "atlas", "out"] as const) {
    if (!values[flag]) {
      process.stderr.write(`--${flag} is required\n${USAGE}`);
      return 2;
    }
  }
  try {
    const manifest = loadManifest(values.manifest!);
    const encoder = pickEncoder(values.model ?? manifest.encoder, manifest.dim);
    const summary = await exportArchive(manifest, encoder, {
      imagesDir: values.images!,
      atlasDir: values.atlas!,
      outDir: values.out!,
      batchSize: Number(values.batch),
    });
    process.stdout.write(
      `wrote ${summary.entries} vectors of dim ${summary.dim} ` +
        `(${summary.encoder}) to ${summary.outDir}\n`,
    );
    return 0;
  } catch (err) {
    process.stderr.write(`error: ${(err as Error).message}\n`);
    return 1;
  }
}

if (process.argv[1] && import.meta.url === pathToFileURL(process.argv[1]).href) {
  run(process.argv.slice(2)).then((code) => {
    process.exitCode = code;
  });
}
