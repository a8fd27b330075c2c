import { readFileSync } from "node:fs";
import { z } from "zod";

/**
 * The embedding manifest is the hand-off file produced by the evaluation
 * pipeline's `build-manifest` command. Each entry names one vector by its
 * key and carries enough source detail to compute it: the literal prompt
 * for text keys, an image filename plus integer crop box for region/union
 * keys, and a pre-rendered PNG filename for spatial keys.
 */

const box = z.tuple([z.number().int(), z.number().int(), z.number().int(), z.number().int()]);

const textEntry = z.object({
  key: z.string(),
  kind: z.literal("text"),
  prompt: z.string(),
});

const cropEntry = z.object({
  key: z.string(),
  kind: z.enum(["region", "union"]),
  image: z.string(),
  box,
});

const spatialEntry = z.object({
  key: z.string(),
  kind: z.literal("spatial"),
  png: z.string(),
});

const entrySchema = z.discriminatedUnion("kind", [textEntry, cropEntry, spatialEntry]);

const manifestSchema = z.object({
  version: z.literal(1),
  encoder: z.string().min(1),
  dim: z.number().int().min(2),
  entries: z.array(entrySchema),
});

export type ManifestEntry = z.infer<typeof entrySchema>;
export type ExportManifest = z.infer<typeof manifestSchema>;
export type Box = z.infer<typeof box>;

export function parseManifest(raw: unknown): ExportManifest {
  const result = manifestSchema.safeParse(raw);
  if (!result.success) {
    const issue = result.error.issues[0];
    const where = issue && issue.path.length ? ` at ${issue.path.join(".")}` : "";
    throw new Error(`invalid manifest${where}: ${issue ? issue.message : "unknown"}`);
  }
  const seen = new Set<string>();
  for (const entry of result.data.entries) {
    if (seen.has(entry.key)) {
      throw new Error(`invalid manifest: duplicate key ${entry.key}`);
    }
    seen.add(entry.key);
  }
  return result.data;
}

export function loadManifest(path: string): ExportManifest {
  let text: string;
  try {
    text = readFileSync(path, "utf8");
  } catch (err) {
    throw new Error(`cannot read manifest ${path}: ${(err as Error).message}`);
  }
  let raw: unknown;
  try {
    raw = JSON.parse(text);
  } catch (err) {
    throw new Error(`manifest ${path} is not valid JSON: ${(err as Error).message}`);
  }
  return parseManifest(raw);
}
