import type { Encoder, EncodeRequest } from "./export.js";

/**
 * CLIP-family encoder backed by @huggingface/transformers (an optional
 * dependency: model weights are fetched on first use, so this path needs
 * network or a primed HF cache and is meant for real exports, not CI).
 *
 * Crops are taken on the raw decoded pixels before the processor runs, so
 * the encoder's own resizing is the only resampling applied.
 */

export const CLIP_MODELS: Record<string, string> = {
  "ViT-B/32": "Xenova/clip-vit-base-patch32",
  "ViT-B/16": "Xenova/clip-vit-base-patch16",
  "ViT-L/14": "Xenova/clip-vit-large-patch14",
};

interface RawImageLike {
  data: Uint8Array | Uint8ClampedArray;
  width: number;
  height: number;
  channels: number;
}

export function cropPixels<T extends RawImageLike>(
  image: T,
  box: [number, number, number, number],
  construct: (data: Uint8ClampedArray, width: number, height: number, channels: number) => T,
): T {
  const [bx, by, bw, bh] = box;
  const x0 = Math.max(0, Math.min(bx, image.width));
  const y0 = Math.max(0, Math.min(by, image.height));
  const x1 = Math.max(x0, Math.min(bx + bw, image.width));
  const y1 = Math.max(y0, Math.min(by + bh, image.height));
  const width = x1 - x0;
  const height = y1 - y0;
  if (width < 1 || height < 1) {
    throw new Error(`crop [${box.join(", ")}] lies outside a ${image.width}x${image.height} image`);
  }
  const channels = image.channels;
  const out = new Uint8ClampedArray(width * height * channels);
  for (let row = 0; row < height; row++) {
    const src = ((y0 + row) * image.width + x0) * channels;
    out.set(image.data.subarray(src, src + width * channels) as Uint8ClampedArray, row * width * channels);
  }
  return construct(out, width, height, channels);
}

function normalized(values: Float32Array): Float32Array {
  let squared = 0;
  for (let i = 0; i < values.length; i++) {
    squared += values[i]! * values[i]!;
  }
  const norm = Math.sqrt(squared);
  if (norm === 0) {
    throw new Error("encoder produced a zero vector");
  }
  const out = new Float32Array(values.length);
  for (let i = 0; i < values.length; i++) {
    out[i] = Math.fround(values[i]! / norm);
  }
  return out;
}

export class ClipEncoder implements Encoder {
  readonly id: string;
  readonly needsFiles = true;
  private readonly modelId: string;
  private towers: Promise<{
    tokenizer: any;
    textModel: any;
    processor: any;
    visionModel: any;
    RawImage: any;
  }> | null = null;

  constructor(name: string) {
    const modelId = CLIP_MODELS[name];
    if (!modelId) {
      const known = Object.keys(CLIP_MODELS).join(", ");
      throw new Error(`unknown encoder ${name} (known: ${known}, or "mock")`);
    }
    this.id = name;
    this.modelId = modelId;
  }

  private load() {
    if (!this.towers) {
      this.towers = (async () => {
        let lib: any;
        try {
          lib = await import("@huggingface/transformers");
        } catch {
          throw new Error(
            "the @huggingface/transformers package is not installed; " +
              'install it or export with "--model mock"',
          );
        }
        const [tokenizer, textModel, processor, visionModel] = await Promise.all([
          lib.AutoTokenizer.from_pretrained(this.modelId),
          lib.CLIPTextModelWithProjection.from_pretrained(this.modelId),
          lib.AutoProcessor.from_pretrained(this.modelId),
          lib.CLIPVisionModelWithProjection.from_pretrained(this.modelId),
        ]);
        return { tokenizer, textModel, processor, visionModel, RawImage: lib.RawImage };
      })();
    }
    return this.towers;
  }

  async encode(requests: EncodeRequest[]): Promise<Float32Array[]> {
    const { tokenizer, textModel, processor, visionModel, RawImage } = await this.load();
    const out: (Float32Array | null)[] = requests.map(() => null);

    const textIdx = requests.flatMap((r, i) => (r.kind === "text" ? [i] : []));
    if (textIdx.length > 0) {
      const prompts = textIdx.map((i) => requests[i]!.text!);
      const tokens = tokenizer(prompts, { padding: true, truncation: true });
      const { text_embeds } = await textModel(tokens);
      const [, width] = text_embeds.dims;
      const data = text_embeds.data as Float32Array;
      textIdx.forEach((target, row) => {
        out[target] = normalized(data.slice(row * width, (row + 1) * width));
      });
    }

    const imageIdx = requests.flatMap((r, i) => (r.kind === "text" ? [] : [i]));
    if (imageIdx.length > 0) {
      const images = [];
      for (const i of imageIdx) {
        const request = requests[i]!;
        let image = await RawImage.read(request.imagePath!);
        if (request.box) {
          image = cropPixels(
            image,
            request.box,
            (data, width, height, channels) => new RawImage(data, width, height, channels),
          );
        }
        images.push(image);
      }
      const inputs = await processor(images);
      const { image_embeds } = await visionModel(inputs);
      const [, width] = image_embeds.dims;
      const data = image_embeds.data as Float32Array;
      imageIdx.forEach((target, row) => {
        out[target] = normalized(data.slice(row * width, (row + 1) * width));
      });
    }

    return out as Float32Array[];
  }
}
