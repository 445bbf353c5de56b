/**
 * Encoder abstraction behind the HTTP surface.
 *
 * The built-in encoder is a deterministic hash projection: it needs no
 * checkpoint, no GPU, and produces bit-stable vectors, which makes it the
 * development/CI stand-in for a real pretrained audio-text model. A real
 * model (e.g. a CLAP checkpoint exported to ONNX) plugs in by implementing
 * the same interface and registering its kind in createEncoder.
 */

import { audioPayload, fnv1a64, splitmix64Stream, textPayload, unitSigned } from "./hash.js";

export interface AudioEmbedding {
  vector: Float64Array;
  truncated: boolean;
}

export interface Encoder {
  readonly modelId: string;
  readonly dim: number;
  /** Maximum clip length the model ingests; null means unlimited. */
  readonly windowSeconds: number | null;
  embedText(text: string): Float64Array;
  embedAudio(samples: Float64Array, sampleRate: number): AudioEmbedding;
}

const MODALITY_AUDIO = 0x41; // 'A'
const MODALITY_TEXT = 0x54; // 'T'

export class DeterministicHashEncoder implements Encoder {
  readonly modelId: string;
  readonly dim: number;
  readonly windowSeconds: number | null;

  constructor(dim = 512, windowSeconds: number | null = null, modelId?: string) {
    if (!Number.isInteger(dim) || dim < 1) {
      throw new Error(`dim must be a positive integer, got ${dim}`);
    }
    this.dim = dim;
    this.windowSeconds = windowSeconds;
    this.modelId = modelId ?? `hash-fnv1a-${dim}`;
  }

  private project(modalityByte: number, payload: Uint8Array): Float64Array {
    const seeded = new Uint8Array(payload.length + 1);
    seeded[0] = modalityByte;
    seeded.set(payload, 1);
    const words = splitmix64Stream(fnv1a64(seeded), this.dim);
    const vector = new Float64Array(this.dim);
    let sumsq = 0;
    for (let i = 0; i < this.dim; i++) {
      vector[i] = unitSigned(words[i]);
      sumsq += vector[i] * vector[i];
    }
    const norm = Math.sqrt(sumsq);
    for (let i = 0; i < this.dim; i++) {
      vector[i] /= norm;
    }
    return vector;
  }

  embedText(text: string): Float64Array {
    return this.project(MODALITY_TEXT, textPayload(text));
  }

  embedAudio(samples: Float64Array, sampleRate: number): AudioEmbedding {
    let cropped = samples;
    let truncated = false;
    if (this.windowSeconds !== null) {
      const windowSamples = Math.floor(this.windowSeconds * sampleRate);
      if (samples.length > windowSamples) {
        const start = Math.floor((samples.length - windowSamples) / 2);
        cropped = samples.subarray(start, start + windowSamples);
        truncated = true;
      }
    }
    return { vector: this.project(MODALITY_AUDIO, audioPayload(cropped)), truncated };
  }
}

export interface EncoderConfig {
  kind: string;
  dim: number;
  windowSeconds: number | null;
  modelId?: string;
  checkpointPath?: string;
}

export function configFromEnv(env: NodeJS.ProcessEnv = process.env): EncoderConfig {
  return {
    kind: env.ENCODER_KIND ?? "hash",
    dim: env.MODEL_DIM ? Number(env.MODEL_DIM) : 512,
    windowSeconds: env.WINDOW_SECONDS ? Number(env.WINDOW_SECONDS) : null,
    modelId: env.MODEL_ID,
    checkpointPath: env.CHECKPOINT_PATH,
  };
}

export function createEncoder(config: EncoderConfig): Encoder {
  if (config.kind === "hash") {
    return new DeterministicHashEncoder(config.dim, config.windowSeconds, config.modelId);
  }
  // checkpoint-backed kinds register here; checkpointPath is reserved for them
  throw new Error(`unknown encoder kind '${config.kind}' (built-in: hash)`);
}
