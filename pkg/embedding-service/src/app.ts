/**
 * Express app implementing the embedding wire protocol.
 *
 * POST /v1/embeddings/text   {"texts": [string, ...]}
 * POST /v1/embeddings/audio  {"sample_rate": int, "audios": [base64 f32le, ...]}
 * GET  /v1/health
 *
 * Responses: {"model_id", "dim", "embeddings"} (+ "truncated" per audio
 * item). Non-2xx bodies always carry {"error": string}. The service
 * answers 503 until its encoder is loaded.
 */

import express, { type Express, type Request, type Response } from "express";
import { z } from "zod";

import type { Encoder } from "./encoder.js";

export interface AppState {
  encoder: Encoder | null;
}

const textRequestSchema = z.object({
  texts: z.array(z.string()).min(1),
});

const audioRequestSchema = z.object({
  sample_rate: z.number().int().positive(),
  audios: z.array(z.string()).min(1),
});

const MIN_CLIP_SECONDS = 0.1;
const BASE64_PATTERN = /^[A-Za-z0-9+/]*={0,2}$/;

function sendError(res: Response, status: number, message: string): void {
  res.status(status).json({ error: message });
}

function decodeSamples(b64: string): Float64Array | null {
  if (b64.length % 4 !== 0 || !BASE64_PATTERN.test(b64)) {
    return null;
  }
  const raw = Buffer.from(b64, "base64");
  if (raw.byteLength % 4 !== 0) {
    return null;
  }
  const view = new DataView(raw.buffer, raw.byteOffset, raw.byteLength);
  const samples = new Float64Array(raw.byteLength / 4);
  for (let i = 0; i < samples.length; i++) {
    samples[i] = view.getFloat32(i * 4, true);
  }
  return samples;
}

export function createApp(state: AppState): Express {
  const app = express();
  app.use(express.json({ limit: "256mb" }));

  // malformed JSON from express.json lands here
  app.use((err: unknown, _req: Request, res: Response, next: (e?: unknown) => void) => {
    if (err instanceof SyntaxError) {
      return sendError(res, 400, "malformed JSON body");
    }
    next(err);
  });

  app.get("/v1/health", (_req, res) => {
    if (!state.encoder) {
      return sendError(res, 503, "model not loaded");
    }
    res.json({ status: "ok", model_id: state.encoder.modelId, dim: state.encoder.dim });
  });

  app.post("/v1/embeddings/text", (req, res) => {
    const encoder = state.encoder;
    if (!encoder) {
      return sendError(res, 503, "model not loaded");
    }
    const parsed = textRequestSchema.safeParse(req.body);
    if (!parsed.success) {
      return sendError(res, 400, `malformed request: ${parsed.error.issues[0]?.message}`);
    }
    const { texts } = parsed.data;
    const blankIndex = texts.findIndex((t) => t.trim().length === 0);
    if (blankIndex >= 0) {
      return sendError(res, 422, `text at index ${blankIndex} is empty after trimming`);
    }
    const embeddings = texts.map((t) => Array.from(encoder.embedText(t)));
    res.json({ model_id: encoder.modelId, dim: encoder.dim, embeddings });
  });

  app.post("/v1/embeddings/audio", (req, res) => {
    const encoder = state.encoder;
    if (!encoder) {
      return sendError(res, 503, "model not loaded");
    }
    const parsed = audioRequestSchema.safeParse(req.body);
    if (!parsed.success) {
      return sendError(res, 400, `malformed request: ${parsed.error.issues[0]?.message}`);
    }
    const { sample_rate: sampleRate, audios } = parsed.data;
    const embeddings: number[][] = [];
    const truncated: boolean[] = [];
    for (let i = 0; i < audios.length; i++) {
      const samples = decodeSamples(audios[i]);
      if (samples === null) {
        return sendError(
          res,
          400,
          `audio at index ${i}: payload is not valid base64 of little-endian float32`,
        );
      }
      if (samples.length / sampleRate < MIN_CLIP_SECONDS) {
        return sendError(
          res,
          422,
          `audio at index ${i}: clip shorter than ${MIN_CLIP_SECONDS} s`,
        );
      }
      const result = encoder.embedAudio(samples, sampleRate);
      embeddings.push(Array.from(result.vector));
      truncated.push(result.truncated);
    }
    res.json({ model_id: encoder.modelId, dim: encoder.dim, embeddings, truncated });
  });

  app.use((_req, res) => sendError(res, 404, "no such route"));

  return app;
}
