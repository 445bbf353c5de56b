/**
 * Seeded determinism primitives mirrored on the evaluation toolkit's
 * definitions: FNV-1a 64-bit hashing and a splitmix64 stream, with the
 * top-53-bit mapping to doubles in [-1, 1). Same bytes in, same vector
 * out, on every platform.
 */

const M64 = (1n << 64n) - 1n;
const FNV_OFFSET = 0xcbf29ce484222325n;
const FNV_PRIME = 0x100000001b3n;
const GAMMA = 0x9e3779b97f4a7c15n;
const MIX1 = 0xbf58476d1ce4e5b9n;
const MIX2 = 0x94d049bb133111ebn;

export function fnv1a64(data: Uint8Array): bigint {
  let h = FNV_OFFSET;
  for (const byte of data) {
    h ^= BigInt(byte);
    h = (h * FNV_PRIME) & M64;
  }
  return h;
}

export function splitmix64Stream(seed: bigint, count: number): bigint[] {
  const out: bigint[] = new Array(count);
  let state = seed & M64;
  for (let i = 0; i < count; i++) {
    state = (state + GAMMA) & M64;
    let z = state;
    z = ((z ^ (z >> 30n)) * MIX1) & M64;
    z = ((z ^ (z >> 27n)) * MIX2) & M64;
    out[i] = z ^ (z >> 31n);
  }
  return out;
}

/** Top 53 bits of a u64 word mapped to a double in [-1, 1). */
export function unitSigned(word: bigint): number {
  return (Number(word >> 11n) / 2 ** 53) * 2 - 1;
}

/** Round half to even, matching the toolkit's 16-bit quantizer. */
export function rintTiesToEven(x: number): number {
  const floor = Math.floor(x);
  const diff = x - floor;
  if (diff > 0.5) return floor + 1;
  if (diff < 0.5) return floor;
  return floor % 2 === 0 ? floor : floor + 1;
}

/**
 * Canonical audio payload bytes: clamp to [-1, 1], quantize to int16 over a
 * 2^15 full scale, little-endian. A float master and the 16-bit master it
 * came from produce identical payloads.
 */
export function audioPayload(samples: Float32Array | Float64Array): Uint8Array {
  const out = new Uint8Array(samples.length * 2);
  const view = new DataView(out.buffer);
  for (let i = 0; i < samples.length; i++) {
    const clamped = Math.min(1, Math.max(-1, samples[i]));
    let q = rintTiesToEven(clamped * 32768);
    if (q > 32767) q = 32767;
    if (q < -32768) q = -32768;
    view.setInt16(i * 2, q, true);
  }
  return out;
}

/** Canonical text payload bytes: trimmed, lowercased UTF-8. */
export function textPayload(text: string): Uint8Array {
  return new TextEncoder().encode(text.trim().toLowerCase());
}
