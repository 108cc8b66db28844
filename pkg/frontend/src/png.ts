// Minimal 8-bit grayscale PNG encoder (stored-deflate blocks, no
// compression) plus a stroke rasterizer. Kept dependency-free so sketch
// export works identically in the browser and under jsdom.

const CRC_TABLE = (() => {
  const t = new Uint32Array(256);
  for (let n = 0; n < 256; n++) {
    let c = n;
    for (let k = 0; k < 8; k++) c = c & 1 ? 0xedb88320 ^ (c >>> 1) : c >>> 1;
    t[n] = c >>> 0;
  }
  return t;
})();

function crc32(bytes: Uint8Array): number {
  let c = 0xffffffff;
  for (let i = 0; i < bytes.length; i++) {
    c = CRC_TABLE[(c ^ bytes[i]) & 0xff] ^ (c >>> 8);
  }
  return (c ^ 0xffffffff) >>> 0;
}

function adler32(bytes: Uint8Array): number {
  let a = 1;
  let b = 0;
  for (let i = 0; i < bytes.length; i++) {
    a = (a + bytes[i]) % 65521;
    b = (b + a) % 65521;
  }
  return ((b << 16) | a) >>> 0;
}

function u32(n: number): Uint8Array {
  return new Uint8Array([(n >>> 24) & 0xff, (n >>> 16) & 0xff, (n >>> 8) & 0xff, n & 0xff]);
}

function chunk(type: string, data: Uint8Array): Uint8Array {
  const tag = new TextEncoder().encode(type);
  const body = new Uint8Array(tag.length + data.length);
  body.set(tag);
  body.set(data, tag.length);
  const out = new Uint8Array(4 + body.length + 4);
  out.set(u32(data.length));
  out.set(body, 4);
  out.set(u32(crc32(body)), 4 + body.length);
  return out;
}

/** Raw zlib stream of stored (uncompressed) deflate blocks. */
function storedZlib(raw: Uint8Array): Uint8Array {
  const blocks: Uint8Array[] = [new Uint8Array([0x78, 0x01])];
  const max = 65535;
  for (let off = 0; off < raw.length || off === 0; off += max) {
    const part = raw.subarray(off, Math.min(off + max, raw.length));
    const last = off + max >= raw.length ? 1 : 0;
    const len = part.length;
    const head = new Uint8Array([last, len & 0xff, len >> 8, ~len & 0xff, (~len >> 8) & 0xff]);
    blocks.push(head, part);
    if (last) break;
  }
  blocks.push(u32(adler32(raw)));
  const total = blocks.reduce((n, b) => n + b.length, 0);
  const out = new Uint8Array(total);
  let pos = 0;
  for (const b of blocks) {
    out.set(b, pos);
    pos += b.length;
  }
  return out;
}

/** Encode row-major grayscale pixels (0..255) as a PNG file. */
export function encodeGrayPng(pixels: Uint8Array, width: number, height: number): Uint8Array {
  if (pixels.length !== width * height) throw new Error("pixel count mismatch");
  const ihdr = new Uint8Array(13);
  ihdr.set(u32(width));
  ihdr.set(u32(height), 4);
  ihdr[8] = 8; // bit depth
  ihdr[9] = 0; // grayscale
  // compression/filter/interlace already 0
  const raw = new Uint8Array(height * (width + 1)); // filter byte 0 per scanline
  for (let y = 0; y < height; y++) {
    raw.set(pixels.subarray(y * width, (y + 1) * width), y * (width + 1) + 1);
  }
  const parts = [
    new Uint8Array([0x89, 0x50, 0x4e, 0x47, 0x0d, 0x0a, 0x1a, 0x0a]),
    chunk("IHDR", ihdr),
    chunk("IDAT", storedZlib(raw)),
    chunk("IEND", new Uint8Array(0)),
  ];
  const total = parts.reduce((n, b) => n + b.length, 0);
  const out = new Uint8Array(total);
  let pos = 0;
  for (const b of parts) {
    out.set(b, pos);
    pos += b.length;
  }
  return out;
}

import type { Stroke } from "./types";

/** Draw strokes (normalized coords, black on white) onto a size x size grid. */
export function rasterizeStrokes(strokes: Stroke[], size: number, thickness = 0.035): Uint8Array {
  const img = new Uint8Array(size * size).fill(255);
  const r = thickness * size;
  for (const stroke of strokes) {
    for (let s = 0; s < Math.max(stroke.length - 1, 1); s++) {
      const [ax, ay] = stroke[s];
      const [bx, by] = stroke[Math.min(s + 1, stroke.length - 1)];
      const x0 = ax * (size - 1);
      const y0 = ay * (size - 1);
      const x1 = bx * (size - 1);
      const y1 = by * (size - 1);
      const lo = (v: number) => Math.max(0, Math.floor(v - r - 1));
      const hi = (v: number) => Math.min(size - 1, Math.ceil(v + r + 1));
      for (let y = lo(Math.min(y0, y1)); y <= hi(Math.max(y0, y1)); y++) {
        for (let x = lo(Math.min(x0, x1)); x <= hi(Math.max(x0, x1)); x++) {
          if (distToSegment(x, y, x0, y0, x1, y1) <= r) img[y * size + x] = 0;
        }
      }
    }
  }
  return img;
}

function distToSegment(
  px: number, py: number, x0: number, y0: number, x1: number, y1: number,
): number {
  const dx = x1 - x0;
  const dy = y1 - y0;
  const len2 = dx * dx + dy * dy;
  const t = len2 === 0 ? 0 : Math.max(0, Math.min(1, ((px - x0) * dx + (py - y0) * dy) / len2));
  return Math.hypot(px - (x0 + t * dx), py - (y0 + t * dy));
}

/** PNG bytes for the current sketch, or null when the canvas is blank. */
export function sketchToPng(strokes: Stroke[], size: number): Uint8Array | null {
  if (strokes.length === 0) return null;
  return encodeGrayPng(rasterizeStrokes(strokes, size), size, size);
}
