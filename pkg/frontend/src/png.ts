/**
 * PNG decode for the gateway's rasters (8-bit RGBA, non-interlaced).
 * Uses the Web Streams DecompressionStream so it runs in browser and node.
 */

export interface Raster {
  width: number;
  height: number;
  data: Uint8ClampedArray; // RGBA, row-major
}

const SIGNATURE = [0x89, 0x50, 0x4e, 0x47, 0x0d, 0x0a, 0x1a, 0x0a];

async function inflate(data: Uint8Array): Promise<Uint8Array> {
  const ds = new DecompressionStream("deflate");
  const stream = new Blob([data as BlobPart]).stream().pipeThrough(ds);
  const chunks: Uint8Array[] = [];
  const reader = stream.getReader();
  for (;;) {
    const { done, value } = await reader.read();
    if (done) break;
    chunks.push(value);
  }
  const total = chunks.reduce((n, c) => n + c.length, 0);
  const out = new Uint8Array(total);
  let off = 0;
  for (const c of chunks) {
    out.set(c, off);
    off += c.length;
  }
  return out;
}

function u32(b: Uint8Array, at: number): number {
  return (b[at] << 24) | (b[at + 1] << 16) | (b[at + 2] << 8) | b[at + 3];
}

function paeth(a: number, b: number, c: number): number {
  const p = a + b - c;
  const pa = Math.abs(p - a);
  const pb = Math.abs(p - b);
  const pc = Math.abs(p - c);
  if (pa <= pb && pa <= pc) return a;
  if (pb <= pc) return b;
  return c;
}

export async function decodePng(bytes: Uint8Array): Promise<Raster> {
  for (let i = 0; i < 8; i++) {
    if (bytes[i] !== SIGNATURE[i]) throw new Error("not a PNG");
  }
  let pos = 8;
  let width = 0;
  let height = 0;
  const idat: Uint8Array[] = [];
  while (pos < bytes.length) {
    const len = u32(bytes, pos) >>> 0;
    const type = String.fromCharCode(...bytes.slice(pos + 4, pos + 8));
    const body = bytes.slice(pos + 8, pos + 8 + len);
    if (type === "IHDR") {
      width = u32(body, 0) >>> 0;
      height = u32(body, 4) >>> 0;
      const [depth, color, , , interlace] = [body[8], body[9], body[10], body[11], body[12]];
      if (depth !== 8 || color !== 6) throw new Error("only 8-bit RGBA supported");
      if (interlace !== 0) throw new Error("interlaced PNGs unsupported");
    } else if (type === "IDAT") {
      idat.push(body);
    } else if (type === "IEND") {
      break;
    }
    pos += 12 + len;
  }
  const total = idat.reduce((n, c) => n + c.length, 0);
  const zipped = new Uint8Array(total);
  let off = 0;
  for (const c of idat) {
    zipped.set(c, off);
    off += c.length;
  }
  const raw = await inflate(zipped);
  const stride = width * 4;
  const out = new Uint8ClampedArray(width * height * 4);
  const prior = new Uint8Array(stride);
  for (let y = 0; y < height; y++) {
    const filter = raw[y * (stride + 1)];
    const row = raw.subarray(y * (stride + 1) + 1, (y + 1) * (stride + 1));
    const line = new Uint8Array(stride);
    for (let x = 0; x < stride; x++) {
      const left = x >= 4 ? line[x - 4] : 0;
      const up = prior[x];
      const upLeft = x >= 4 ? prior[x - 4] : 0;
      let v = row[x];
      switch (filter) {
        case 0: break;
        case 1: v = (v + left) & 0xff; break;
        case 2: v = (v + up) & 0xff; break;
        case 3: v = (v + ((left + up) >> 1)) & 0xff; break;
        case 4: v = (v + paeth(left, up, upLeft)) & 0xff; break;
        default: throw new Error(`unknown PNG filter ${filter}`);
      }
      line[x] = v;
    }
    out.set(line, y * stride);
    prior.set(line);
  }
  return { width, height, data: out };
}
