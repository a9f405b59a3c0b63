/** Run-length masks: row-major alternating run lengths, zeros first. */

export function rleDecode(text: string, height: number, width: number): Uint8Array {
  const total = height * width;
  const out = new Uint8Array(total);
  let pos = 0;
  let val = 0;
  for (const part of text.split(",")) {
    const n = Number(part);
    if (!Number.isInteger(n) || n < 0) throw new Error(`bad run length ${part}`);
    if (val) out.fill(1, pos, pos + n);
    pos += n;
    val ^= 1;
  }
  if (pos !== total) throw new Error(`RLE covers ${pos} pixels, mask needs ${total}`);
  return out;
}
