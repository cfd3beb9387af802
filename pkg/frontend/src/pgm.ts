// Binary PGM (P5) parser for the occupancy grid debug image.
// Pixel 0 = occupied, 255 = free; row 0 is the grid's y=0 row.

export interface Pgm {
  width: number;
  height: number;
  occupied: Uint8Array; // 1 = occupied, row-major
}

export function parsePgm(buffer: ArrayBuffer): Pgm {
  const bytes = new Uint8Array(buffer);
  // header: "P5\n<w> <h>\n<maxval>\n" followed by raw pixels
  let pos = 0;
  const readLine = (): string => {
    let end = pos;
    while (end < bytes.length && bytes[end] !== 0x0a) end++;
    const line = new TextDecoder().decode(bytes.subarray(pos, end));
    pos = end + 1;
    return line;
  };
  const magic = readLine();
  if (magic.trim() !== "P5") throw new Error(`not a binary PGM: ${magic}`);
  let dims = readLine();
  while (dims.startsWith("#")) dims = readLine();
  const [w, h] = dims.trim().split(/\s+/).map(Number);
  const maxval = Number(readLine().trim());
  if (!Number.isFinite(w) || !Number.isFinite(h) || w <= 0 || h <= 0) {
    throw new Error(`bad PGM dimensions: ${dims}`);
  }
  if (maxval !== 255) throw new Error(`unsupported maxval ${maxval}`);
  const pixels = bytes.subarray(pos, pos + w * h);
  if (pixels.length < w * h) throw new Error("truncated PGM pixel data");
  const occupied = new Uint8Array(w * h);
  for (let i = 0; i < w * h; i++) occupied[i] = pixels[i] === 0 ? 1 : 0;
  return { width: w, height: h, occupied };
}
