import { describe, expect, it } from "vitest";

import { parsePgm } from "../src/pgm";

function pgmOf(width: number, height: number, occupiedAt: [number, number][]): ArrayBuffer {
  const header = new TextEncoder().encode(`P5\n${width} ${height}\n255\n`);
  const pixels = new Uint8Array(width * height).fill(255);
  for (const [x, y] of occupiedAt) pixels[y * width + x] = 0;
  const out = new Uint8Array(header.length + pixels.length);
  out.set(header);
  out.set(pixels, header.length);
  return out.buffer;
}

describe("parsePgm", () => {
  it("parses dimensions and occupancy", () => {
    const pgm = parsePgm(pgmOf(4, 3, [[1, 2], [0, 0]]));
    expect(pgm.width).toBe(4);
    expect(pgm.height).toBe(3);
    expect(pgm.occupied[2 * 4 + 1]).toBe(1);
    expect(pgm.occupied[0]).toBe(1);
    expect(pgm.occupied[1]).toBe(0);
  });

  it("rejects non-P5 input", () => {
    const ascii = new TextEncoder().encode("P2\n2 2\n255\n0 0 0 0");
    expect(() => parsePgm(ascii.buffer as ArrayBuffer)).toThrow(/not a binary PGM/);
  });

  it("rejects truncated pixel data", () => {
    const buf = pgmOf(4, 4, []);
    expect(() => parsePgm(buf.slice(0, buf.byteLength - 4))).toThrow(/truncated/);
  });
});
