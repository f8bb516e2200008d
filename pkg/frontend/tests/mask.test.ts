import { describe, expect, it } from "vitest";
import {
  RegionValidationError,
  countSet,
  rasterizePolygon,
  rasterizeRect,
} from "../src/mask.js";

/** Oracle: even-odd point-in-polygon by ray casting at a pixel center. */
function pointInPolygon(points: { x: number; y: number }[], px: number, py: number): boolean {
  let inside = false;
  for (let i = 0, j = points.length - 1; i < points.length; j = i++) {
    const a = points[i];
    const b = points[j];
    if (a.y > py !== b.y > py && px < ((b.x - a.x) * (py - a.y)) / (b.y - a.y) + a.x) {
      inside = !inside;
    }
  }
  return inside;
}

describe("rasterizeRect", () => {
  it("sets exactly height*width pixels for an in-bounds rect", () => {
    const mask = rasterizeRect(64, 64, { top: 8, left: 8, height: 32, width: 32 });
    expect(countSet(mask)).toBe(1024);
    expect(mask[8 * 64 + 8]).toBe(255);
    expect(mask[7 * 64 + 8]).toBe(0);
    expect(mask[39 * 64 + 39]).toBe(255);
    expect(mask[40 * 64 + 8]).toBe(0);
  });

  it("clips to image bounds", () => {
    const mask = rasterizeRect(16, 16, { top: 12, left: 12, height: 10, width: 10 });
    expect(countSet(mask)).toBe(16);
  });

  it("rejects zero-area rects", () => {
    expect(() => rasterizeRect(16, 16, { top: 4, left: 4, height: 0, width: 5 })).toThrow(
      RegionValidationError,
    );
    expect(() => rasterizeRect(16, 16, { top: 20, left: 0, height: 4, width: 4 })).toThrow(
      RegionValidationError,
    );
  });
});

describe("rasterizePolygon", () => {
  it("matches the ray-casting oracle on random polygons", () => {
    let seed = 12345;
    const rand = () => {
      seed = (seed * 1103515245 + 12345) & 0x7fffffff;
      return seed / 0x7fffffff;
    };
    for (let trial = 0; trial < 25; trial++) {
      const n = 3 + Math.floor(rand() * 5);
      const points = Array.from({ length: n }, () => ({ x: rand() * 32, y: rand() * 32 }));
      let mask: Uint8Array;
      try {
        mask = rasterizePolygon(32, 32, points);
      } catch (e) {
        if (e instanceof RegionValidationError) continue; // degenerate draw
        throw e;
      }
      for (let y = 0; y < 32; y++) {
        for (let x = 0; x < 32; x++) {
          const want = pointInPolygon(points, x + 0.5, y + 0.5);
          expect(mask[y * 32 + x] !== 0, `pixel (${x},${y}) trial ${trial}`).toBe(want);
        }
      }
    }
  });

  it("fills a square polygon like the equivalent rect", () => {
    const points = [
      { x: 4, y: 4 },
      { x: 12, y: 4 },
      { x: 12, y: 12 },
      { x: 4, y: 12 },
    ];
    const viaPolygon = rasterizePolygon(16, 16, points);
    const viaRect = rasterizeRect(16, 16, { top: 4, left: 4, height: 8, width: 8 });
    expect(Array.from(viaPolygon)).toEqual(Array.from(viaRect));
  });

  it("rejects polygons with fewer than 3 points", () => {
    expect(() => rasterizePolygon(16, 16, [{ x: 0, y: 0 }, { x: 4, y: 4 }])).toThrow(
      RegionValidationError,
    );
  });

  it("rejects zero-area polygons without uploading", () => {
    const degenerate = [
      { x: 2, y: 2 },
      { x: 2, y: 2 },
      { x: 2, y: 2 },
    ];
    expect(() => rasterizePolygon(16, 16, degenerate)).toThrow(RegionValidationError);
  });
});
