/**
 * Client-side region rasterization. The server's mask semantics are
 * "nonzero = inside"; we rasterize to 0/255 at pixel centers so uploading
 * and fetching the mask back is pixel-identical.
 */
import { encodeGrayPng } from "./png.js";

export interface Rect {
  top: number;
  left: number;
  height: number;
  width: number;
}

export interface Point {
  x: number;
  y: number;
}

export type RegionShape = { kind: "rect"; rect: Rect } | { kind: "polygon"; points: Point[] };

export class RegionValidationError extends Error {}

export function rasterizeRect(imageHeight: number, imageWidth: number, rect: Rect): Uint8Array {
  const top = Math.max(0, Math.round(rect.top));
  const left = Math.max(0, Math.round(rect.left));
  const bottom = Math.min(imageHeight, Math.round(rect.top + rect.height));
  const right = Math.min(imageWidth, Math.round(rect.left + rect.width));
  if (bottom <= top || right <= left) {
    throw new RegionValidationError("rectangle has zero area inside the image");
  }
  const mask = new Uint8Array(imageHeight * imageWidth);
  for (let y = top; y < bottom; y++) {
    mask.fill(255, y * imageWidth + left, y * imageWidth + right);
  }
  return mask;
}

/** Even-odd scanline fill sampled at pixel centers (x+0.5, y+0.5). */
export function rasterizePolygon(imageHeight: number, imageWidth: number, points: Point[]): Uint8Array {
  if (points.length < 3) {
    throw new RegionValidationError("a polygon needs at least 3 points");
  }
  const mask = new Uint8Array(imageHeight * imageWidth);
  let any = false;
  for (let y = 0; y < imageHeight; y++) {
    const cy = y + 0.5;
    const crossings: number[] = [];
    for (let i = 0; i < points.length; i++) {
      const a = points[i];
      const b = points[(i + 1) % points.length];
      if (a.y === b.y) continue;
      const [lo, hi] = a.y < b.y ? [a, b] : [b, a];
      if (cy >= lo.y && cy < hi.y) {
        crossings.push(lo.x + ((cy - lo.y) / (hi.y - lo.y)) * (hi.x - lo.x));
      }
    }
    crossings.sort((p, q) => p - q);
    for (let k = 0; k + 1 < crossings.length; k += 2) {
      const from = Math.max(0, Math.ceil(crossings[k] - 0.5));
      const to = Math.min(imageWidth - 1, Math.floor(crossings[k + 1] - 0.5));
      if (to >= from) {
        mask.fill(255, y * imageWidth + from, y * imageWidth + to + 1);
        any = true;
      }
    }
  }
  if (!any) {
    throw new RegionValidationError("polygon encloses no pixels");
  }
  return mask;
}

export function rasterizeRegion(imageHeight: number, imageWidth: number, shape: RegionShape): Uint8Array {
  return shape.kind === "rect"
    ? rasterizeRect(imageHeight, imageWidth, shape.rect)
    : rasterizePolygon(imageHeight, imageWidth, shape.points);
}

export function maskToPng(imageHeight: number, imageWidth: number, mask: Uint8Array): Uint8Array {
  return encodeGrayPng(imageWidth, imageHeight, mask);
}

export function countSet(mask: Uint8Array): number {
  let n = 0;
  for (let i = 0; i < mask.length; i++) if (mask[i]) n++;
  return n;
}
