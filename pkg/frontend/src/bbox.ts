/** Bounding-box geometry: drag normalization and image clamping. */

import type { Box } from "./types.js";

/**
 * Turn a pointer drag into a box with positive width/height regardless of
 * drag direction, clamped to the image bounds. Degenerate results (zero
 * area after clamping) yield null.
 */
export function dragToBox(
  startX: number,
  startY: number,
  endX: number,
  endY: number,
  imageWidth: number,
  imageHeight: number,
): Box | null {
  const left = Math.min(startX, endX);
  const top = Math.min(startY, endY);
  const right = Math.max(startX, endX);
  const bottom = Math.max(startY, endY);

  const x = Math.max(0, Math.min(left, imageWidth));
  const y = Math.max(0, Math.min(top, imageHeight));
  const x2 = Math.max(0, Math.min(right, imageWidth));
  const y2 = Math.max(0, Math.min(bottom, imageHeight));

  const w = x2 - x;
  const h = y2 - y;
  if (w <= 0 || h <= 0) return null;
  return { x, y, w, h };
}

export function boxToArray(box: Box): number[] {
  return [box.x, box.y, box.w, box.h];
}
