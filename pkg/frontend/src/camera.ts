// Pan/zoom transform between world coordinates (meters, y up) and screen
// pixels (y down). Pure data + pure functions so rendering stays replayable.

export interface Camera {
  scale: number; // pixels per meter
  cx: number; // world point at the viewport center
  cy: number;
  viewW: number; // viewport size in pixels
  viewH: number;
}

export function fitBounds(bounds: [number, number, number, number], viewW: number, viewH: number, pad = 20): Camera {
  const [xmin, ymin, xmax, ymax] = bounds;
  const scale = Math.min((viewW - 2 * pad) / (xmax - xmin), (viewH - 2 * pad) / (ymax - ymin));
  return { scale, cx: (xmin + xmax) / 2, cy: (ymin + ymax) / 2, viewW, viewH };
}

export function worldToScreen(cam: Camera, x: number, y: number): [number, number] {
  return [cam.viewW / 2 + (x - cam.cx) * cam.scale, cam.viewH / 2 - (y - cam.cy) * cam.scale];
}

export function screenToWorld(cam: Camera, sx: number, sy: number): [number, number] {
  return [cam.cx + (sx - cam.viewW / 2) / cam.scale, cam.cy - (sy - cam.viewH / 2) / cam.scale];
}

export function panBy(cam: Camera, dxPixels: number, dyPixels: number): Camera {
  return { ...cam, cx: cam.cx - dxPixels / cam.scale, cy: cam.cy + dyPixels / cam.scale };
}

/** Zoom by `factor` keeping the world point under (sx, sy) fixed on screen. */
export function zoomAt(cam: Camera, sx: number, sy: number, factor: number): Camera {
  const [wx, wy] = screenToWorld(cam, sx, sy);
  const scale = Math.min(Math.max(cam.scale * factor, 1e-3), 1e5);
  const next = { ...cam, scale };
  // solve for the center that puts (wx, wy) back under (sx, sy)
  const cx = wx - (sx - cam.viewW / 2) / scale;
  const cy = wy + (sy - cam.viewH / 2) / scale;
  return { ...next, cx, cy };
}
