// Renderer output is a flat list of primitive draw calls. Tests compare these
// logs against goldens; the browser executes them on a canvas context.

export type DrawOp =
  | { op: "clear"; fill: string }
  | { op: "polygon"; pts: [number, number][]; fill: string; opacity: number }
  | { op: "polyline"; pts: [number, number][]; stroke: string; width: number; opacity: number }
  | { op: "line"; a: [number, number]; b: [number, number]; stroke: string; width: number; opacity: number }
  | { op: "circle"; c: [number, number]; r: number; fill: string; opacity: number }
  | { op: "triangle"; pts: [number, number][]; fill: string; opacity: number }
  | { op: "text"; p: [number, number]; text: string; fill: string; size: number }
  | { op: "gridimage"; origin: [number, number]; w: number; h: number; hash: string };

const round3 = (v: number) => Math.round(v * 1000) / 1000;

export function rpt(p: [number, number]): [number, number] {
  return [round3(p[0]), round3(p[1])];
}

/** FNV-1a over bytes: a stable content id for grid images in draw logs. */
export function fnv1a(data: Uint8Array): string {
  let h = 0x811c9dc5;
  for (let i = 0; i < data.length; i++) {
    h ^= data[i];
    h = Math.imul(h, 0x01000193) >>> 0;
  }
  return h.toString(16).padStart(8, "0");
}

export function serializeLog(ops: DrawOp[]): string {
  return JSON.stringify(ops, null, 1);
}
