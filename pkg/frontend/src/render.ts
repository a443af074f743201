// Pure scene construction: (view model, camera) -> draw-call list.
// Identical inputs must produce byte-identical logs; keep iteration orders
// fixed and coordinates rounded via rpt().

import { Camera, worldToScreen } from "./camera.js";
import { DrawOp, fnv1a, rpt } from "./drawlist.js";
import { ViewModel } from "./viewmodel.js";

export const ROBOT_COLORS = ["#d62728", "#1f77b4", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

const EDGE_SCALE_MAX = 1.0; // edge weights rendered on a fixed 0..1 color scale

function edgeColor(w: number): string {
  const t = Math.min(Math.max(w / EDGE_SCALE_MAX, 0), 1);
  const g = Math.round(120 + 100 * t);
  return `rgb(60,${g},60)`;
}

export function render(vm: ViewModel, cam: Camera): DrawOp[] {
  const ops: DrawOp[] = [{ op: "clear", fill: "#ffffff" }];
  const w2s = (x: number, y: number) => rpt(worldToScreen(cam, x, y));

  if (vm.gridMeta && vm.gridBytes) {
    const m = vm.gridMeta;
    ops.push({
      op: "gridimage",
      origin: w2s(m.origin[0], m.origin[1] + m.height * m.resolution),
      w: Math.round(m.width * m.resolution * cam.scale * 1000) / 1000,
      h: Math.round(m.height * m.resolution * cam.scale * 1000) / 1000,
      hash: fnv1a(vm.gridBytes),
    });
  }
  if (vm.scenario) {
    for (const poly of vm.scenario.obstacles) {
      ops.push({ op: "polygon", pts: poly.map(([x, y]) => w2s(x, y)), fill: "#44444f", opacity: 0.9 });
    }
  }
  const snap = vm.snapshot;
  if (!snap) {
    ops.push({ op: "text", p: [12, 20], text: "waiting for snapshots...", fill: "#666666", size: 13 });
    return ops;
  }

  for (const region of snap.regions) {
    const idx = snap.regions.indexOf(region);
    const color = ROBOT_COLORS[idx % ROBOT_COLORS.length];
    if (region.length >= 3) {
      const pts = region.map(([x, y]) => w2s(x, y));
      ops.push({ op: "polygon", pts, fill: color, opacity: 0.08 });
      ops.push({ op: "polyline", pts: [...pts, pts[0]], stroke: color, width: 1, opacity: 0.5 });
    }
  }
  for (const e of snap.edges) {
    const a = snap.robots.find((r) => r.id === e.i)!;
    const b = snap.robots.find((r) => r.id === e.j)!;
    ops.push({ op: "line", a: w2s(a.x, a.y), b: w2s(b.x, b.y), stroke: edgeColor(e.w), width: 2, opacity: 0.8 });
  }
  for (const r of snap.robots) {
    const color = ROBOT_COLORS[r.id % ROBOT_COLORS.length];
    const size = 0.45; // meters
    const tip = w2s(r.x + size * Math.cos(r.heading), r.y + size * Math.sin(r.heading));
    const left = w2s(r.x + size * 0.6 * Math.cos(r.heading + 2.5), r.y + size * 0.6 * Math.sin(r.heading + 2.5));
    const right = w2s(r.x + size * 0.6 * Math.cos(r.heading - 2.5), r.y + size * 0.6 * Math.sin(r.heading - 2.5));
    ops.push({ op: "triangle", pts: [tip, left, right], fill: color, opacity: r.role === "leading" ? 1.0 : 0.7 });
    if (r.target) {
      ops.push({ op: "circle", c: w2s(r.target[0], r.target[1]), r: 4, fill: color, opacity: 0.5 });
    }
  }
  if (vm.pendingGoal) {
    ops.push({ op: "circle", c: w2s(vm.pendingGoal.goal[0], vm.pendingGoal.goal[1]), r: 6, fill: "#ff00ff", opacity: 0.6 });
  }
  ops.push(...sparkline(vm, cam));
  return ops;
}

function sparkline(vm: ViewModel, cam: Camera): DrawOp[] {
  const W = 180;
  const H = 50;
  const x0 = cam.viewW - W - 10;
  const y0 = 10;
  const ops: DrawOp[] = [
    { op: "polygon", pts: [[x0, y0], [x0 + W, y0], [x0 + W, y0 + H], [x0, y0 + H]], fill: "#f4f4f4", opacity: 0.9 },
  ];
  const hist = vm.lambdaHistory;
  const hi = Math.max(0.5, ...hist);
  const pt = (k: number, v: number): [number, number] =>
    rpt([x0 + (hist.length <= 1 ? 0 : (k / (hist.length - 1)) * W), y0 + H - (v / hi) * H]);
  if (vm.scenario) {
    const yMin = pt(0, vm.scenario.lambda2_min)[1];
    ops.push({ op: "line", a: [x0, yMin], b: [x0 + W, yMin], stroke: "#d62728", width: 1, opacity: 0.8 });
  }
  if (hist.length === 1) {
    ops.push({ op: "circle", c: pt(0, hist[0]), r: 2, fill: "#1f77b4", opacity: 1.0 });
  } else if (hist.length > 1) {
    ops.push({ op: "polyline", pts: hist.map((v, k) => pt(k, v)), stroke: "#1f77b4", width: 1.5, opacity: 1.0 });
  }
  const last = hist.length ? hist[hist.length - 1] : 0;
  ops.push({ op: "text", p: [x0 + 4, y0 + 12], text: `λ2 ${last.toFixed(3)}`, fill: "#333333", size: 11 });
  return ops;
}
