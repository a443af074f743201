// Browser entry point: canvas wiring, socket lifecycle, and draw-op playback.

import { Camera, fitBounds, panBy, zoomAt } from "./camera.js";
import { DrawOp } from "./drawlist.js";
import { clickToGoal } from "./goals.js";
import { render } from "./render.js";
import { ScenarioInfo } from "./types.js";
import { hexToBytes, ViewModel } from "./viewmodel.js";

const canvas = document.querySelector("canvas")!;
const ctx = canvas.getContext("2d")!;
const status = document.getElementById("status")!;
const vm = new ViewModel();
let cam: Camera = { scale: 10, cx: 0, cy: 0, viewW: canvas.width, viewH: canvas.height };
let gridCanvas: HTMLCanvasElement | null = null;
let gridHash = "";

function resize() {
  canvas.width = window.innerWidth;
  canvas.height = window.innerHeight - 40;
  cam = { ...cam, viewW: canvas.width, viewH: canvas.height };
}
window.addEventListener("resize", resize);
resize();

const host = location.host || "127.0.0.1:8800";

async function boot() {
  const info: ScenarioInfo = await (await fetch(`http://${host}/scenario`)).json();
  vm.onScenario(info);
  cam = fitBounds(info.bounds, canvas.width, canvas.height);
  const ws = new WebSocket(`ws://${host}/ws`);
  ws.onopen = () => vm.onOpen();
  ws.onclose = () => vm.onClose();
  ws.onmessage = (ev) => vm.onMessage(String(ev.data));

  canvas.addEventListener("click", (ev) => {
    const rect = canvas.getBoundingClientRect();
    const res = clickToGoal(ev.clientX - rect.left, ev.clientY - rect.top, cam, vm, (t) => ws.send(t));
    status.textContent = res.kind === "sent" ? `goal sent for robot ${vm.selectedRobot}` : res.message;
  });
  canvas.addEventListener("wheel", (ev) => {
    ev.preventDefault();
    const rect = canvas.getBoundingClientRect();
    cam = zoomAt(cam, ev.clientX - rect.left, ev.clientY - rect.top, ev.deltaY < 0 ? 1.15 : 1 / 1.15);
  });
  let drag: [number, number] | null = null;
  canvas.addEventListener("mousedown", (ev) => { if (ev.button === 1 || ev.shiftKey) drag = [ev.clientX, ev.clientY]; });
  window.addEventListener("mouseup", () => (drag = null));
  window.addEventListener("mousemove", (ev) => {
    if (drag) {
      cam = panBy(cam, ev.clientX - drag[0], ev.clientY - drag[1]);
      drag = [ev.clientX, ev.clientY];
    }
  });
}

function gridImage(): HTMLCanvasElement | null {
  if (!vm.gridMeta || !vm.gridBytes) return null;
  const m = vm.gridMeta;
  const hash = `${m.width}x${m.height}`;
  const off = gridCanvas ?? document.createElement("canvas");
  off.width = m.width;
  off.height = m.height;
  const ictx = off.getContext("2d")!;
  const img = ictx.createImageData(m.width, m.height);
  for (let y = 0; y < m.height; y++) {
    for (let x = 0; x < m.width; x++) {
      const v = vm.gridBytes[y * m.width + x];
      const k = ((m.height - 1 - y) * m.width + x) * 4; // world y-up
      const [r, g, b] = v === 0 ? [235, 235, 235] : v === 255 ? [60, 60, 70] : [180, 190, 205];
      img.data[k] = r; img.data[k + 1] = g; img.data[k + 2] = b; img.data[k + 3] = 255;
    }
  }
  ictx.putImageData(img, 0, 0);
  gridCanvas = off;
  gridHash = hash;
  return off;
}

function execute(ops: DrawOp[]) {
  for (const op of ops) {
    switch (op.op) {
      case "clear":
        ctx.fillStyle = op.fill;
        ctx.fillRect(0, 0, canvas.width, canvas.height);
        break;
      case "gridimage": {
        const img = gridImage();
        if (img) {
          ctx.save();
          ctx.imageSmoothingEnabled = false;
          ctx.globalAlpha = 0.85;
          ctx.drawImage(img, op.origin[0], op.origin[1], op.w, op.h);
          ctx.restore();
        }
        break;
      }
      case "polygon":
      case "triangle": {
        ctx.save();
        ctx.globalAlpha = op.opacity;
        ctx.fillStyle = op.fill;
        ctx.beginPath();
        op.pts.forEach(([x, y], k) => (k ? ctx.lineTo(x, y) : ctx.moveTo(x, y)));
        ctx.closePath();
        ctx.fill();
        ctx.restore();
        break;
      }
      case "polyline": {
        ctx.save();
        ctx.globalAlpha = op.opacity;
        ctx.strokeStyle = op.stroke;
        ctx.lineWidth = op.width;
        ctx.beginPath();
        op.pts.forEach(([x, y], k) => (k ? ctx.lineTo(x, y) : ctx.moveTo(x, y)));
        ctx.stroke();
        ctx.restore();
        break;
      }
      case "line":
        ctx.save();
        ctx.globalAlpha = op.opacity;
        ctx.strokeStyle = op.stroke;
        ctx.lineWidth = op.width;
        ctx.beginPath();
        ctx.moveTo(op.a[0], op.a[1]);
        ctx.lineTo(op.b[0], op.b[1]);
        ctx.stroke();
        ctx.restore();
        break;
      case "circle":
        ctx.save();
        ctx.globalAlpha = op.opacity;
        ctx.fillStyle = op.fill;
        ctx.beginPath();
        ctx.arc(op.c[0], op.c[1], op.r, 0, 2 * Math.PI);
        ctx.fill();
        ctx.restore();
        break;
      case "text":
        ctx.fillStyle = op.fill;
        ctx.font = `${op.size}px sans-serif`;
        ctx.fillText(op.text, op.p[0], op.p[1]);
        break;
    }
  }
}

function frame() {
  execute(render(vm, cam));
  requestAnimationFrame(frame);
}

boot();
requestAnimationFrame(frame);
export { hexToBytes };
