// End-to-end against a real bridge process: snapshots stream in, a goal frame
// goes out, and the next snapshots acknowledge it within two ticks.

import { spawn, ChildProcess } from "node:child_process";
import { mkdtempSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";

import WebSocket from "ws";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { fitBounds, worldToScreen } from "../src/camera.js";
import { clickToGoal } from "../src/goals.js";
import { ScenarioInfo } from "../src/types.js";
import { ViewModel } from "../src/viewmodel.js";

const PORT = 8931;
const SCENARIO = {
  name: "steered_live",
  bounds: [0, 0, 30, 30],
  obstacles: [[[14.0, 10.0], [16.0, 10.0], [16.0, 20.0], [14.0, 20.0]]],
  robots: [[8.0, 15.0, 0.0], [8.0, 11.0, 0.0]],
  mode: { kind: "steered", robot: 0 },
  seed: 1,
  max_ticks: 1200,
};

let proc: ChildProcess;

async function waitForServer(url: string, attempts = 60): Promise<ScenarioInfo> {
  for (let k = 0; k < attempts; k++) {
    try {
      const res = await fetch(url);
      if (res.ok) return (await res.json()) as ScenarioInfo;
    } catch {
      // not up yet
    }
    await new Promise((r) => setTimeout(r, 250));
  }
  throw new Error(`bridge did not come up at ${url}`);
}

beforeAll(async () => {
  const dir = mkdtempSync(join(tmpdir(), "los-swarm-live-"));
  const scenarioPath = join(dir, "steered_live.json");
  writeFileSync(scenarioPath, JSON.stringify(SCENARIO));
  proc = spawn("python3", ["-m", "los_swarm.cli", "run", scenarioPath, "--serve", String(PORT)], {
    stdio: "ignore",
  });
}, 30000);

afterAll(() => {
  proc?.kill("SIGKILL");
});

describe("live steered run", () => {
  it("streams snapshots and applies a clicked goal within two ticks", async () => {
    const info = await waitForServer(`http://127.0.0.1:${PORT}/scenario`);
    expect(info.mode).toBe("steered");

    const vm = new ViewModel();
    vm.onScenario(info);
    const cam = fitBounds(info.bounds, 800, 600);
    const ws = new WebSocket(`ws://127.0.0.1:${PORT}/ws`);
    const events: { tick: number; target: [number, number] | null }[] = [];

    const ack = await new Promise<{ issued: number; applied: number }>((resolve, reject) => {
      const timer = setTimeout(() => reject(new Error("no acknowledgment")), 30000);
      let issuedAt: number | null = null;
      ws.on("open", () => vm.onOpen());
      ws.on("message", (data) => {
        const ok = vm.onMessage(String(data));
        if (!ok || !vm.snapshot) return;
        const snap = vm.snapshot;
        events.push({ tick: snap.tick, target: snap.robots[0].target });
        if (issuedAt === null && vm.connected) {
          const [sx, sy] = worldToScreen(cam, 22.0, 25.0);
          const res = clickToGoal(sx, sy, cam, vm, (t) => ws.send(t));
          expect(res.kind).toBe("sent");
          issuedAt = snap.tick;
        } else if (issuedAt !== null && snap.robots[0].target) {
          const t = snap.robots[0].target;
          if (Math.hypot(t[0] - 22.0, t[1] - 25.0) < 1e-4) {
            clearTimeout(timer);
            resolve({ issued: issuedAt, applied: snap.tick });
          }
        }
      });
      ws.on("error", reject);
    });

    expect(ack.applied - ack.issued).toBeGreaterThanOrEqual(1);
    expect(ack.applied - ack.issued).toBeLessThanOrEqual(2);
    // the pending marker cleared once the snapshot acknowledged the goal
    expect(vm.pendingGoal).toBe(null);
    // ticks arrived monotonically
    const ticks = events.map((e) => e.tick);
    expect([...ticks].sort((a, b) => a - b)).toEqual(ticks);
    ws.close();
  }, 60000);
});
