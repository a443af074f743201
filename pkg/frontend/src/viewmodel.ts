// Client state: latest decoded snapshot, reassembled occupancy grid, the
// Fiedler-value history, and the pending-goal marker. Socket callbacks are
// the only mutators; rendering reads it as a value.

import { decodeFrame, GridMeta, ScenarioInfo, Snapshot } from "./types.js";

export const LAMBDA_HISTORY_CAP = 400;

export interface PendingGoal {
  robot: number;
  goal: [number, number];
}

export class ViewModel {
  scenario: ScenarioInfo | null = null;
  snapshot: Snapshot | null = null;
  connected = false;
  selectedRobot = 0;
  lambdaHistory: number[] = [];
  pendingGoal: PendingGoal | null = null;
  lastError: string | null = null;
  gridMeta: GridMeta | null = null;
  gridBytes: Uint8Array | null = null;

  onScenario(info: ScenarioInfo) {
    this.scenario = info;
    this.selectedRobot = info.steered_robot;
  }

  onOpen() {
    this.connected = true;
  }

  onClose() {
    this.connected = false;
  }

  /** Apply one server frame; invalid frames are dropped (never partially applied). */
  onMessage(text: string): boolean {
    let frame;
    try {
      frame = decodeFrame(text);
    } catch {
      return false;
    }
    if (frame.type === "error") {
      this.lastError = frame.message;
      return true;
    }
    this.snapshot = frame;
    this.lambdaHistory.push(frame.lambda2);
    if (this.lambdaHistory.length > LAMBDA_HISTORY_CAP) {
      this.lambdaHistory.splice(0, this.lambdaHistory.length - LAMBDA_HISTORY_CAP);
    }
    if (frame.grid_meta && frame.grid_full) {
      this.gridMeta = frame.grid_meta;
      this.gridBytes = hexToBytes(frame.grid_full);
    } else if (frame.grid_delta && this.gridBytes) {
      for (const [idx, state] of frame.grid_delta) {
        // wire states: 0 unknown, 1 free, 2 occupied -> byte grid encoding
        this.gridBytes[idx] = state === 1 ? 0 : state === 2 ? 255 : 127;
      }
    }
    if (this.pendingGoal && goalAcknowledged(frame, this.pendingGoal)) {
      this.pendingGoal = null;
    }
    return true;
  }
}

function goalAcknowledged(snap: Snapshot, pending: PendingGoal): boolean {
  const robot = snap.robots.find((r) => r.id === pending.robot);
  if (!robot || !robot.target) return false;
  const dx = robot.target[0] - pending.goal[0];
  const dy = robot.target[1] - pending.goal[1];
  return Math.hypot(dx, dy) < 1e-4;
}

export function hexToBytes(hex: string): Uint8Array {
  const out = new Uint8Array(hex.length / 2);
  for (let i = 0; i < out.length; i++) {
    out[i] = parseInt(hex.slice(2 * i, 2 * i + 2), 16);
  }
  return out;
}
