// Click-to-goal: screen point -> world goal frame for the steered robot.

import { Camera, screenToWorld } from "./camera.js";
import { GoalFrame } from "./types.js";
import { ViewModel } from "./viewmodel.js";

export type ClickResult =
  | { kind: "sent"; frame: GoalFrame }
  | { kind: "warning"; message: string };

/**
 * Convert a click into a goal frame and hand it to `send`. Never emits
 * anything but a well-formed goal: disconnected clients and out-of-bounds
 * clicks produce a warning instead. The latest click wins (the pending
 * marker is replaced, matching the bridge's latest-wins goal queue).
 */
export function clickToGoal(
  sx: number,
  sy: number,
  cam: Camera,
  vm: ViewModel,
  send: (text: string) => void,
): ClickResult {
  if (!vm.connected) {
    return { kind: "warning", message: "not connected" };
  }
  if (!vm.scenario) {
    return { kind: "warning", message: "scenario not loaded" };
  }
  const [wx, wy] = screenToWorld(cam, sx, sy);
  const [xmin, ymin, xmax, ymax] = vm.scenario.bounds;
  if (wx < xmin || wx > xmax || wy < ymin || wy > ymax) {
    return { kind: "warning", message: "click outside world bounds" };
  }
  const frame: GoalFrame = { type: "goal", robot_id: vm.selectedRobot, goal: [wx, wy] };
  send(JSON.stringify(frame));
  vm.pendingGoal = { robot: vm.selectedRobot, goal: [wx, wy] };
  return { kind: "sent", frame };
}
