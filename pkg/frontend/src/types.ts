// Wire protocol types for the simulation bridge (JSON text frames over /ws).

export interface RobotFrame {
  id: number;
  x: number;
  y: number;
  heading: number;
  role: string;
  target: [number, number] | null;
}

export interface EdgeFrame {
  i: number;
  j: number;
  w: number;
}

export interface GridMeta {
  width: number;
  height: number;
  resolution: number;
  origin: [number, number];
}

export interface Snapshot {
  type: "snapshot";
  tick: number;
  lambda2: number;
  robots: RobotFrame[];
  regions: [number, number][][];
  edges: EdgeFrame[];
  grid_delta?: [number, number][];
  grid_meta?: GridMeta;
  grid_full?: string;
  keyframe?: boolean;
}

export interface ErrorFrame {
  type: "error";
  message: string;
}

export interface ScenarioInfo {
  name: string;
  bounds: [number, number, number, number];
  obstacles: [number, number][][];
  mode: string;
  steered_robot: number;
  lambda2_min: number;
}

export interface GoalFrame {
  type: "goal";
  robot_id: number;
  goal: [number, number];
}

export type ServerFrame = Snapshot | ErrorFrame;

function isFiniteNumber(v: unknown): v is number {
  return typeof v === "number" && Number.isFinite(v);
}

/** Parse and structurally validate one server frame; throws on garbage. */
export function decodeFrame(text: string): ServerFrame {
  const doc = JSON.parse(text);
  if (doc.type === "error") {
    if (typeof doc.message !== "string") throw new Error("error frame without message");
    return doc as ErrorFrame;
  }
  if (doc.type !== "snapshot") throw new Error(`unknown frame type ${doc.type}`);
  if (!isFiniteNumber(doc.tick) || !isFiniteNumber(doc.lambda2)) throw new Error("bad snapshot header");
  if (!Array.isArray(doc.robots) || !Array.isArray(doc.regions) || !Array.isArray(doc.edges)) {
    throw new Error("bad snapshot body");
  }
  for (const r of doc.robots) {
    if (!isFiniteNumber(r.x) || !isFiniteNumber(r.y) || !isFiniteNumber(r.heading)) {
      throw new Error("bad robot entry");
    }
  }
  return doc as Snapshot;
}
