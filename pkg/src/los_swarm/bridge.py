"""Live service mode: stream per-tick state snapshots over a WebSocket and
accept operator goals for the steered robot.

The simulation runs in its own thread as the single writer; snapshots are
immutable payloads pushed to subscriber queues, and incoming goals cross into
the tick loop only through a latest-wins mailbox drained at tick boundaries,
so connected clients can never perturb the physics.
"""

from __future__ import annotations

import asyncio
import json
import logging
import threading
import time
from dataclasses import dataclass, field

import numpy as np
from fastapi import FastAPI, WebSocket, WebSocketDisconnect

from .harness import GoalQueue, RunMetrics, Scenario, run

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class GoalCommand:
    robot_id: int
    goal: tuple[float, float]
    issue_tick: int


@dataclass(eq=False)
class StateSnapshot:
    tick: int
    robots: list[dict]  # id, x, y, heading, role, target
    regions: list[list[list[float]]]  # world-frame star polygon per robot
    edges: list[dict]  # i, j, weight
    lambda2: float
    grid_delta: list[list[int]] | None  # [flat_index, state] pairs; None = unchanged
    grid_meta: dict | None = None  # present on keyframes
    grid_full: str | None = None  # hex byte grid on keyframes

    def to_payload(self) -> dict:
        payload = {
            "type": "snapshot",
            "tick": self.tick,
            "lambda2": self.lambda2,
            "robots": self.robots,
            "regions": self.regions,
            "edges": self.edges,
        }
        if self.grid_delta:
            payload["grid_delta"] = self.grid_delta
        if self.grid_meta is not None:
            payload["grid_meta"] = self.grid_meta
            payload["grid_full"] = self.grid_full
        return payload

    def encode(self) -> str:
        return json.dumps(self.to_payload(), sort_keys=True, separators=(",", ":"))


def snapshot_decode(text: str) -> StateSnapshot:
    doc = json.loads(text)
    if doc.get("type") != "snapshot":
        raise ValueError("not a snapshot frame")
    return StateSnapshot(
        tick=int(doc["tick"]),
        robots=doc["robots"],
        regions=doc["regions"],
        edges=doc["edges"],
        lambda2=float(doc["lambda2"]),
        grid_delta=doc.get("grid_delta"),
        grid_meta=doc.get("grid_meta"),
        grid_full=doc.get("grid_full"),
    )


def _round6(v: float) -> float:
    return round(float(v), 6)


def snapshot_encode(ctx: dict, last_states: np.ndarray | None, keyframe: bool = False) -> tuple[StateSnapshot, np.ndarray]:
    """Build a snapshot from a tick context; returns it plus the grid states.

    Region outlines are the inverse-flipped hull vertices in the world frame,
    decimated for the wire. The grid travels as sparse state deltas against
    the previous snapshot, or in full on keyframes (client joins).
    """
    world = ctx["world"]
    graph = ctx["graph"]
    grid = ctx["grid"]
    assignment = ctx["assignment"]
    robots = []
    for r in world.robots:
        tgt = assignment.targets.get(r.id)
        robots.append(
            {
                "id": r.id,
                "x": _round6(r.position[0]),
                "y": _round6(r.position[1]),
                "heading": _round6(r.heading),
                "role": r.role,
                "target": None if tgt is None else [_round6(tgt[0]), _round6(tgt[1])],
            }
        )
    regions = []
    for rid in range(len(world.robots)):
        outline = ctx["regions"][rid].outline_world()
        stride = max(1, len(outline) // 80)
        regions.append([[_round6(p[0]), _round6(p[1])] for p in outline[::stride]])
    edges = []
    for (i, j), e in sorted(graph.edges.items()):
        if e.A_ij > 0:
            edges.append({"i": i, "j": j, "w": _round6(e.A_ij)})
    states = grid.states().reshape(-1)
    delta = None
    meta = None
    full = None
    if keyframe or last_states is None:
        meta, data = grid.export_pgm()
        full = data.hex()
    else:
        changed = np.nonzero(states != last_states)[0]
        delta = [[int(k), int(states[k])] for k in changed]
    snap = StateSnapshot(
        tick=ctx["tick"],
        robots=robots,
        regions=regions,
        edges=edges,
        lambda2=_round6(graph.lambda2),
        grid_delta=delta,
        grid_meta=meta,
        grid_full=full,
    )
    return snap, states.copy()


class BridgeServer:
    """Owns one run thread and fans snapshots out to WebSocket clients."""

    def __init__(self, scenario: Scenario, seed=None, max_ticks=None, ablate_beta=False, realtime=True):
        self.scenario = scenario
        self.seed = seed
        self.max_ticks = max_ticks
        self.ablate_beta = ablate_beta
        self.realtime = realtime
        self.goal_queue = GoalQueue()
        self.latest: StateSnapshot | None = None
        self._last_states: np.ndarray | None = None
        self._subscribers: set[asyncio.Queue] = set()
        self._loop: asyncio.AbstractEventLoop | None = None
        self._lock = threading.Lock()
        self._thread: threading.Thread | None = None
        self.metrics: RunMetrics | None = None
        self.done = threading.Event()

    # -- simulation side -------------------------------------------------
    def _on_tick(self, ctx):
        snap, states = snapshot_encode(ctx, self._last_states)
        self._last_states = states
        grid_export = ctx["grid"].export_pgm()
        with self._lock:
            self.latest = snap
            self._grid_export = grid_export
            subs = list(self._subscribers)
        if self._loop is not None:
            for q in subs:
                self._loop.call_soon_threadsafe(q.put_nowait, snap.encode())
        if self.realtime:
            time.sleep(self.scenario.kinematics.dt)

    def start(self):
        def worker():
            try:
                self.metrics = run(
                    self.scenario,
                    seed=self.seed,
                    max_ticks=self.max_ticks,
                    ablate_beta=self.ablate_beta,
                    on_tick=self._on_tick,
                    goal_queue=self.goal_queue,
                )
            finally:
                self.done.set()

        self._thread = threading.Thread(target=worker, daemon=True)
        self._thread.start()

    def _ensure_started(self):
        """Bind the event loop and launch the sim thread exactly once."""
        try:
            self._loop = asyncio.get_running_loop()
        except RuntimeError:
            pass
        with self._lock:
            if self._thread is None:
                self.start()

    # -- service side ----------------------------------------------------
    def subscribe(self) -> asyncio.Queue:
        q: asyncio.Queue = asyncio.Queue()
        with self._lock:
            self._subscribers.add(q)
            latest = self.latest
            grid_export = getattr(self, "_grid_export", None)
        if latest is not None and grid_export is not None:
            # late joiners get a keyframe with the full grid
            meta, data = grid_export
            key = StateSnapshot(
                tick=latest.tick,
                robots=latest.robots,
                regions=latest.regions,
                edges=latest.edges,
                lambda2=latest.lambda2,
                grid_delta=None,
                grid_meta=meta,
                grid_full=data.hex(),
            )
            q.put_nowait(json.dumps({**key.to_payload(), "keyframe": True}, sort_keys=True, separators=(",", ":")))
        return q

    def unsubscribe(self, q: asyncio.Queue):
        with self._lock:
            self._subscribers.discard(q)

    def handle_goal(self, doc: dict, tick_hint: int) -> dict | None:
        """Validate and enqueue a goal frame; returns an error payload or None."""
        try:
            rid = int(doc["robot_id"])
            gx, gy = float(doc["goal"][0]), float(doc["goal"][1])
        except (KeyError, TypeError, ValueError, IndexError):
            return {"type": "error", "message": "malformed goal frame"}
        xmin, ymin, xmax, ymax = self.scenario.bounds
        if not (xmin <= gx <= xmax and ymin <= gy <= ymax):
            return {"type": "error", "message": "goal outside world bounds"}
        if not 0 <= rid < len(self.scenario.starts):
            return {"type": "error", "message": "unknown robot id"}
        self.goal_queue.submit(rid, np.array([gx, gy]))
        log.info("goal for robot %d at (%.2f, %.2f) issued at tick %d", rid, gx, gy, tick_hint)
        return None


def create_app(server: BridgeServer):
    from contextlib import asynccontextmanager

    @asynccontextmanager
    async def lifespan(app):
        server._ensure_started()
        yield

    app = FastAPI(lifespan=lifespan)

    @app.get("/scenario")
    async def scenario():
        server._ensure_started()
        return {
            "name": server.scenario.name,
            "bounds": list(server.scenario.bounds),
            "obstacles": [poly.vertices.tolist() for poly in server.scenario.obstacles],
            "mode": server.scenario.mode,
            "steered_robot": server.scenario.steered_robot,
            "lambda2_min": server.scenario.weights.lambda2_min,
            "document": server.scenario.raw,
        }

    @app.websocket("/ws")
    async def ws(socket: WebSocket):
        server._ensure_started()
        await socket.accept()
        q = server.subscribe()

        async def pump():
            while True:
                msg = await q.get()
                await socket.send_text(msg)

        sender = asyncio.create_task(pump())
        try:
            while True:
                raw = await socket.receive_text()
                try:
                    doc = json.loads(raw)
                except json.JSONDecodeError:
                    await socket.send_text(json.dumps({"type": "error", "message": "not json"}))
                    continue
                if doc.get("type") == "goal":
                    tick = server.latest.tick if server.latest else -1
                    err = server.handle_goal(doc, tick)
                    if err is not None:
                        await socket.send_text(json.dumps(err))
                else:
                    await socket.send_text(json.dumps({"type": "error", "message": "unknown frame type"}))
        except WebSocketDisconnect:
            pass
        finally:
            sender.cancel()
            server.unsubscribe(q)

    return app


def serve(scenario: Scenario, port: int, seed=None, max_ticks=None, ablate_beta=False, host="127.0.0.1"):
    """Run the scenario paced at wall-clock dt and serve it until it ends."""
    import uvicorn

    server = BridgeServer(scenario, seed=seed, max_ticks=max_ticks, ablate_beta=ablate_beta, realtime=True)
    app = create_app(server)
    config = uvicorn.Config(app, host=host, port=port, log_level="warning")
    uv = uvicorn.Server(config)

    def watch():
        server.done.wait()
        time.sleep(0.5)
        uv.should_exit = True

    threading.Thread(target=watch, daemon=True).start()
    uv.run()
