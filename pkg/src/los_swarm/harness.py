"""Scenario configuration, the simulation tick loop, metrics, and run audits.

A run wires sensing -> visible regions -> one-hop exchange -> weighted graph
-> connectivity velocities -> mapping/frontiers/assignment/roles/waypoints ->
navigation velocities -> kinematic step, once per tick, logging one metrics
row per tick and terminating with an explicit success/failure summary (never
an unhandled exception).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .connectivity import (
    ConnectivityCritical,
    TeamSnapshot,
    WeightParams,
    assemble_graph,
    connectivity_velocity,
)
from .geometry import Polygon, Pose
from .navigation import (
    MapParams,
    NoPath,
    OccupancyGrid,
    PlanField,
    PlanGraph,
    TargetAssignment,
    assign_targets,
    detect_frontiers,
    elect_roles,
    navigation_velocity,
    plan_waypoint,
    update_map,
)
from .visibility import build_visible_region
from .world import (
    CollisionDetected,
    RobotState,
    Role,
    SensorParams,
    World,
    ground_truth_los,
    simulate_lidar,
    step,
    virtual_obstacle_neighbor,
)

EXPLORE, GOALS, STEERED = "explore", "goals", "steered"


class ScenarioError(ValueError):
    """Scenario file is malformed or fails load-time validation."""


@dataclass(frozen=True)
class KinematicParams:
    dt: float = 0.1
    u_max: float = 1.0
    k_c: float = 1.0
    k_lead: float = 1.0
    k_sec: float = 0.4
    arrival_radius: float = 0.6
    dwell_ticks: int = 20


@dataclass
class Scenario:
    name: str
    bounds: tuple
    obstacles: list[Polygon]
    starts: list[tuple]  # (x, y, heading)
    mode: str = EXPLORE
    goals: list[dict] = field(default_factory=list)  # [{"robot": id, "point": [x, y]}]
    steered_robot: int = 0
    seed: int = 0
    max_ticks: int = 2000
    start_jitter: float = 0.2
    assign_period: int = 10
    # explore mode: activate only targets within this distance of the lead
    # pick, so followers never fight the leader across the map (None = all)
    cluster_radius: float | None = None
    weights: WeightParams = field(default_factory=WeightParams)
    sensor: SensorParams = field(default_factory=SensorParams)
    kinematics: KinematicParams = field(default_factory=KinematicParams)
    mapping: MapParams = field(default_factory=MapParams)
    raw: dict | None = None  # source document, served verbatim by the bridge

    @staticmethod
    def from_dict(doc: dict) -> "Scenario":
        try:
            obstacles = [Polygon(np.asarray(poly, dtype=float)) for poly in doc.get("obstacles", [])]
            starts = [tuple(map(float, s)) for s in doc["robots"]]
            mode_doc = doc.get("mode", {"kind": EXPLORE})
            kind = mode_doc["kind"]
            if kind not in (EXPLORE, GOALS, STEERED):
                raise ScenarioError(f"unknown mode {kind!r}")
            sc = Scenario(
                name=doc.get("name", "unnamed"),
                bounds=tuple(map(float, doc["bounds"])),
                obstacles=obstacles,
                starts=starts,
                mode=kind,
                goals=list(mode_doc.get("goals", [])),
                steered_robot=int(mode_doc.get("robot", 0)),
                seed=int(doc.get("seed", 0)),
                max_ticks=int(doc.get("max_ticks", 2000)),
                start_jitter=float(doc.get("start_jitter", 0.2)),
                assign_period=int(doc.get("assign_period", 10)),
                cluster_radius=(
                    float(doc["cluster_radius"]) if doc.get("cluster_radius") is not None else None
                ),
                weights=WeightParams(**doc.get("weights", {})),
                sensor=SensorParams(**doc.get("sensor", {})),
                kinematics=KinematicParams(**doc.get("kinematics", {})),
                mapping=MapParams(**doc.get("mapping", {})),
                raw=doc,
            )
        except ScenarioError:
            raise
        except (KeyError, TypeError, ValueError) as exc:
            raise ScenarioError(f"bad scenario document: {exc}") from exc
        return sc

    @staticmethod
    def from_file(path: str | Path) -> "Scenario":
        try:
            doc = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ScenarioError(f"cannot read scenario {path}: {exc}") from exc
        return Scenario.from_dict(doc)

    def jittered_starts(self, seed: int) -> list[tuple]:
        """Seed-keyed perturbation of the nominal starts (what makes seeds distinct runs)."""
        rng = np.random.default_rng(seed)
        out = []
        for x, y, heading in self.starts:
            dx, dy = rng.uniform(-self.start_jitter, self.start_jitter, 2)
            dh = rng.uniform(-math.pi, math.pi)
            out.append((x + dx, y + dy, heading + dh))
        return out

    def build_world(self, seed: int | None = None) -> World:
        seed = self.seed if seed is None else seed
        robots = [
            RobotState(
                id=i,
                position=np.array([x, y]),
                heading=heading,
                k_c=self.kinematics.k_c,
                k_n=self.kinematics.k_sec,
            )
            for i, (x, y, heading) in enumerate(self.jittered_starts(seed))
        ]
        return World(self.bounds, self.obstacles, robots, dt=self.kinematics.dt)

    def validate(self, seed: int | None = None) -> World:
        """Load-time checks; returns the built world on success.

        Raises:
            ScenarioError: any structural or physical validation failure.
        """
        if len(self.starts) < 1:
            raise ScenarioError("need at least one robot")
        kin, w = self.kinematics, self.weights
        if kin.u_max * kin.dt >= w.d_coll_min / 2:
            raise ScenarioError("per-tick displacement must stay below d_coll_min/2 (tunneling guard)")
        if self.mode == GOALS:
            if not self.goals:
                raise ScenarioError("goals mode needs a goal list")
            if len(self.goals) > len(self.starts):
                raise ScenarioError("more goals than robots")
            seen = set()
            for g in self.goals:
                rid = int(g["robot"])
                if rid in seen or not 0 <= rid < len(self.starts):
                    raise ScenarioError("goals must name distinct valid robots")
                seen.add(rid)
        world = self.build_world(seed)
        for robot in world.robots:
            if not world.inside_bounds(robot.position):
                raise ScenarioError(f"robot {robot.id} starts outside bounds")
            if any(poly.contains(robot.position) for poly in self.obstacles):
                raise ScenarioError(f"robot {robot.id} starts inside an obstacle")
        for a in range(len(world.robots)):
            for b in range(a + 1, len(world.robots)):
                d = float(np.linalg.norm(world.robots[a].position - world.robots[b].position))
                if d < w.d_coll_min:
                    raise ScenarioError(f"robots {a} and {b} start closer than d_coll_min")
        if len(world.robots) >= 2:
            graph = _sense_and_assemble(world, self)
            if graph.lambda2 <= w.lambda2_min:
                raise ScenarioError(
                    f"initial graph not connected enough (lambda2={graph.lambda2:.4f} <= {w.lambda2_min})"
                )
        return world


def _sense_and_assemble(world: World, scenario: Scenario, recorder=None):
    scans = [simulate_lidar(world, r.id, scenario.sensor) for r in world.robots]
    regions = [
        build_visible_region(scan, scenario.sensor.flip_radius, robot.pose)
        for scan, robot in zip(scans, world.robots)
    ]
    obstacle_pts = [
        virtual_obstacle_neighbor(robot.id, scan, robot.pose) for scan, robot in zip(scans, world.robots)
    ]
    snap = TeamSnapshot([r.pose for r in world.robots], regions, obstacle_pts, recorder=recorder)
    return assemble_graph(snap, scenario.weights)


class ProvenanceRecorder:
    """Collects (reader, owner, kind) data accesses for the one-hop audit."""

    def __init__(self):
        self.notes: list[tuple[int, int, str]] = []

    def note(self, reader, owner, kind):
        self.notes.append((reader, owner, kind))

    def reset(self):
        self.notes.clear()


def audit_one_hop(notes, candidates) -> bool:
    """True iff every recorded read stayed within the reader's one-hop set."""
    for reader, owner, _ in notes:
        if owner != reader and owner not in candidates[reader]:
            return False
    return True


@dataclass
class RunMetrics:
    header: list[str]
    rows: list[list[float]]
    summary: dict
    robot_count: int
    pairs: list[tuple[int, int]]

    def column(self, name: str) -> np.ndarray:
        idx = self.header.index(name)
        return np.array([row[idx] for row in self.rows])

    def to_csv(self) -> str:
        lines = [",".join(self.header)]
        for row in self.rows:
            lines.append(",".join(repr(float(v)) for v in row))
        lines.append("# summary " + json.dumps(self.summary, sort_keys=True))
        return "\n".join(lines) + "\n"

    @staticmethod
    def from_csv(text: str) -> "RunMetrics":
        lines = [ln for ln in text.strip().splitlines() if ln]
        header = lines[0].split(",")
        rows = []
        summary = {}
        for ln in lines[1:]:
            if ln.startswith("# summary "):
                summary = json.loads(ln[len("# summary "):])
            else:
                rows.append([float(v) for v in ln.split(",")])
        n = sum(1 for h in header if h.startswith("x"))
        pairs = []
        for h in header:
            if h.startswith("A_"):
                _, i, j = h.split("_")
                pairs.append((int(i), int(j)))
        return RunMetrics(header=header, rows=rows, summary=summary, robot_count=n, pairs=pairs)


def _metrics_header(n: int) -> tuple[list[str], list[tuple[int, int]]]:
    header = ["tick", "lambda2", "leader", "unknown_cells"]
    for i in range(n):
        header += [f"x{i}", f"y{i}", f"uc{i}", f"un{i}"]
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    for i, j in pairs:
        header += [f"A_{i}_{j}", f"alpha_{i}_{j}", f"beta_{i}_{j}", f"gamma_{i}_{j}", f"dlos_{i}_{j}", f"gtlos_{i}_{j}"]
    return header, pairs


class GoalQueue:
    """Latest-wins mailbox of externally issued goals, drained at tick starts."""

    def __init__(self):
        import threading

        self._lock = threading.Lock()
        self._pending: dict[int, np.ndarray] = {}

    def submit(self, robot_id: int, goal: np.ndarray):
        with self._lock:
            self._pending[robot_id] = np.asarray(goal, dtype=float)

    def drain(self) -> dict[int, np.ndarray]:
        with self._lock:
            out = dict(self._pending)
            self._pending.clear()
            return out


def run(
    scenario: Scenario,
    seed: int | None = None,
    max_ticks: int | None = None,
    ablate_beta: bool = False,
    recorder: ProvenanceRecorder | None = None,
    on_tick=None,
    goal_queue: GoalQueue | None = None,
) -> RunMetrics:
    """Execute a scenario to termination and return its metrics.

    `on_tick(ctx)` is called after each completed tick with a dict exposing
    the world, graph, grid, assignment, and tick index (used by the live
    bridge); exceptions from it are not caught. With `recorder` set, every
    tick's data accesses are audited for one-hop locality and the result is
    accumulated into the summary (`one_hop_ok`).
    """
    world = scenario.validate(seed)
    weights = scenario.weights
    kin = scenario.kinematics
    sensor = scenario.sensor
    n = len(world.robots)
    limit = scenario.max_ticks if max_ticks is None else max_ticks

    grid = OccupancyGrid(scenario.bounds, scenario.mapping)
    plan_cache: dict = {"mask": None, "graph": None}
    assignment = TargetAssignment()
    if scenario.mode == GOALS:
        assignment.targets = {int(g["robot"]): np.asarray(g["point"], dtype=float) for g in scenario.goals}
    goals_done: set[int] = set()
    visited = 0
    replan_requested = True
    # attemptable targeting: a lead target that stops getting closer is parked
    # for a while and the team re-matches elsewhere
    blacklist: list[tuple[np.ndarray, int]] = []  # (target, expiry tick)
    stagnation = {"leader": -1, "dist": math.inf, "since": 0}
    header, pairs = _metrics_header(n)
    rows: list[list[float]] = []
    violation_streak = {p: 0 for p in pairs}
    one_hop_ok = True
    success, reason = False, "max_ticks"
    min_lambda2 = math.inf

    for tick in range(limit):
        scans = [simulate_lidar(world, r.id, sensor) for r in world.robots]
        regions = [
            build_visible_region(scan, sensor.flip_radius, robot.pose)
            for scan, robot in zip(scans, world.robots)
        ]
        obstacle_pts = [
            virtual_obstacle_neighbor(robot.id, scan, robot.pose)
            for scan, robot in zip(scans, world.robots)
        ]
        if recorder is not None:
            recorder.reset()
        snap = TeamSnapshot([r.pose for r in world.robots], regions, obstacle_pts, recorder=recorder)
        graph = assemble_graph(snap, weights, ablate_beta=ablate_beta)
        if recorder is not None:
            one_hop_ok = one_hop_ok and audit_one_hop(recorder.notes, graph.candidates)
        min_lambda2 = min(min_lambda2, graph.lambda2)

        try:
            u_c = {r.id: connectivity_velocity(r.id, graph, weights) for r in world.robots}
        except ConnectivityCritical:
            success, reason = False, "connectivity_critical"
            break

        for robot, scan in zip(world.robots, scans):
            update_map(grid, robot.pose, scan)

        if goal_queue is not None:
            for rid, goal in goal_queue.drain().items():
                if 0 <= rid < n and world.inside_bounds(goal):
                    assignment.targets[rid] = goal
                    assignment.dwell_remaining[rid] = kin.dwell_ticks

        frontiers = detect_frontiers(grid, sensor.max_range) if scenario.mode == EXPLORE else []
        fields: dict[int, PlanField] = {}

        def field_for(rid: int) -> PlanField:
            if rid not in fields:
                if plan_cache.get("tick") != tick:
                    # the cost graph only depends on the blocked mask; reuse
                    # it across ticks until the mask actually changes
                    plan_cache["tick"] = tick
                    mask = PlanGraph.blocked_mask(grid)
                    if plan_cache["graph"] is None or not np.array_equal(mask, plan_cache["mask"]):
                        plan_cache["mask"] = mask
                        plan_cache["graph"] = PlanGraph(grid, mask)
                fields[rid] = PlanField(plan_cache["graph"], world.robot(rid).position)
            return fields[rid]

        if scenario.mode == EXPLORE:
            need_refresh = tick % scenario.assign_period == 0 or not assignment.targets or replan_requested
            replan_requested = False
            blacklist = [(p, exp) for p, exp in blacklist if exp > tick]
            candidates = [
                f for f in frontiers
                if not any(float(np.linalg.norm(f.centroid - p)) < 3.0 for p, _ in blacklist)
            ]
            if not candidates:
                blacklist.clear()
                candidates = frontiers
            if need_refresh and candidates:
                old = assignment.targets
                new_assignment = assign_targets(
                    candidates,
                    [r.id for r in world.robots],
                    lambda rid, f: field_for(rid).distance_to(candidates[f].centroid),
                    scenario.mapping,
                )
                if scenario.cluster_radius is not None and new_assignment.pick_order:
                    # keep the whole team working one neighborhood: the best
                    # pick anchors it, everyone else re-matches against the
                    # frontiers near that anchor
                    lead = new_assignment.pick_order[0]
                    lead_target = new_assignment.targets[lead]
                    near = [
                        f for f in candidates
                        if float(np.linalg.norm(f.centroid - lead_target)) <= scenario.cluster_radius
                        and float(np.linalg.norm(f.centroid - lead_target)) > 1e-9  # lead's own pick stays unique
                    ]
                    sub = assign_targets(
                        near,
                        [r.id for r in world.robots if r.id != lead],
                        lambda rid, f: field_for(rid).distance_to(near[f].centroid),
                        scenario.mapping,
                    )
                    new_assignment = TargetAssignment(
                        targets={lead: lead_target, **sub.targets},
                        pick_order=[lead] + sub.pick_order,
                    )
                for rid, tgt in new_assignment.targets.items():
                    prev = old.get(rid)
                    if prev is None or float(np.linalg.norm(prev - tgt)) > kin.arrival_radius:
                        assignment.dwell_remaining[rid] = kin.dwell_ticks
                    else:
                        new_assignment.targets[rid] = prev
                        new_assignment.dwell_remaining[rid] = assignment.dwell_remaining.get(rid, kin.dwell_ticks)
                assignment = new_assignment

        # dwell countdown at current targets; completed targets are visited
        for robot in world.robots:
            tgt = assignment.targets.get(robot.id)
            if tgt is None:
                continue
            if float(np.linalg.norm(robot.position - tgt)) <= kin.arrival_radius:
                left = assignment.dwell_remaining.get(robot.id, kin.dwell_ticks) - 1
                assignment.dwell_remaining[robot.id] = left
                if left <= 0:
                    visited += 1
                    if scenario.mode == GOALS:
                        goals_done.add(robot.id)
                    del assignment.targets[robot.id]
            else:
                # dwell requires consecutive in-disk ticks
                assignment.dwell_remaining[robot.id] = kin.dwell_ticks

        target_distances = {}
        for rid, tgt in assignment.targets.items():
            d = field_for(rid).distance_to(tgt)
            if math.isfinite(d):
                target_distances[rid] = d
        roles = {}
        if target_distances:
            roles = elect_roles(target_distances, kin.k_lead, kin.k_sec)
        leader = -1
        for robot in world.robots:
            role, k_n = roles.get(robot.id, (Role.SECONDARY, kin.k_sec))
            robot.role = role
            robot.k_n = k_n
            robot.target = assignment.targets.get(robot.id)
            robot.dwell_remaining = assignment.dwell_remaining.get(robot.id, 0)
            if role == Role.LEADING:
                leader = robot.id

        if scenario.mode == EXPLORE and leader >= 0 and leader in target_distances:
            d = target_distances[leader]
            if stagnation["leader"] != leader or stagnation["dist"] - d >= 0.5:
                stagnation = {"leader": leader, "dist": d, "since": tick}
            elif tick - stagnation["since"] >= 60:
                # the whole team is pinned against this target: park it and
                # let the next refresh anchor somewhere attemptable
                blacklist.append((assignment.targets[leader].copy(), tick + 400))
                assignment.targets.pop(leader, None)
                replan_requested = True
                stagnation = {"leader": -1, "dist": math.inf, "since": tick}

        u_n = {}
        dropped = []
        for robot in world.robots:
            tgt = assignment.targets.get(robot.id)
            if tgt is None or robot.id not in target_distances:
                u_n[robot.id] = np.zeros(2)
                if tgt is not None and robot.id not in target_distances:
                    dropped.append(robot.id)  # NoPath: reassign next tick
                continue
            try:
                wp = plan_waypoint(grid, robot.pose, tgt, regions[robot.id], field=field_for(robot.id))
                u_n[robot.id] = navigation_velocity(robot.position, wp, tgt, kin.arrival_radius)
            except NoPath:
                u_n[robot.id] = np.zeros(2)
                dropped.append(robot.id)
        for rid in dropped:
            assignment.targets.pop(rid, None)
        if dropped:
            replan_requested = True  # a NoPath target triggers reassignment next tick

        try:
            step(world, {r.id: (u_c[r.id], u_n[r.id]) for r in world.robots}, kin.u_max, weights.d_coll_min)
        except CollisionDetected:
            success, reason = False, "collision"
            break

        row = [float(tick), graph.lambda2, float(leader), float(grid.unknown_count())]
        for robot in world.robots:
            row += [
                float(robot.position[0]),
                float(robot.position[1]),
                float(np.linalg.norm(u_c[robot.id])),
                float(np.linalg.norm(robot.k_n * u_n[robot.id])),
            ]
        flagged = False
        for i, j in pairs:
            e = graph.edges.get((i, j))
            gt = ground_truth_los(world, i, j)
            if e is not None and e.A_ij > 0 and not gt:
                violation_streak[(i, j)] += 1
            else:
                violation_streak[(i, j)] = 0
            if violation_streak[(i, j)] >= 2:
                flagged = True
            if e is None:
                row += [0.0, 0.0, 0.0, 0.0, 0.0, float(gt)]
            else:
                row += [e.A_ij, e.alpha_ij, e.beta_ij, e.gamma_ij, e.d_los_fused, float(gt)]
        rows.append(row)

        if on_tick is not None:
            on_tick(
                {
                    "tick": tick,
                    "world": world,
                    "graph": graph,
                    "grid": grid,
                    "regions": regions,
                    "assignment": assignment,
                    "scenario": scenario,
                }
            )

        if flagged:
            success, reason = False, "los_violation"
            break
        if scenario.mode == EXPLORE and not frontiers and tick >= 1:
            success, reason = True, "explored"
            break
        if scenario.mode == GOALS and len(goals_done) == len(scenario.goals):
            success, reason = True, "goals_done"
            break
    else:
        if scenario.mode == STEERED:
            success, reason = True, "max_ticks"

    summary = {
        "success": bool(success),
        "reason": reason,
        "ticks": len(rows),
        "min_lambda2": min_lambda2 if math.isfinite(min_lambda2) else -1.0,
        "targets_visited": visited,
        "mode": scenario.mode,
        "seed": scenario.seed if seed is None else seed,
    }
    if recorder is not None:
        summary["one_hop_ok"] = bool(one_hop_ok)
    return RunMetrics(header=header, rows=rows, summary=summary, robot_count=n, pairs=pairs)


def one_hop_isolation_check(scenario: Scenario, seed: int | None = None, max_ticks: int | None = None) -> bool:
    """Run instrumented and report whether every data access was one-hop local."""
    rec = ProvenanceRecorder()
    metrics = run(scenario, seed=seed, max_ticks=max_ticks, recorder=rec)
    return bool(metrics.summary.get("one_hop_ok", False))
