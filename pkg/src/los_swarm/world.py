"""Ground-truth environment: robot kinematics, simulated lidar, collision and
line-of-sight checks.

The world owns the only mutable state in a run. Sensing and control read a
frozen view of it; `step` is the single writer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import Polygon, Pose, cast_rays, require_finite, segment_hits_obstacles, stack_edges
from .visibility import ScanCloud, augment


class CollisionDetected(RuntimeError):
    """A robot entered an obstacle or violated the hard separation distance."""


class Role:
    LEADING = "leading"
    SECONDARY = "secondary"


@dataclass
class RobotState:
    id: int
    position: np.ndarray
    heading: float
    u_c: np.ndarray = field(default_factory=lambda: np.zeros(2))
    u_n: np.ndarray = field(default_factory=lambda: np.zeros(2))
    k_c: float = 1.0
    k_n: float = 0.4
    role: str = Role.SECONDARY
    target: np.ndarray | None = None
    dwell_remaining: int = 0

    @property
    def pose(self) -> Pose:
        return Pose(self.position.copy(), self.heading)


@dataclass(frozen=True)
class SensorParams:
    rays: int = 360
    max_range: float = 12.0
    flip_multiplier: float = 10.0  # flip radius = multiplier * max_range
    body_radius: float = 0.05

    @property
    def angles(self) -> np.ndarray:
        return np.linspace(0.0, 2.0 * math.pi, self.rays, endpoint=False)

    @property
    def angular_resolution(self) -> float:
        return 2.0 * math.pi / self.rays

    @property
    def gap_chord(self) -> float:
        # close occlusion-shadow gaps without inventing geometry inside walls
        return 4.0 * self.max_range * self.angular_resolution

    @property
    def flip_radius(self) -> float:
        return self.flip_multiplier * self.max_range


class World:
    """Bounded planar world with solid polygonal obstacles and point robots."""

    def __init__(self, bounds, obstacles: list[Polygon], robots: list[RobotState], dt: float = 0.1):
        self.bounds = tuple(float(v) for v in bounds)  # (xmin, ymin, xmax, ymax)
        if self.bounds[0] >= self.bounds[2] or self.bounds[1] >= self.bounds[3]:
            raise ValueError("degenerate bounds")
        self.obstacles = list(obstacles)
        self.robots = list(robots)
        self.dt = float(dt)
        self.tick = 0
        # the boundary box is opaque to rays so scans always terminate
        self._edge_starts, self._edge_ends = stack_edges(self.obstacles, bounds=self.bounds)

    def robot(self, robot_id: int) -> RobotState:
        return self.robots[robot_id]

    def inside_bounds(self, p: np.ndarray) -> bool:
        xmin, ymin, xmax, ymax = self.bounds
        return xmin <= p[0] <= xmax and ymin <= p[1] <= ymax


def simulate_lidar(world: World, robot_id: int, sensor: SensorParams) -> ScanCloud:
    """Full 360-degree sweep against obstacles and the world boundary.

    Other robot bodies are never raycast, so neighboring robots leave no
    returns in each other's clouds by construction.
    """
    robot = world.robot(robot_id)
    if not world.inside_bounds(robot.position):
        raise ValueError(f"robot {robot_id} outside world bounds")
    local = sensor.angles
    ranges = cast_rays(robot.position, local + robot.heading, sensor.max_range, world._edge_starts, world._edge_ends)
    return augment(ranges, local, sensor.max_range, sensor.gap_chord, body_radius=sensor.body_radius)


def virtual_obstacle_neighbor(robot_id: int, scan: ScanCloud, pose: Pose) -> np.ndarray | None:
    """World position of the closest real return, treated as a static neighbor.

    Only raw returns count (synthetic gap-fill points are not obstacles);
    ties break toward the smallest ray angle. None when every ray missed.
    """
    finite = np.isfinite(scan.ranges)
    if not np.any(finite):
        return None
    ranges = np.where(finite, scan.ranges, np.inf)
    k = int(np.argmin(ranges))  # argmin returns the first (smallest-angle) tie
    ang = scan.angles[k]
    local = ranges[k] * np.array([math.cos(ang), math.sin(ang)])
    return pose.local_to_world(local)


def saturate_command(u_c_scaled: np.ndarray, u_n_scaled: np.ndarray, u_max: float) -> np.ndarray:
    """Combine the two commands under the speed limit, navigation yielding first.

    If the sum is too fast, the navigation part is shrunk toward zero until
    the combined speed meets u_max; only if the connectivity part alone
    still exceeds the limit is it rescaled.
    """
    c = np.asarray(u_c_scaled, dtype=float)
    nvec = np.asarray(u_n_scaled, dtype=float)
    total = c + nvec
    if np.linalg.norm(total) <= u_max:
        return total
    c_norm = float(np.linalg.norm(c))
    if c_norm >= u_max:
        return c * (u_max / c_norm)
    nn = float(nvec @ nvec)
    if nn < 1e-300:
        return c
    cn = float(c @ nvec)
    disc = cn * cn + nn * (u_max * u_max - c_norm * c_norm)
    s = (-cn + math.sqrt(max(disc, 0.0))) / nn
    return c + min(max(s, 0.0), 1.0) * nvec


def step(world: World, commands: dict[int, tuple[np.ndarray, np.ndarray]], u_max: float, d_coll_min: float) -> World:
    """Advance one tick: saturate, integrate, verify hard constraints.

    `commands` maps robot id to raw (u_c, u_n); each robot's own k_c/k_n
    scale them before saturation. Heading follows the velocity direction
    above 0.05 m/s, otherwise holds.

    Raises:
        CollisionDetected: a robot's swept path touches an obstacle, it exits
            the world bounds, or two robots end up closer than d_coll_min.
    """
    new_positions = {}
    for robot in world.robots:
        u_c, u_n = commands.get(robot.id, (np.zeros(2), np.zeros(2)))
        u_c = require_finite(np.asarray(u_c, dtype=float), "u_c")
        u_n = require_finite(np.asarray(u_n, dtype=float), "u_n")
        robot.u_c = u_c
        robot.u_n = u_n
        v = saturate_command(robot.k_c * u_c, robot.k_n * u_n, u_max)
        new_positions[robot.id] = robot.position + world.dt * v

    for robot in world.robots:
        p_new = new_positions[robot.id]
        if not world.inside_bounds(p_new):
            raise CollisionDetected(f"robot {robot.id} left the world bounds")
        if segment_hits_obstacles(robot.position, p_new, world.obstacles):
            raise CollisionDetected(f"robot {robot.id} hit an obstacle")
    ids = sorted(new_positions)
    for a in range(len(ids)):
        for b in range(a + 1, len(ids)):
            d = float(np.linalg.norm(new_positions[ids[a]] - new_positions[ids[b]]))
            if d < d_coll_min:
                raise CollisionDetected(f"robots {ids[a]} and {ids[b]} separated by {d:.3f} m")

    for robot in world.robots:
        p_new = new_positions[robot.id]
        speed = float(np.linalg.norm(p_new - robot.position)) / world.dt
        if speed > 0.05:
            delta = p_new - robot.position
            robot.heading = math.atan2(delta[1], delta[0])
        robot.position = p_new
    world.tick += 1
    return world


def ground_truth_los(world: World, i: int, j: int) -> bool:
    """True LoS predicate between two robots (obstacles only)."""
    return not segment_hits_obstacles(world.robot(i).position, world.robot(j).position, world.obstacles)
