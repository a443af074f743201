"""Team occupancy mapping, frontier targets, grid path planning with
visible-waypoint serving, and role-based navigation scaling.

Mapping uses exact simulated poses (no SLAM); planning runs on a downsampled
traversable mask where unknown space is attemptable. A robot is served the
farthest path vertex its own visible region classifies as visible, so the
carrot never jumps behind an occluder.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra

from .geometry import Pose
from .visibility import ScanCloud, VisibleRegion

UNKNOWN, FREE, OCCUPIED = 0, 1, 2


class NoPath(RuntimeError):
    """Target unreachable on the current traversable mask."""


@dataclass(frozen=True)
class MapParams:
    resolution: float = 0.25
    l_occ: float = 2.0
    l_free: float = 0.4
    l_max: float = 10.0
    occ_threshold: float = 1.0
    free_threshold: float = -0.4
    min_frontier_cells: int = 5
    w_gain: float = 1.0
    w_dist: float = 2.0
    inflate_cells: int = 1
    plan_stride: int = 2


class OccupancyGrid:
    """Log-odds team map over the world bounds; row = y cell, col = x cell."""

    def __init__(self, bounds, params: MapParams):
        self.params = params
        xmin, ymin, xmax, ymax = bounds
        self.origin = np.array([xmin, ymin])
        self.width = int(math.ceil((xmax - xmin) / params.resolution))
        self.height = int(math.ceil((ymax - ymin) / params.resolution))
        self.logodds = np.zeros((self.height, self.width), dtype=np.float64)

    @property
    def resolution(self) -> float:
        return self.params.resolution

    def world_to_cell(self, points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(points)
        cells = np.floor((pts - self.origin) / self.resolution).astype(int)
        cells[:, 0] = np.clip(cells[:, 0], 0, self.width - 1)
        cells[:, 1] = np.clip(cells[:, 1], 0, self.height - 1)
        return cells  # (N, 2) as (ix, iy)

    def cell_center(self, cells: np.ndarray) -> np.ndarray:
        return self.origin + (np.atleast_2d(cells) + 0.5) * self.resolution

    def states(self) -> np.ndarray:
        out = np.full(self.logodds.shape, UNKNOWN, dtype=np.int8)
        out[self.logodds >= self.params.occ_threshold] = OCCUPIED
        out[self.logodds <= self.params.free_threshold] = FREE
        return out

    def unknown_count(self) -> int:
        return int(np.sum(self.states() == UNKNOWN))

    def export_pgm(self) -> tuple[dict, bytes]:
        """Byte grid (0 free, 127 unknown, 255 occupied) plus metadata header."""
        states = self.states()
        img = np.full(states.shape, 127, dtype=np.uint8)
        img[states == FREE] = 0
        img[states == OCCUPIED] = 255
        meta = {
            "width": self.width,
            "height": self.height,
            "resolution": self.resolution,
            "origin": [float(self.origin[0]), float(self.origin[1])],
        }
        return meta, img.tobytes()


def update_map(grid: OccupancyGrid, pose: Pose, scan: ScanCloud) -> OccupancyGrid:
    """Ray-trace the raw sweep into the grid: traversed cells freer, hits occupied.

    Synthetic cloud points are ignored; a missed ray frees cells out to max
    range and marks nothing occupied.
    """
    p = grid.params
    ranges = scan.ranges
    finite = np.isfinite(ranges)
    trace_len = np.where(finite, np.minimum(ranges, scan.max_range), scan.max_range)
    dirs = np.stack([np.cos(scan.angles + pose.heading), np.sin(scan.angles + pose.heading)], axis=1)

    step = p.resolution / 2.0
    n_steps = int(math.ceil(scan.max_range / step)) + 1
    ts = np.arange(n_steps) * step  # (S,)
    sample_t = np.minimum(ts[None, :], trace_len[:, None])  # (B,S)
    pts = pose.position[None, None, :] + dirs[:, None, :] * sample_t[:, :, None]
    cells = np.floor((pts.reshape(-1, 2) - grid.origin) / p.resolution).astype(np.int64)
    np.clip(cells[:, 0], 0, grid.width - 1, out=cells[:, 0])
    np.clip(cells[:, 1], 0, grid.height - 1, out=cells[:, 1])
    flat = cells[:, 1] * grid.width + cells[:, 0]
    beam_ids = np.repeat(np.arange(len(ranges)), n_steps)

    end_pts = pose.position[None, :] + dirs * trace_len[:, None]
    end_cells = np.floor((end_pts - grid.origin) / p.resolution).astype(np.int64)
    np.clip(end_cells[:, 0], 0, grid.width - 1, out=end_cells[:, 0])
    np.clip(end_cells[:, 1], 0, grid.height - 1, out=end_cells[:, 1])
    end_flat = end_cells[:, 1] * grid.width + end_cells[:, 0]

    # free evidence: each (beam, cell) pair once, excluding the hit cell
    keep = end_flat[beam_ids] != flat
    pair = np.unique(beam_ids[keep] * (grid.width * grid.height) + flat[keep])
    free_cells = pair % (grid.width * grid.height)
    np.add.at(grid.logodds.reshape(-1), free_cells, -p.l_free)
    np.add.at(grid.logodds.reshape(-1), end_flat[finite], p.l_occ)
    np.clip(grid.logodds, -p.l_max, p.l_max, out=grid.logodds)
    return grid


@dataclass(frozen=True, eq=False)
class Frontier:
    centroid: np.ndarray  # world position of the representative frontier cell
    cell_count: int
    info_gain: int  # unknown cells within sensor range of the centroid


def detect_frontiers(grid: OccupancyGrid, sensor_range: float) -> list[Frontier]:
    """Connected groups of free cells bordering unknown space (8-connectivity).

    The reported centroid is snapped to the component cell nearest the mean,
    so it is always a real free cell.
    """
    states = grid.states()
    unknown = states == UNKNOWN
    near_unknown = ndimage.binary_dilation(unknown, structure=np.ones((3, 3), dtype=bool))
    mask = (states == FREE) & near_unknown
    labels, count = ndimage.label(mask, structure=np.ones((3, 3), dtype=int))
    out = []
    radius_cells = sensor_range / grid.resolution
    for lab in range(1, count + 1):
        ys, xs = np.nonzero(labels == lab)
        if len(ys) < grid.params.min_frontier_cells:
            continue
        mean = np.array([xs.mean(), ys.mean()])
        k = int(np.argmin((xs - mean[0]) ** 2 + (ys - mean[1]) ** 2))
        cx, cy = int(xs[k]), int(ys[k])
        y0, y1 = max(0, cy - int(radius_cells)), min(grid.height, cy + int(radius_cells) + 1)
        x0, x1 = max(0, cx - int(radius_cells)), min(grid.width, cx + int(radius_cells) + 1)
        wy, wx = np.nonzero(unknown[y0:y1, x0:x1])
        gain = int(np.sum((wx + x0 - cx) ** 2 + (wy + y0 - cy) ** 2 <= radius_cells**2))
        out.append(
            Frontier(
                centroid=grid.cell_center(np.array([[cx, cy]]))[0],
                cell_count=len(ys),
                info_gain=gain,
            )
        )
    out.sort(key=lambda f: (f.centroid[0], f.centroid[1]))
    return out


class PlanGraph:
    """Per-tick traversable mask and 8-connected cost graph, shared by all robots.

    Planning runs on a stride-downsampled copy of the map (the corridor scale
    is far coarser than mapping resolution); unknown space is traversable so
    paths into the frontier are attemptable.
    """

    def __init__(self, grid: OccupancyGrid, blocked: np.ndarray | None = None):
        p = grid.params
        s = p.plan_stride
        if blocked is None:
            blocked = self.blocked_mask(grid)
        h, w = blocked.shape
        self.free = ~blocked
        self.stride = s
        self.cell_size = p.resolution * s
        self.origin = grid.origin
        self.shape = (h, w)

        idx = np.arange(h * w).reshape(h, w)
        rows, cols, data = [], [], []
        for dy, dx, cost in ((0, 1, 1.0), (1, 0, 1.0), (1, 1, math.sqrt(2)), (1, -1, math.sqrt(2))):
            ys, xs = np.mgrid[max(0, -dy) : h - max(0, dy), max(0, -dx) : w - max(0, dx)]
            src = idx[ys, xs]
            dst = idx[ys + dy, xs + dx]
            ok = self.free[ys, xs] & self.free[ys + dy, xs + dx]
            rows.append(src[ok])
            cols.append(dst[ok])
            data.append(np.full(int(ok.sum()), cost * self.cell_size))
        rows = np.concatenate(rows)
        cols = np.concatenate(cols)
        data = np.concatenate(data)
        self.graph = csr_matrix(
            (np.concatenate([data, data]), (np.concatenate([rows, cols]), np.concatenate([cols, rows]))),
            shape=(h * w, h * w),
        )

    @staticmethod
    def blocked_mask(grid: OccupancyGrid) -> np.ndarray:
        """Downsampled blocked mask: occupied pooled to blocks, then inflated
        by ceil(inflate_cells/stride) blocks (coarse inflation is at least as
        wide as the map-resolution request)."""
        p = grid.params
        s = p.plan_stride
        occ = grid.states() == OCCUPIED
        h = grid.height // s
        w = grid.width // s
        blocked = occ[: h * s, : w * s].reshape(h, s, w, s).any(axis=(1, 3))
        radius = -(-p.inflate_cells // s)
        if radius > 0:
            k = 2 * radius + 1
            blocked = ndimage.binary_dilation(blocked, structure=np.ones((k, k), dtype=bool))
        return blocked


class PlanField:
    """Shortest-path field from one robot's position over a PlanGraph.

    Exposes metric distances to arbitrary world points and path extraction
    via predecessors.
    """

    def __init__(self, grid_or_graph, start_world: np.ndarray):
        pg = grid_or_graph if isinstance(grid_or_graph, PlanGraph) else PlanGraph(grid_or_graph)
        self.free = pg.free
        self.stride = pg.stride
        self.cell_size = pg.cell_size
        self.origin = pg.origin
        self.shape = pg.shape
        h, w = self.shape
        start = self._snap(start_world)
        if start is None:
            self.dist = np.full(h * w, np.inf)
            self.pred = np.full(h * w, -9999, dtype=np.int32)
            return
        self.dist, self.pred = dijkstra(pg.graph, indices=start, return_predecessors=True)

    def _to_block(self, world: np.ndarray):
        bx = int((world[0] - self.origin[0]) / self.cell_size)
        by = int((world[1] - self.origin[1]) / self.cell_size)
        if 0 <= by < self.shape[0] and 0 <= bx < self.shape[1]:
            return by, bx
        return None

    def _snap(self, world: np.ndarray, radius: int = 3):
        blk = self._to_block(world)
        if blk is None:
            return None
        by, bx = blk
        if self.free[by, bx]:
            return by * self.shape[1] + bx
        best, best_d = None, None
        for dy in range(-radius, radius + 1):
            for dx in range(-radius, radius + 1):
                y, x = by + dy, bx + dx
                if 0 <= y < self.shape[0] and 0 <= x < self.shape[1] and self.free[y, x]:
                    d = dy * dy + dx * dx
                    if best is None or d < best_d:
                        best, best_d = y * self.shape[1] + x, d
        return best

    def block_center(self, node: int) -> np.ndarray:
        by, bx = divmod(node, self.shape[1])
        return self.origin + (np.array([bx, by]) + 0.5) * self.cell_size

    def distance_to(self, target_world: np.ndarray) -> float:
        node = self._snap(target_world)
        if node is None:
            return math.inf
        return float(self.dist[node])

    def path_to(self, target_world: np.ndarray) -> list[np.ndarray]:
        """Waypoint chain from the field's start to the target (world coords)."""
        node = self._snap(target_world)
        if node is None or not np.isfinite(self.dist[node]):
            raise NoPath("target unreachable on the traversable mask")
        chain = []
        cur = node
        while cur >= 0:
            chain.append(cur)
            cur = int(self.pred[cur])
            if cur == -9999:
                break
        chain.reverse()
        pts = [self.block_center(c) for c in chain]
        pts.append(np.asarray(target_world, dtype=float))
        return pts


def plan_waypoint(
    grid: OccupancyGrid,
    robot_pose: Pose,
    target: np.ndarray,
    region: VisibleRegion,
    field: PlanField | None = None,
) -> np.ndarray:
    """Serve the farthest shortest-path vertex the robot can currently see.

    Falls back to the first path vertex when nothing later is classified
    visible (e.g. right after turning into a corner).

    Raises:
        NoPath: propagated when the target is unreachable.
    """
    if field is None:
        field = PlanField(grid, robot_pose.position)
    path = field.path_to(target)
    pts = np.array(path)
    visible = region.classify_world(pts) > 0.0
    if np.any(visible):
        return pts[int(np.nonzero(visible)[0][-1])]
    return pts[0]


@dataclass
class TargetAssignment:
    targets: dict[int, np.ndarray] = field(default_factory=dict)
    dwell_remaining: dict[int, int] = field(default_factory=dict)
    pick_order: list[int] = field(default_factory=list)  # robot ids, best pick first


def assign_targets(
    frontiers: list[Frontier],
    robot_ids: list[int],
    path_distance,
    params: MapParams,
) -> TargetAssignment:
    """Greedy utility matching of frontiers to robots, each used at most once.

    utility = w_gain * info_gain - w_dist * path_distance; unreachable
    frontiers are skipped. Ties break on (robot id, frontier index).

    `path_distance(robot_id, frontier_index)` supplies grid path lengths.
    """
    assignment = TargetAssignment()
    free_robots = list(robot_ids)
    free_fronts = list(range(len(frontiers)))
    while free_robots and free_fronts:
        best = None
        for r in free_robots:
            for f in free_fronts:
                d = path_distance(r, f)
                if not math.isfinite(d):
                    continue
                u = params.w_gain * frontiers[f].info_gain - params.w_dist * d
                key = (-u, r, f)
                if best is None or key < best[0]:
                    best = (key, r, f)
        if best is None:
            break
        _, r, f = best
        assignment.targets[r] = frontiers[f].centroid.copy()
        assignment.pick_order.append(r)
        free_robots.remove(r)
        free_fronts.remove(f)
    return assignment


def navigation_velocity(position: np.ndarray, waypoint: np.ndarray, target: np.ndarray, arrival_radius: float) -> np.ndarray:
    """Unit pull toward the waypoint; zero once inside the target's arrival disk."""
    if float(np.linalg.norm(target - position)) <= arrival_radius:
        return np.zeros(2)
    delta = np.asarray(waypoint, dtype=float) - position
    norm = float(np.linalg.norm(delta))
    if norm < 1e-12:
        return np.zeros(2)
    return delta / norm


def elect_roles(target_distances: dict[int, float], k_lead: float, k_sec: float):
    """Leading role (and gain) to the robot closest to its own target.

    Returns {robot_id: (role, k_n)} for the assigned robots; ties break
    toward the lower id. Empty input leaves nobody leading.
    """
    from .world import Role  # local import to avoid a module cycle

    if not target_distances:
        return {}
    leader = min(target_distances, key=lambda r: (target_distances[r], r))
    out = {}
    for r in target_distances:
        if r == leader:
            out[r] = (Role.LEADING, k_lead)
        else:
            out[r] = (Role.SECONDARY, k_sec)
    return out
