"""Planar geometry primitives: convex hulls, point/segment tests, raycasting.

Everything here is a pure function on immutable inputs. Points are numpy
arrays of shape (2,) (or (N, 2) for batches), in meters.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

EPS = 1e-9


class DegenerateInput(ValueError):
    """Input has no well-defined result (too few points, all collinear, ...)."""


def vec2(x: float, y: float) -> np.ndarray:
    v = np.array([float(x), float(y)])
    if not np.all(np.isfinite(v)):
        raise ValueError(f"non-finite coordinates: ({x}, {y})")
    return v


def require_finite(arr: np.ndarray, name: str = "points") -> np.ndarray:
    arr = np.asarray(arr, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains NaN/Inf")
    return arr


def rotation(theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]])


@dataclass(frozen=True, eq=False)
class Pose:
    """World-frame position plus heading of a sensing robot."""

    position: np.ndarray
    heading: float

    def world_to_local(self, points: np.ndarray) -> np.ndarray:
        # row-vector form of R^T (p - q)
        return (np.asarray(points, dtype=float) - self.position) @ rotation(self.heading)

    def local_to_world(self, points: np.ndarray) -> np.ndarray:
        return np.asarray(points, dtype=float) @ rotation(self.heading).T + self.position


@dataclass(frozen=True, eq=False)
class Polygon:
    """Simple polygon with counter-clockwise vertex order; interior is solid."""

    vertices: np.ndarray  # (V, 2)

    def __post_init__(self):
        v = require_finite(self.vertices, "polygon vertices")
        if v.ndim != 2 or v.shape[1] != 2 or len(v) < 3:
            raise DegenerateInput("polygon needs >= 3 planar vertices")
        object.__setattr__(self, "vertices", v)
        if self.signed_area() <= 0:
            raise ValueError("polygon vertices must be counter-clockwise")
        if _self_intersects(v):
            raise ValueError("polygon is self-intersecting")

    def signed_area(self) -> float:
        v = self.vertices
        w = np.roll(v, -1, axis=0)
        return 0.5 * float(np.sum(v[:, 0] * w[:, 1] - w[:, 0] * v[:, 1]))

    def edges(self) -> tuple[np.ndarray, np.ndarray]:
        return self.vertices, np.roll(self.vertices, -1, axis=0)

    def contains(self, points: np.ndarray, boundary: bool = True) -> np.ndarray:
        """Even-odd containment test; points on the boundary count as inside.

        Args:
            points: (2,) or (P, 2) query points.
            boundary: whether boundary points (within EPS) count as contained.

        Returns:
            Boolean scalar or (P,) boolean array.
        """
        pts = require_finite(np.atleast_2d(points))
        a, b = self.edges()
        ya, yb = a[:, 1], b[:, 1]
        py = pts[:, 1][:, None]
        px = pts[:, 0][:, None]
        straddle = (ya[None, :] > py) != (yb[None, :] > py)
        with np.errstate(divide="ignore", invalid="ignore"):
            xcross = (b[:, 0] - a[:, 0])[None, :] * (py - ya[None, :]) / (yb - ya)[None, :] + a[:, 0][None, :]
        crossings = np.sum(straddle & (px < xcross), axis=1)
        inside = (crossings % 2) == 1
        if boundary:
            d = _point_segment_distance(pts, a, b)
            inside |= np.min(d, axis=1) <= EPS
        return inside if np.asarray(points).ndim == 2 else bool(inside[0])


@dataclass(frozen=True, eq=False)
class HullEdge:
    """One face of a convex hull: anchor a, unit outward normal n, end b."""

    a: np.ndarray
    n: np.ndarray
    b: np.ndarray


def _self_intersects(v: np.ndarray) -> bool:
    n = len(v)
    a = v
    b = np.roll(v, -1, axis=0)
    for i in range(n):
        for j in range(i + 1, n):
            if j == i + 1 or (i == 0 and j == n - 1):
                continue  # adjacent edges share a vertex
            if _segments_intersect(a[i], b[i], a[j], b[j]):
                return True
    return False


def _cross(o, p, q) -> float:
    return (p[0] - o[0]) * (q[1] - o[1]) - (p[1] - o[1]) * (q[0] - o[0])


def _on_segment(p, a, b, eps=EPS) -> bool:
    return (
        min(a[0], b[0]) - eps <= p[0] <= max(a[0], b[0]) + eps
        and min(a[1], b[1]) - eps <= p[1] <= max(a[1], b[1]) + eps
    )


def _segments_intersect(p1, p2, q1, q2) -> bool:
    d1 = _cross(q1, q2, p1)
    d2 = _cross(q1, q2, p2)
    d3 = _cross(p1, p2, q1)
    d4 = _cross(p1, p2, q2)
    if ((d1 > 0 and d2 < 0) or (d1 < 0 and d2 > 0)) and ((d3 > 0 and d4 < 0) or (d3 < 0 and d4 > 0)):
        return True
    scale = max(1.0, abs(p1[0]), abs(p1[1]), abs(p2[0]), abs(p2[1]), abs(q2[0]), abs(q2[1]))
    eps = 1e-12 * scale
    if abs(d1) <= eps and _on_segment(p1, q1, q2):
        return True
    if abs(d2) <= eps and _on_segment(p2, q1, q2):
        return True
    if abs(d3) <= eps and _on_segment(q1, p1, p2):
        return True
    if abs(d4) <= eps and _on_segment(q2, p1, p2):
        return True
    return False


def _point_segment_distance(pts: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Distance from each point to each segment; pts (P,2), a/b (E,2) -> (P,E)."""
    ab = b - a  # (E,2)
    ap = pts[:, None, :] - a[None, :, :]  # (P,E,2)
    denom = np.einsum("ed,ed->e", ab, ab)
    denom = np.where(denom < 1e-300, 1.0, denom)
    t = np.clip(np.einsum("ped,ed->pe", ap, ab) / denom[None, :], 0.0, 1.0)
    closest = a[None, :, :] + t[:, :, None] * ab[None, :, :]
    return np.linalg.norm(pts[:, None, :] - closest, axis=2)


def convex_hull_arrays(points: np.ndarray):
    """Array form of convex_hull: (anchors, normals, ends), CCW, deterministic.

    Monotone chain over lexicographically sorted points; near-duplicates
    (within 1e-9) merge and collinear points drop, so every face has a
    distinct outward normal. The loop starts at the lexicographic minimum.

    Raises:
        DegenerateInput: fewer than 3 distinct points, or all collinear.
    """
    pts = require_finite(points)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise DegenerateInput("expected an (N, 2) point array")
    order = np.lexsort((pts[:, 1], pts[:, 0]))
    pts = pts[order]
    # drop near-duplicates (zero-length edges have undefined normals); points
    # are lexsorted so duplicates are adjacent
    dif = np.abs(np.diff(pts, axis=0)).max(axis=1)
    mask = np.concatenate([[True], dif > EPS])
    rows = pts[mask].tolist()
    keep = [(p[0], p[1]) for p in rows]
    if len(keep) < 3:
        raise DegenerateInput("need at least 3 distinct points")

    def half(seq):
        out = []
        for p in seq:
            px, py = p[0], p[1]
            while len(out) > 1:
                bx, by = out[-1]
                ax, ay = out[-2]
                if (bx - ax) * (py - ay) - (by - ay) * (px - ax) <= 0:
                    out.pop()
                else:
                    break
            out.append((px, py))
        return out

    upper = half(keep)
    lower = half(keep[::-1])
    loop = upper[:-1] + lower[:-1]
    if len(loop) < 3:
        raise DegenerateInput("all points collinear")
    loop = np.array(loop)
    # normalize orientation to CCW regardless of chain convention
    area = 0.5 * np.sum(loop[:, 0] * np.roll(loop[:, 1], -1) - np.roll(loop[:, 0], -1) * loop[:, 1])
    if area < 0:
        loop = loop[::-1]
    start = int(np.lexsort((loop[:, 1], loop[:, 0]))[0])
    anchors = np.roll(loop, -start, axis=0)
    ends = np.roll(anchors, -1, axis=0)
    t = ends - anchors
    normals = np.stack([t[:, 1], -t[:, 0]], axis=1)  # outward for CCW loops
    normals /= np.linalg.norm(normals, axis=1)[:, None]
    return anchors, normals, ends


def convex_hull(points: np.ndarray) -> list[HullEdge]:
    """Convex hull of 2D points as a closed CCW loop of faces.

    Monotone-chain construction over lexicographically sorted points;
    near-duplicate points (within 1e-9) are merged first and collinear
    points are dropped, so every face has a distinct outward normal.

    Raises:
        DegenerateInput: fewer than 3 distinct points, or all collinear.
    """
    anchors, normals, ends = convex_hull_arrays(points)
    return [HullEdge(a=a, n=n, b=b) for a, n, b in zip(anchors, normals, ends)]


def stack_edges(world: list[Polygon], bounds: tuple[float, float, float, float] | None = None):
    """Flatten polygon (plus optional bounding-box) edges into (E,2) arrays."""
    starts, ends = [], []
    for poly in world:
        a, b = poly.edges()
        starts.append(a)
        ends.append(b)
    if bounds is not None:
        xmin, ymin, xmax, ymax = bounds
        box = np.array([[xmin, ymin], [xmax, ymin], [xmax, ymax], [xmin, ymax]])
        starts.append(box)
        ends.append(np.roll(box, -1, axis=0))
    if not starts:
        return np.zeros((0, 2)), np.zeros((0, 2))
    return np.concatenate(starts), np.concatenate(ends)


def segment_hits_obstacles(p: np.ndarray, q: np.ndarray, world: list[Polygon]) -> bool:
    """True iff any point of segment pq lies inside or on an obstacle polygon."""
    p = require_finite(p, "p")
    q = require_finite(q, "q")
    for poly in world:
        lo = np.minimum(p, q) - EPS
        hi = np.maximum(p, q) + EPS
        vmin = poly.vertices.min(axis=0)
        vmax = poly.vertices.max(axis=0)
        if np.any(vmax < lo) or np.any(vmin > hi):
            continue
        if poly.contains(p) or poly.contains(q):
            return True
        a, b = poly.edges()
        for i in range(len(a)):
            if _segments_intersect(p, q, a[i], b[i]):
                return True
    return False


def cast_rays(
    origin: np.ndarray,
    angles: np.ndarray,
    max_range: float,
    edge_starts: np.ndarray,
    edge_ends: np.ndarray,
) -> np.ndarray:
    """Batch raycast: range per angle, np.inf where nothing is hit in range."""
    origin = require_finite(origin, "origin")
    angles = np.asarray(angles, dtype=float)
    if len(edge_starts) == 0:
        return np.full(len(angles), np.inf)
    d = np.stack([np.cos(angles), np.sin(angles)], axis=1)  # (R,2)
    e = edge_ends - edge_starts  # (E,2)
    ao = edge_starts - origin  # (E,2)
    denom = d[:, None, 0] * e[None, :, 1] - d[:, None, 1] * e[None, :, 0]  # (R,E)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = (ao[None, :, 0] * e[None, :, 1] - ao[None, :, 1] * e[None, :, 0]) / denom
        u = (ao[None, :, 0] * d[:, None, 1] - ao[None, :, 1] * d[:, None, 0]) / denom
    hit = (np.abs(denom) > 1e-300) & (t > 1e-9) & (u >= -1e-12) & (u <= 1 + 1e-12)
    t = np.where(hit, t, np.inf)
    best = t.min(axis=1)
    return np.where(best <= max_range, best, np.inf)


def cast_ray(origin: np.ndarray, angle: float, max_range: float, world: list[Polygon]) -> float | None:
    """Distance to the nearest polygon boundary along one ray, or None."""
    if max_range <= 0:
        raise ValueError("max_range must be positive")
    starts, ends = stack_edges(world)
    r = cast_rays(origin, np.array([angle]), max_range, starts, ends)[0]
    return None if math.isinf(r) else float(r)
