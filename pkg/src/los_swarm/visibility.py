"""Visible-region construction from lidar scans and the smooth LoS-distance metric.

A robot's star-convex visible region is obtained by spherically flipping its
(gap-filled) scan about a large circle and taking the convex hull of the
flipped points. A query point is visible when its own flipped image lies on
or outside that hull. The signed face distances of the flipped query also
yield a smooth, sensitivity-penalized distance-to-region with an analytic
gradient, which is what the connectivity controller consumes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import HullEdge, Pose, convex_hull_arrays, require_finite


class EmptyScan(ValueError):
    """Scan sweep with no rays."""


class OriginPoint(ValueError):
    """Spherical flip is undefined at the sensor origin."""


class CoincidentRobots(ValueError):
    """Query point coincides with the region's sensing origin."""


@dataclass(frozen=True, eq=False)
class ScanCloud:
    """One robot's 2D scan in its local frame, after gap filling.

    `points` includes synthetic entries (max-range stand-ins for misses and
    chord interpolants); `ranges`/`angles` keep the raw sweep so consumers
    that must not see synthetic geometry (mapping, nearest-obstacle picking)
    can tell them apart.
    """

    points: np.ndarray  # (N, 2) local frame
    max_range: float
    angular_resolution: float
    ranges: np.ndarray = field(default_factory=lambda: np.zeros(0))  # raw, inf = miss
    angles: np.ndarray = field(default_factory=lambda: np.zeros(0))


@dataclass(frozen=True, eq=False)
class VisibleRegion:
    """Faces of the flipped-scan convex hull, anchored at the owner's pose."""

    anchors: np.ndarray  # (K, 2) face anchor points, flipped local frame
    normals: np.ndarray  # (K, 2) unit outward normals
    ends: np.ndarray  # (K, 2) face end points
    flip_radius: float
    owner_pose: Pose

    @property
    def num_faces(self) -> int:
        return len(self.anchors)

    def edges(self) -> list[HullEdge]:
        return [HullEdge(a=a, n=n, b=b) for a, n, b in zip(self.anchors, self.normals, self.ends)]

    def face_distances(self, q_flipped: np.ndarray) -> np.ndarray:
        """Signed distance of flipped points to every face; (K,) or (P, K)."""
        q = np.asarray(q_flipped, dtype=float)
        return q @ self.normals.T - np.einsum("kd,kd->k", self.normals, self.anchors)

    def classify_world(self, points_world: np.ndarray) -> np.ndarray:
        """Hard visibility margin for world-frame points (positive = visible)."""
        pts = np.atleast_2d(points_world)
        local = self.owner_pose.world_to_local(pts)
        norms = np.linalg.norm(local, axis=1)
        norms = np.maximum(norms, 1e-12)
        flipped = local * (2.0 * self.flip_radius / norms - 1.0)[:, None]
        d = self.face_distances(flipped)
        out = d.max(axis=1)
        return out if np.asarray(points_world).ndim == 2 else out[0]

    def outline_world(self) -> np.ndarray:
        """Star-convex region boundary in the world frame (inverse-flipped hull)."""
        inv = spherical_flip(self.anchors, self.flip_radius)
        return self.owner_pose.local_to_world(inv)

    def to_wire(self) -> dict:
        return {
            "faces": [[float(a[0]), float(a[1]), float(n[0]), float(n[1])] for a, n in zip(self.anchors, self.normals)],
            "flip_radius": self.flip_radius,
            "owner": [float(self.owner_pose.position[0]), float(self.owner_pose.position[1]), float(self.owner_pose.heading)],
        }

    @staticmethod
    def from_wire(payload: dict) -> "VisibleRegion":
        faces = np.asarray(payload["faces"], dtype=float)
        anchors = faces[:, :2]
        normals = faces[:, 2:]
        ends = np.roll(anchors, -1, axis=0)
        ox, oy, heading = payload["owner"]
        return VisibleRegion(
            anchors=anchors,
            normals=normals,
            ends=ends,
            flip_radius=float(payload["flip_radius"]),
            owner_pose=Pose(np.array([ox, oy]), float(heading)),
        )


@dataclass(frozen=True, eq=False)
class LoSDistance:
    """Smooth LoS-distance of a point into a region, with its local gradient.

    `value` is the softmax-smoothed visibility margin scaled by the softmax
    average of the face-alignment cosines, so configurations that would lose
    visibility under a small sideways move score lower than head-on ones at
    the same margin. `grad_local` is d(value)/d(q) in the owner's frame.
    """

    value: float
    grad_local: np.ndarray
    d_star: float
    cos_theta_star: float


def spherical_flip(p: np.ndarray, r: float) -> np.ndarray:
    """Reflect point(s) about the circle of radius r: p -> 2r*p/|p| - p."""
    arr = require_finite(p, "p")
    single = arr.ndim == 1
    pts = np.atleast_2d(arr)
    norms = np.linalg.norm(pts, axis=1)
    if np.any(norms <= 1e-9):
        raise OriginPoint("cannot flip a point at the sensor origin")
    out = pts * (2.0 * r / norms - 1.0)[:, None]
    return out[0] if single else out


def augment(
    ranges: np.ndarray,
    angles: np.ndarray,
    max_range: float,
    gap_chord: float,
    body_radius: float = 0.0,
) -> ScanCloud:
    """Fill a raw 360-degree sweep into a gap-free point cloud.

    Misses (inf/NaN ranges) become synthetic points at max_range. Adjacent
    returns (including the wrap-around pair) further apart than `gap_chord`
    get ceil(gap/gap_chord)-1 interpolants along their chord, so no two
    consecutive cloud points are more than `gap_chord` apart.
    """
    ranges = np.asarray(ranges, dtype=float)
    angles = np.asarray(angles, dtype=float)
    if len(ranges) == 0:
        raise EmptyScan("no rays in sweep")
    if np.any(np.diff(angles) <= 0):
        raise ValueError("ray angles must be strictly increasing")
    filled = np.where(np.isfinite(ranges), ranges, max_range)
    filled = np.minimum(filled, max_range)
    pts = filled[:, None] * np.stack([np.cos(angles), np.sin(angles)], axis=1)
    if body_radius > 0:
        keep = filled >= body_radius
        pts = pts[keep]
        if len(pts) == 0:
            raise EmptyScan("all returns inside the robot body")
    nxt = np.roll(pts, -1, axis=0)
    gaps = np.linalg.norm(nxt - pts, axis=1)
    wide = np.nonzero(gaps > gap_chord)[0]
    out = [pts]
    for i in wide:
        m = math.ceil(gaps[i] / gap_chord) - 1
        fracs = np.arange(1, m + 1) / (m + 1)
        out.append(pts[i] + fracs[:, None] * (nxt[i] - pts[i]))
    pts_out = np.concatenate(out)
    # interpolants across a wide wedge could swing arbitrarily close to the
    # sensor; the flip map is singular there
    pts_out = pts_out[np.linalg.norm(pts_out, axis=1) >= max(body_radius, 1e-6)]
    step = float(np.median(np.diff(angles))) if len(angles) > 1 else 2 * math.pi
    return ScanCloud(
        points=pts_out,
        max_range=max_range,
        angular_resolution=step,
        ranges=ranges,
        angles=angles,
    )


def build_visible_region(cloud: ScanCloud, r: float, owner_pose: Pose) -> VisibleRegion:
    """Flip the cloud about radius r and take the convex hull of the result."""
    if len(cloud.points) == 0:
        raise EmptyScan("empty cloud")
    if r <= 2.0 * cloud.max_range:
        raise ValueError("flip radius must exceed twice the scan range")
    flipped = spherical_flip(cloud.points, r)
    anchors, normals, ends = convex_hull_arrays(flipped)
    return VisibleRegion(anchors=anchors, normals=normals, ends=ends, flip_radius=r, owner_pose=owner_pose)


def soft_visibility_distance(region: VisibleRegion, q_flipped: np.ndarray, alpha: float) -> float:
    """Smooth upper bound of the max face distance (log-sum-exp, stabilized)."""
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    d = region.face_distances(np.asarray(q_flipped, dtype=float))
    m = float(d.max())
    return m + math.log(float(np.sum(np.exp(alpha * (d - m))))) / alpha


def _soft_metric_local(region: VisibleRegion, q_local: np.ndarray, alpha: float):
    """Value, local gradient, and softmax aggregates at a local-frame point."""
    n = float(np.linalg.norm(q_local))
    r = region.flip_radius
    q_flip = q_local * (2.0 * r / n - 1.0)
    qf_norm = float(np.linalg.norm(q_flip))
    n_r = q_flip / qf_norm

    d = region.face_distances(q_flip)
    m = float(d.max())
    e = np.exp(alpha * (d - m))
    z = float(e.sum())
    w = e / z
    lse = m + math.log(z) / alpha
    cos_t = np.clip(region.normals @ n_r, -1.0, 1.0)
    c_hat = float(w @ cos_t)
    value = lse * c_hat

    n_hat = w @ region.normals  # softmax-average normal
    m_hat = w @ (region.normals * cos_t[:, None])  # softmax average of cos * normal
    # d(value)/d(q_flip): product rule over lse and the cosine average, where
    # the cosine average moves with both the softmax weights and n_r
    g_flip = (
        c_hat * n_hat
        + (lse / qf_norm) * (n_hat - c_hat * n_r)
        + alpha * lse * (m_hat - c_hat * n_hat)
    )
    # chain through the flip map q -> (2r/|q|)q - q
    jac = (2.0 * r / n) * np.eye(2) - (2.0 * r / n**3) * np.outer(q_local, q_local) - np.eye(2)
    grad_local = jac.T @ g_flip
    return value, grad_local, lse, c_hat, float(d.max()), w, n_r


def los_distance(region: VisibleRegion, q_i_world: np.ndarray, pose_j: Pose, alpha: float) -> LoSDistance:
    """Smooth LoS-distance of a world point into `region`, with gradient.

    The gradient is exact for the smoothed metric and is returned in the
    region owner's local frame (d value / d q_local); rotate by the owner
    heading to move it to the world frame.

    Raises:
        CoincidentRobots: query point is at the region's sensing origin.
    """
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    q_local = pose_j.world_to_local(require_finite(q_i_world, "q_i_world"))
    n = float(np.linalg.norm(q_local))
    if n <= 1e-6:
        raise CoincidentRobots("query point at the sensing origin")
    if n >= region.flip_radius:
        raise ValueError("query point beyond the flip radius")
    value, grad_local, lse, c_hat, _, _, _ = _soft_metric_local(region, q_local, alpha)
    return LoSDistance(value=value, grad_local=grad_local, d_star=lse, cos_theta_star=c_hat)


def classification_margin(region: VisibleRegion, points_world: np.ndarray):
    """Hard visibility margin plus its local trust band, per world point.

    The region boundary is interpolated between two actual scan points (the
    active face's end points, inverse-flipped); classification is only
    sampling-limited within about that chord of the boundary. The returned
    band is 2x the active face's source-chord length, propagated into margin
    units through the face's tangential/radial sensitivity at the query, so
    |margin| > band means the sign is decided by geometry rather than by ray
    discretization.

    Returns:
        (margin, band) arrays; margin > 0 means classified visible.
    """
    pts = np.atleast_2d(points_world)
    local = region.owner_pose.world_to_local(pts)
    rho = np.linalg.norm(local, axis=1)
    rho = np.maximum(rho, 1e-12)
    r = region.flip_radius
    flipped = local * (2.0 * r / rho - 1.0)[:, None]
    d = region.face_distances(flipped)
    kstar = np.argmax(d, axis=1)
    margin = d[np.arange(len(pts)), kstar]
    n_r = flipped / np.linalg.norm(flipped, axis=1)[:, None]
    nk = region.normals[kstar]
    cos_t = np.clip(np.einsum("pd,pd->p", n_r, nk), -1.0, 1.0)
    sin_t = np.sqrt(np.maximum(0.0, 1.0 - cos_t**2))
    a_true = spherical_flip(region.anchors[kstar], r)
    b_true = spherical_flip(region.ends[kstar], r)
    chord = np.linalg.norm(b_true - a_true, axis=1)
    gain = (2.0 * r - rho) / rho
    band = 2.0 * chord * (gain * sin_t + np.abs(cos_t))
    return margin, band


def simplified_los_gradient(region: VisibleRegion, q_i_world: np.ndarray, pose_j: Pose, alpha: float) -> np.ndarray:
    """One-hot-limit form of the metric gradient (w.r.t. the flipped point).

    Keeps only the argmax face: cos(t*) n* + (d*/|q'|)(n* - cos(t*) n_r).
    Used in tests as a cross-check of the exact gradient at large alpha.
    """
    q_local = pose_j.world_to_local(q_i_world)
    n = float(np.linalg.norm(q_local))
    r = region.flip_radius
    q_flip = q_local * (2.0 * r / n - 1.0)
    qf_norm = float(np.linalg.norm(q_flip))
    n_r = q_flip / qf_norm
    d = region.face_distances(q_flip)
    k = int(np.argmax(d))
    nk = region.normals[k]
    cos_k = float(np.clip(nk @ n_r, -1.0, 1.0))
    return cos_k * nk + (float(d[k]) / qf_norm) * (nk - cos_k * n_r)


def sensitivity_delta_check(region: VisibleRegion, q_ji: np.ndarray, xi_t: float):
    """Predicted vs recomputed change of the hard margin under a tangential nudge.

    predicted follows the small-motion analysis ((2r-|q|)/|q| * xi * sin t*);
    actual recomputes the hard max face distance after the nudge.
    """
    q = require_finite(q_ji, "q_ji")
    n = float(np.linalg.norm(q))
    if xi_t > 1e-4 * n:
        raise ValueError("perturbation too large for the linearized prediction")
    e_r = q / n
    e_t = np.array([-e_r[1], e_r[0]])
    r = region.flip_radius

    d0 = region.face_distances(spherical_flip(q, r))
    k = int(np.argmax(d0))
    nk = region.normals[k]
    sin_k = e_r[0] * nk[1] - e_r[1] * nk[0]  # signed sine between n_r and the face normal
    predicted = ((2.0 * r - n) / n) * xi_t * sin_k

    d1 = region.face_distances(spherical_flip(q + xi_t * e_t, r))
    actual = float(d1.max() - d0[k])
    return predicted, actual
