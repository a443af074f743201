"""Edge-weight potentials, LoS-distance fusion, weighted Laplacian, and the
connectivity velocity command.

Each edge weight is a product of three potentials: a communication-range
falloff, a LoS potential driven by the fused visibility distances of the two
endpoint robots, and a collision potential that aggregates the clearance of
every edge touching either endpoint (so one near-collision kills all of a
robot's edges). The Fiedler pair of the resulting Laplacian feeds a barrier
on its second eigenvalue; its gradient through the weights is the per-robot
connectivity velocity.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import Pose, rotation
from .visibility import VisibleRegion, los_distance

log = logging.getLogger(__name__)


class ConnectivityCritical(RuntimeError):
    """Fiedler value fell to (or below) its configured floor."""


@dataclass(frozen=True)
class WeightParams:
    """Gains and breakpoint bands for the three edge-weight potentials."""

    k_alpha: float = 1.0
    k_s: float = 1.0
    k_gamma: float = 1.0
    d_com_min: float = 6.0
    d_com_max: float = 10.0
    d_coll_min: float = 0.3
    d_coll_max: float = 1.2
    d_los_min: float = 0.3
    d_los_max: float = 2.0
    fusion_c: float = 0.5
    lse_alpha: float = 100.0
    lambda2_min: float = 0.05

    def __post_init__(self):
        for name in ("k_alpha", "k_s", "k_gamma", "lse_alpha", "lambda2_min"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.fusion_c < 0:
            raise ValueError("fusion_c must be nonnegative")
        for lo, hi in (
            ("d_com_min", "d_com_max"),
            ("d_coll_min", "d_coll_max"),
            ("d_los_min", "d_los_max"),
        ):
            if not 0 <= getattr(self, lo) < getattr(self, hi):
                raise ValueError(f"need 0 <= {lo} < {hi}")


def _cosine_rise(d: float, d_min: float, d_max: float, k: float):
    """0 below d_min, k above d_max, C1 cosine ramp in between."""
    if d <= d_min:
        return 0.0, 0.0
    if d >= d_max:
        return k, 0.0
    x = (d - d_min) / (d_max - d_min)
    value = 0.5 * k * (1.0 - math.cos(math.pi * x))
    deriv = 0.5 * k * math.pi * math.sin(math.pi * x) / (d_max - d_min)
    return value, deriv


def weight_alpha(d_ij: float, p: WeightParams):
    """Communication-range potential: k_alpha plateau, cosine falloff, zero."""
    if d_ij < 0:
        raise ValueError("distance must be nonnegative")
    if d_ij <= p.d_com_min:
        return p.k_alpha, 0.0
    if d_ij >= p.d_com_max:
        return 0.0, 0.0
    x = (d_ij - p.d_com_min) / (p.d_com_max - p.d_com_min)
    value = 0.5 * p.k_alpha * (1.0 + math.cos(math.pi * x))
    deriv = -0.5 * p.k_alpha * math.pi * math.sin(math.pi * x) / (p.d_com_max - p.d_com_min)
    return value, deriv


def weight_beta(d_los: float, p: WeightParams):
    """LoS potential: zero below the band, cosine rise, k_s plateau."""
    return _cosine_rise(d_los, p.d_los_min, p.d_los_max, p.k_s)


def weight_gamma_star(d: float, p: WeightParams):
    """Pairwise clearance potential: zero inside d_coll_min, k_gamma when safe."""
    if d < 0:
        raise ValueError("distance must be nonnegative")
    return _cosine_rise(d, p.d_coll_min, p.d_coll_max, p.k_gamma)


@dataclass(frozen=True, eq=False)
class GammaFactor:
    """One clearance factor of an edge's collision weight.

    `grad_i` is d(value)/d(q_i) for the robot whose edge gradient is being
    assembled; factors whose distance does not involve that robot carry zero.
    """

    value: float
    grad_i: np.ndarray


def weight_gamma(i: int, j: int, factors: list[GammaFactor]):
    """Product of clearance factors with its gradient w.r.t. robot i.

    The gradient uses the product-rule expansion (each term multiplies all
    *other* factor values), so a zero factor yields a well-defined gradient
    instead of dividing by zero.
    """
    k = len(factors)
    values = np.array([f.value for f in factors]) if k else np.zeros(0)
    total = float(np.prod(values)) if k else 1.0
    grad = np.zeros(2)
    if k:
        prefix = np.concatenate([[1.0], np.cumprod(values[:-1])])
        suffix = np.concatenate([np.cumprod(values[::-1])[-2::-1], [1.0]])
        others = prefix * suffix
        for m, f in enumerate(factors):
            grad += others[m] * f.grad_i
    return total, grad


def fuse_los(d_ij_hat: float, d_ji_hat: float, c: float):
    """Symmetric fusion of the two directional LoS-distances.

    Interpolates between the harmonic mean (c=0) and the arithmetic mean
    (large c) of the two values, always staying within [min, max]. Returns
    (value, d/d first, d/d second).
    """
    a, b = float(d_ij_hat), float(d_ji_hat)
    s = a + b + 2.0 * c
    if abs(s) < 1e-12:
        return 0.0, 0.5, 0.5
    num = 2.0 * a * b + c * (a + b)
    value = num / s
    da = ((2.0 * b + c) * s - num) / (s * s)
    db = ((2.0 * a + c) * s - num) / (s * s)
    return value, da, db


def softmin_baseline(a: float, b: float, beta_sm: float):
    """Smooth lower bound of min(a, b); partials are the softmin weights."""
    if beta_sm <= 0:
        raise ValueError("beta_sm must be positive")
    m = min(a, b)
    za = math.exp(-beta_sm * (a - m))
    zb = math.exp(-beta_sm * (b - m))
    value = m - math.log(za + zb) / beta_sm
    wa = za / (za + zb)
    return value, wa, 1.0 - wa


@dataclass(frozen=True, eq=False)
class EdgeWeight:
    alpha_ij: float
    beta_ij: float
    gamma_ij: float
    A_ij: float
    d_los_fused: float
    d_hat_ij: float  # robot j's depth in robot i's region
    d_hat_ji: float  # robot i's depth in robot j's region


class TeamSnapshot:
    """Frozen per-tick view of all robots' poses, regions, and obstacle points.

    Every accessor takes the id of the robot on whose behalf the data is
    read; an optional recorder captures those (reader, owner) pairs so a run
    can be audited for one-hop locality.
    """

    def __init__(self, poses, regions, obstacle_points=None, recorder=None):
        self.poses: list[Pose] = list(poses)
        self.regions: list[VisibleRegion | None] = list(regions)
        self.obstacle_points = list(obstacle_points) if obstacle_points is not None else [None] * len(self.poses)
        self.recorder = recorder

    def __len__(self):
        return len(self.poses)

    def _note(self, reader, owner, kind):
        if self.recorder is not None:
            self.recorder.note(reader, owner, kind)

    def pose(self, owner: int, reader: int) -> Pose:
        self._note(reader, owner, "pose")
        return self.poses[owner]

    def region(self, owner: int, reader: int) -> VisibleRegion:
        self._note(reader, owner, "region")
        return self.regions[owner]

    def obstacle_point(self, owner: int, reader: int):
        self._note(reader, owner, "obstacle")
        return self.obstacle_points[owner]


@dataclass(eq=False)
class ConnectivityGraph:
    A: np.ndarray
    L: np.ndarray
    lambda2: float
    v2: np.ndarray
    lambda3: float
    edges: dict = field(default_factory=dict)  # (i, j) i<j -> EdgeWeight
    edge_grads: dict = field(default_factory=dict)  # ordered (i, j) -> dA_ij/dq_i
    candidates: list = field(default_factory=list)  # per robot: ids within d_com_max

    def neighbors(self, i: int) -> list[int]:
        return [j for j in range(len(self.A)) if j != i and self.A[i, j] > 0.0]


def _gamma_factors(snapshot: TeamSnapshot, i: int, j: int, cand, p: WeightParams, grad_for: int):
    """Clearance factors of edge (i, j), with gradients w.r.t. `grad_for`.

    Factor set: robot i's distances to its candidate neighbors and its
    nearest obstacle point, plus robot j's (excluding the shared pair), each
    attributed to the robot that owns the measurement.
    """
    factors = []

    def add(owner, other_id, own_pos, other_pos, d):
        value, dval = weight_gamma_star(d, p)
        grad = np.zeros(2)
        if dval != 0.0 and d > 1e-12:
            # the distance involves grad_for either as the factor's owner or
            # as the other endpoint (the shared pair factor, owned by i,
            # still moves with q_j)
            if owner == grad_for:
                grad = dval * (own_pos - other_pos) / d
            elif other_id == grad_for:
                grad = dval * (other_pos - own_pos) / d
        factors.append(GammaFactor(value=value, grad_i=grad))

    for owner, exclude in ((i, None), (j, i)):
        q_own = snapshot.pose(owner, owner).position
        for k in cand[owner]:
            if k == exclude:
                continue
            q_k = snapshot.pose(k, owner).position
            add(owner, k, q_own, q_k, float(np.linalg.norm(q_own - q_k)))
        obs = snapshot.obstacle_point(owner, owner)
        if obs is not None:
            add(owner, None, q_own, obs, float(np.linalg.norm(q_own - obs)))
    return factors


def assemble_graph(
    snapshot: TeamSnapshot,
    params: WeightParams,
    ablate_beta: bool = False,
) -> ConnectivityGraph:
    """Build the weighted graph, its Fiedler pair, and per-edge gradients.

    For every pair within communication range: evaluate both directional
    LoS-distances, fuse them, multiply the three potentials, and chain the
    gradient of the product w.r.t. each endpoint position. With
    `ablate_beta` the LoS potential is pinned to its plateau (weights ignore
    visibility entirely); used by the ablation runs.
    """
    n = len(snapshot)
    positions = [snapshot.poses[i].position for i in range(n)]
    dmat = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            dmat[i, j] = dmat[j, i] = float(np.linalg.norm(positions[i] - positions[j]))
    cand = [[j for j in range(n) if j != i and dmat[i, j] <= params.d_com_max] for i in range(n)]

    A = np.zeros((n, n))
    edges = {}
    edge_grads = {}
    for i in range(n):
        for j in range(i + 1, n):
            if dmat[i, j] > params.d_com_max:
                continue
            d_ij = dmat[i, j]
            alpha, dalpha = weight_alpha(d_ij, params)

            pose_i = snapshot.pose(i, i)
            pose_j = snapshot.pose(j, i)
            region_i = snapshot.region(i, i)
            region_j = snapshot.region(j, i)
            # robot j also reads its neighbor's pose/region on its own behalf
            snapshot.pose(i, j)
            snapshot.region(i, j)
            los_ji = los_distance(region_j, pose_i.position, region_j.owner_pose, params.lse_alpha)
            los_ij = los_distance(region_i, pose_j.position, region_i.owner_pose, params.lse_alpha)
            a_val, b_val = los_ij.value, los_ji.value
            if min(a_val, b_val) >= params.d_los_min:
                fused, dfa, dfb = fuse_los(a_val, b_val, params.fusion_c)
            else:
                # outside the fusion function's domain: fall back to the
                # conservative hard minimum (the LoS potential is flat there)
                if a_val <= b_val:
                    fused, dfa, dfb = a_val, 1.0, 0.0
                else:
                    fused, dfa, dfb = b_val, 0.0, 1.0
            if ablate_beta:
                beta, dbeta = params.k_s, 0.0
            else:
                beta, dbeta = weight_beta(fused, params)

            factors_i = _gamma_factors(snapshot, i, j, cand, params, grad_for=i)
            gamma, dgamma_i = weight_gamma(i, j, factors_i)
            factors_j = _gamma_factors(snapshot, i, j, cand, params, grad_for=j)
            _, dgamma_j = weight_gamma(i, j, factors_j)

            A_ij = alpha * beta * gamma
            A[i, j] = A[j, i] = A_ij
            edges[(i, j)] = EdgeWeight(
                alpha_ij=alpha,
                beta_ij=beta,
                gamma_ij=gamma,
                A_ij=A_ij,
                d_los_fused=fused,
                d_hat_ij=a_val,
                d_hat_ji=b_val,
            )

            u_ij = (positions[i] - positions[j]) / d_ij if d_ij > 1e-12 else np.zeros(2)
            # world-frame gradients of the directional LoS values:
            #   d_hat_ji depends on q_i (i moves inside j's frozen region),
            #   d_hat_ij depends on q_j, and neither depends on its own owner
            #   because regions are world-anchored snapshots.
            g_ji_world = rotation(region_j.owner_pose.heading) @ los_ji.grad_local
            g_ij_world = rotation(region_i.owner_pose.heading) @ los_ij.grad_local
            dbeta_dqi = dbeta * dfb * g_ji_world
            dbeta_dqj = dbeta * dfa * g_ij_world

            edge_grads[(i, j)] = dalpha * u_ij * beta * gamma + alpha * dgamma_i * beta + alpha * gamma * dbeta_dqi
            edge_grads[(j, i)] = -dalpha * u_ij * beta * gamma + alpha * dgamma_j * beta + alpha * gamma * dbeta_dqj

    L = np.diag(A.sum(axis=1)) - A
    w, V = np.linalg.eigh(L)
    lambda2 = float(w[1]) if n >= 2 else 0.0
    lambda3 = float(w[2]) if n >= 3 else math.inf
    v2 = V[:, 1] if n >= 2 else np.zeros(n)
    nz = np.nonzero(np.abs(v2) > 1e-12)[0]
    if len(nz) and v2[nz[0]] < 0:
        v2 = -v2
    if n >= 3 and lambda3 - lambda2 < 1e-6:
        log.warning("repeated Fiedler value (gap %.2e); gradient may be unreliable", lambda3 - lambda2)
    return ConnectivityGraph(
        A=A,
        L=L,
        lambda2=lambda2,
        v2=v2,
        lambda3=lambda3,
        edges=edges,
        edge_grads=edge_grads,
        candidates=cand,
    )


def connectivity_velocity(i: int, graph: ConnectivityGraph, params: WeightParams) -> np.ndarray:
    """Barrier-gradient command keeping the Fiedler value above its floor.

    Equals -d/dq_i of 1/(lambda2 - lambda2_min): the eigenvalue derivative
    through each incident edge weight, scaled by the squared barrier slope.

    Raises:
        ConnectivityCritical: lambda2 is at or below the floor.
    """
    gap = graph.lambda2 - params.lambda2_min
    if gap <= 0:
        raise ConnectivityCritical(f"lambda2={graph.lambda2:.6f} <= floor {params.lambda2_min}")
    scale = 1.0 / (gap * gap)
    u = np.zeros(2)
    for j in graph.neighbors(i):
        key = (i, j)
        if key in graph.edge_grads:
            u += graph.edge_grads[key] * (graph.v2[i] - graph.v2[j]) ** 2
    return scale * u
