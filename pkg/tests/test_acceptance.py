"""Acceptance suite: every release criterion, one test each, printed verdicts.

The maze runs (the expensive part) execute once per session in worker
processes and are shared by the criteria that read them.
"""

import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np
import pytest
from scipy import ndimage

from conftest import random_box_world, region_from_world
from los_swarm.connectivity import (
    TeamSnapshot,
    WeightParams,
    assemble_graph,
    connectivity_velocity,
    fuse_los,
    softmin_baseline,
    weight_alpha,
    weight_beta,
    weight_gamma_star,
)
from los_swarm.geometry import Pose, cast_rays, stack_edges, vec2
from los_swarm.harness import RunMetrics, Scenario, one_hop_isolation_check, run
from los_swarm.navigation import FREE, OCCUPIED, UNKNOWN, MapParams, OccupancyGrid
from los_swarm.visibility import (
    augment,
    build_visible_region,
    classification_margin,
    los_distance,
    simplified_los_gradient,
    spherical_flip,
)
from oracles import central_difference, segment_blocked

SCENARIO_DIR = Path(__file__).resolve().parent.parent / "src" / "los_swarm" / "scenarios"
MAZES = ("maze_env2", "maze_env1")
SEEDS = (0, 1, 2)


def _maze_worker(args):
    """Run one maze seed in a worker process; returns serializable results."""
    import logging

    logging.disable(logging.WARNING)
    name, seed, ablate = args
    scenario = Scenario.from_file(SCENARIO_DIR / f"{name}.json")
    final = {}

    def capture(ctx):
        final["grid"] = ctx["grid"]

    t0 = time.time()
    metrics = run(scenario, seed=seed, ablate_beta=ablate, on_tick=capture)
    wall = time.time() - t0
    unknown_frac = math.nan
    if "grid" in final and not ablate:
        unknown_frac = _reachable_unknown_fraction(scenario, final["grid"])
    return {
        "name": name,
        "seed": seed,
        "ablate": ablate,
        "summary": metrics.summary,
        "csv": metrics.to_csv(),
        "wall": wall,
        "unknown_frac": unknown_frac,
    }


def _reachable_unknown_fraction(scenario, grid):
    """Unknown share of the ground-truth reachable free cells."""
    xs = (np.arange(grid.width) + 0.5) * grid.resolution + grid.origin[0]
    ys = (np.arange(grid.height) + 0.5) * grid.resolution + grid.origin[1]
    centers = np.stack(np.meshgrid(xs, ys), axis=-1).reshape(-1, 2)
    occupied = np.zeros(len(centers), dtype=bool)
    for poly in scenario.obstacles:
        occupied |= poly.contains(centers)
    free_truth = ~occupied.reshape(grid.height, grid.width)
    labels, _ = ndimage.label(free_truth, structure=np.ones((3, 3), dtype=int))
    start = grid.world_to_cell(np.array([scenario.starts[0][:2]]))[0]
    comp = labels[start[1], start[0]]
    reachable = labels == comp
    states = grid.states()
    unknown_reachable = int(np.sum(reachable & (states == UNKNOWN)))
    return unknown_reachable / max(int(np.sum(reachable)), 1)


@pytest.fixture(scope="session")
def maze_results():
    jobs = [(name, seed, False) for name in MAZES for seed in SEEDS]
    jobs += [("maze_env2", seed, True) for seed in SEEDS]
    with ProcessPoolExecutor(max_workers=2) as pool:
        results = list(pool.map(_maze_worker, jobs))
    return results


def _verdict(name, ok, detail=""):
    print(f"\nACCEPTANCE {name}: {'PASS' if ok else 'FAIL'} {detail}")
    assert ok, f"{name} failed: {detail}"


# --- criterion 1: analytic LoS gradient vs finite differences ---------------


def synthetic_region(rng, max_range=12.0):
    n = int(rng.integers(8, 30))
    angles = np.sort(rng.uniform(0, 2 * np.pi, n))
    if np.any(np.diff(angles) < 1e-6):
        return None
    ranges = rng.uniform(2.0, max_range - 1.0, n)
    try:
        cloud = augment(ranges, angles, max_range, gap_chord=3.0)
        return build_visible_region(cloud, 10 * max_range, Pose(vec2(0, 0), 0.0))
    except Exception:
        return None


def _seam_free_points(rng, region, count, seam_gap=0.15):
    out = []
    tries = 0
    while len(out) < count and tries < 200:
        tries += 1
        q = rng.uniform(-11, 11, 2)
        nq = np.linalg.norm(q)
        if not 0.5 < nq < 11.0:
            continue
        d = region.face_distances(spherical_flip(q, region.flip_radius))
        top = np.sort(d)[::-1]
        if len(top) > 1 and top[0] - top[1] < seam_gap:
            continue
        out.append(q)
    return out


def test_criterion_1_gradient_suite():
    rng = np.random.default_rng(101)
    t0 = time.time()
    alpha = 100.0
    checked = 0
    worst = 0.0
    worst_simpl = 0.0
    simpl_checked = 0
    while checked < 200:
        region = synthetic_region(rng)
        if region is None:
            continue
        for q in _seam_free_points(rng, region, 4):
            ld = los_distance(region, q, region.owner_pose, alpha)
            fd = central_difference(lambda x: los_distance(region, x, region.owner_pose, alpha).value, q, h=1e-6)
            denom = max(np.linalg.norm(fd), 1e-9)
            worst = max(worst, np.linalg.norm(fd - ld.grad_local) / denom)
            checked += 1
        # simplified (one-hot) form vs exact, alpha >= 50, in flip space;
        # a thinner seam margin keeps the secondary faces' weight nonzero
        for q in _seam_free_points(rng, region, 2, seam_gap=0.15):
            a2 = 60.0
            exact = _exact_flip_gradient(region, q, a2)
            approx = simplified_los_gradient(region, q, region.owner_pose, a2)
            if np.linalg.norm(exact) < 1e-6:
                continue
            worst_simpl = max(worst_simpl, np.linalg.norm(exact - approx) / np.linalg.norm(exact))
            simpl_checked += 1
    wall = time.time() - t0
    ok = checked >= 200 and worst < 1e-4 and simpl_checked >= 50 and worst_simpl < 0.05 and wall < 10.0
    _verdict(
        "1 gradient suite",
        ok,
        f"(pairs={checked}, worst rel={worst:.2e}; simplified worst={worst_simpl:.2e} over {simpl_checked}; {wall:.1f}s)",
    )


def _exact_flip_gradient(region, q_local, alpha):
    qf = spherical_flip(np.asarray(q_local, float), region.flip_radius)

    def value_at(x):
        d = region.face_distances(x)
        m = float(d.max())
        e = np.exp(alpha * (d - m))
        z = float(e.sum())
        nr = x / np.linalg.norm(x)
        cos_t = np.clip(region.normals @ nr, -1, 1)
        return (m + math.log(z) / alpha) * float((e / z) @ cos_t)

    return central_difference(value_at, qf, h=1e-6)


# --- criterion 2: HPR classification vs the segment oracle ------------------


def test_criterion_2_hpr_oracle_suite():
    rng = np.random.default_rng(7)
    t0 = time.time()
    rays = 360
    local_angles = np.linspace(0, 2 * np.pi, rays, endpoint=False)
    max_range = 12.0
    chord = 4 * max_range * (2 * np.pi / rays)
    agree = 0
    total = 0
    while total < 10000:
        world = random_box_world(rng)
        starts, ends = stack_edges(world)
        for _ in range(20):
            pos = rng.uniform(-9, 9, 2)
            if not any(p.contains(pos) for p in world):
                break
        else:
            continue
        pose = Pose(pos, rng.uniform(0, 2 * np.pi))
        ranges = cast_rays(pos, local_angles + pose.heading, max_range, starts, ends)
        cloud = augment(ranges, local_angles, max_range, chord)
        region = build_visible_region(cloud, 10 * max_range, pose)
        pts = pos + rng.uniform(-max_range * 0.9, max_range * 0.9, (60, 2))
        dist = np.linalg.norm(pts - pos, axis=1)
        pts = pts[(dist > 0.3) & (dist < max_range * 0.95)]
        if not len(pts):
            continue
        margin, band = classification_margin(region, pts)
        decided = np.abs(margin) > band
        for p, m in zip(pts[decided], margin[decided]):
            truth_visible = not segment_blocked(pos, p, world)
            agree += (m > 0) == truth_visible
            total += 1
    wall = time.time() - t0
    rate = agree / total
    ok = total >= 10000 and rate >= 0.99 and wall < 60.0
    _verdict("2 HPR oracle suite", ok, f"(agreement {agree}/{total} = {rate:.4f}; {wall:.1f}s)")


# --- criterion 3: fusion properties ------------------------------------------


def test_criterion_3_fusion_properties():
    rng = np.random.default_rng(33)
    ok = True
    detail = []
    for _ in range(3000):
        a, b = rng.uniform(0, 8, 2)
        c = rng.uniform(0, 4)
        v, da, db = fuse_los(a, b, c)
        v2, db2, da2 = fuse_los(b, a, c)
        ok &= v == v2 and da == da2 and db == db2  # exact symmetry
        if a + b > 0:
            ok &= 2 * a * b / (a + b) - 1e-9 <= v <= (a + b) / 2 + 1e-9
        h = 1e-6
        dc_fd = (fuse_los(a, b, c + h)[0] - fuse_los(a, b, max(c - h, 0.0))[0]) / (h + min(h, c))
        want = (a - b) ** 2 / (a + b + 2 * c) ** 2 if a + b + 2 * c > 1e-9 else 0.0
        ok &= abs(dc_fd - want) < 1e-4 and want >= -1e-12
    _, _, fuse_db = fuse_los(0.2, 2.0, 0.5)
    _, _, soft_db = softmin_baseline(0.2, 2.0, 10.0)
    ratio = fuse_db / max(soft_db, 1e-300)
    ok &= fuse_db >= 10 * soft_db
    detail.append(f"gradient ratio at reference point = {ratio:.1e}")
    _verdict("3 fusion properties", ok, f"({'; '.join(detail)})")


# --- criterion 4: connectivity velocity vs eigenvalue finite differences ----


def room_region(pose, half=14.0):
    from conftest import rect

    walls = [
        rect(pose.position[0] - half, pose.position[1] - half, pose.position[0] + half, pose.position[1] - half + 0.3),
        rect(pose.position[0] - half, pose.position[1] + half - 0.3, pose.position[0] + half, pose.position[1] + half),
    ]
    return region_from_world(pose, walls, rays=120)


def test_criterion_4_velocity_oracle():
    rng = np.random.default_rng(4)
    params = WeightParams(
        d_com_min=3.0, d_com_max=9.0, d_los_min=0.3, d_los_max=4.0,
        d_coll_min=0.3, d_coll_max=1.2, lambda2_min=0.02,
    )
    tested = 0
    worst = 0.0
    t0 = time.time()
    while tested < 50:
        pos = [rng.uniform(-4, 4, 2) for _ in range(4)]
        if min(np.linalg.norm(pos[a] - pos[b]) for a in range(4) for b in range(a + 1, 4)) < params.d_coll_max + 0.2:
            continue
        heads = rng.uniform(0, 2 * np.pi, 4)
        regions = [room_region(Pose(q, h)) for q, h in zip(pos, heads)]
        obstacles = [None, pos[1] + np.array([0.0, float(rng.uniform(0.7, 1.1))]), None, None]

        def graph_at(positions):
            snap = TeamSnapshot([Pose(q, h) for q, h in zip(positions, heads)], regions, obstacles)
            return assemble_graph(snap, params)

        g = graph_at(pos)
        if g.lambda2 <= params.lambda2_min + 0.05 or g.lambda3 - g.lambda2 < 1e-4:
            continue
        if not all(
            min(abs(np.linalg.norm(pos[i] - pos[j]) - brk) for brk in (params.d_com_min, params.d_com_max)) > 0.05
            for i in range(4) for j in range(i + 1, 4)
        ):
            continue
        h = 1e-5
        for i in range(4):
            u = connectivity_velocity(i, g, params)
            fd = np.zeros(2)
            for k in range(2):
                pp = [q.copy() for q in pos]
                pp[i][k] += h
                pm = [q.copy() for q in pos]
                pm[i][k] -= h
                fd[k] = (graph_at(pp).lambda2 - graph_at(pm).lambda2) / (2 * h)
            want = fd / (g.lambda2 - params.lambda2_min) ** 2  # -grad of the barrier
            if np.linalg.norm(want) < 1e-6:
                continue
            worst = max(worst, np.linalg.norm(u - want) / np.linalg.norm(want))
        tested += 1
    ok = tested >= 50 and worst < 1e-3
    _verdict("4 velocity oracle", ok, f"(configs={tested}, worst rel={worst:.2e}, {time.time()-t0:.1f}s)")


# --- criteria 5, 6, 8: maze runs ---------------------------------------------


def test_criterion_5_maze_exploration(maze_results):
    ok = True
    lines = []
    for r in maze_results:
        if r["ablate"]:
            continue
        s = r["summary"]
        metrics = RunMetrics.from_csv(r["csv"])
        lam_min = float(np.min(metrics.column("lambda2")))
        run_ok = (
            s["success"]
            and s["reason"] == "explored"
            and lam_min > 0
            and r["unknown_frac"] < 0.02
            and r["wall"] < 300.0
        )
        violations = _los_violation_count(metrics)
        run_ok &= violations == 0
        ok &= run_ok
        lines.append(
            f"{r['name']} seed {r['seed']}: {'ok' if run_ok else 'FAIL'} "
            f"(reason={s['reason']}, lam_min={lam_min:.3f}, unknown={r['unknown_frac']:.3%}, "
            f"violations={violations}, {r['wall']:.0f}s)"
        )
    _verdict("5 maze exploration", ok, "\n  " + "\n  ".join(lines))


def _los_violation_count(metrics):
    count = 0
    for i, j in metrics.pairs:
        a = metrics.column(f"A_{i}_{j}")
        gt = metrics.column(f"gtlos_{i}_{j}")
        streak = 0
        for av, gv in zip(a, gt):
            streak = streak + 1 if (av > 0 and gv == 0.0) else 0
            if streak >= 2:
                count += 1
                streak = 0
    return count


def test_criterion_6_beta_ablation(maze_results):
    flagged = 0
    lines = []
    for r in maze_results:
        if not r["ablate"]:
            continue
        s = r["summary"]
        hit = s["reason"] == "los_violation"
        flagged += hit
        lines.append(f"seed {r['seed']}: reason={s['reason']} ticks={s['ticks']}")
    ok = flagged >= 2
    _verdict("6 beta ablation", ok, f"({flagged}/3 seeds flagged)\n  " + "\n  ".join(lines))


def test_criterion_7_one_hop_isolation():
    scenario = Scenario.from_file(SCENARIO_DIR / "maze_env2.json")
    ok = one_hop_isolation_check(scenario, seed=0, max_ticks=400)
    _verdict("7 one-hop isolation", ok, "(instrumented 400-tick maze run)")


def test_criterion_8_barrier_and_bounded_navigation(maze_results):
    ok = True
    lines = []
    kin_lead = {}
    for name in MAZES:
        kin_lead[name] = Scenario.from_file(SCENARIO_DIR / f"{name}.json").kinematics.k_lead
    for r in maze_results:
        if r["ablate"]:
            continue
        metrics = RunMetrics.from_csv(r["csv"])
        lam = metrics.column("lambda2")
        uc = np.stack([metrics.column(f"uc{i}") for i in range(metrics.robot_count)], axis=1)
        un = np.stack([metrics.column(f"un{i}") for i in range(metrics.robot_count)], axis=1)
        mean_uc = uc.mean(axis=1)
        lo_decile = lam <= np.quantile(lam, 0.1)
        hi_decile = lam >= np.quantile(lam, 0.9)
        low_mean = float(mean_uc[lo_decile].mean())
        high_mean = float(mean_uc[hi_decile].mean())
        ratio = low_mean / max(high_mean, 1e-12)
        bounded = float(np.max(un)) <= kin_lead[r["name"]] + 1e-9
        run_ok = ratio >= 10.0 and bounded
        ok &= run_ok
        lines.append(
            f"{r['name']} seed {r['seed']}: decile ratio {ratio:.1f}, max ||u_n|| {np.max(un):.3f} "
            f"{'ok' if run_ok else 'FAIL'}"
        )
    _verdict("8 barrier growth / bounded navigation", ok, "\n  " + "\n  ".join(lines))


# --- criterion 9: potential breakpoints --------------------------------------


def test_criterion_9_potential_breakpoints():
    p = WeightParams()
    h = 1e-7
    ok = True
    detail = []

    def c1(f, brk):
        left = (f(brk)[0] - f(brk - h)[0]) / h
        right = (f(brk + h)[0] - f(brk)[0]) / h
        return abs(left - right)

    for fn, brks, plateau_lo, plateau_hi in (
        (lambda d: weight_alpha(d, p), (p.d_com_min, p.d_com_max), (0.0, p.k_alpha), (p.d_com_max + 1, 0.0)),
        (lambda d: weight_beta(d, p), (p.d_los_min, p.d_los_max), (0.0, 0.0), (p.d_los_max + 1, p.k_s)),
        (lambda d: weight_gamma_star(d, p), (p.d_coll_min, p.d_coll_max), (0.0, 0.0), (p.d_coll_max + 1, p.k_gamma)),
    ):
        worst = max(c1(fn, b) for b in brks)
        ok &= worst < 1e-6
        detail.append(f"{worst:.1e}")
        ok &= fn(plateau_lo[0])[0] == plateau_lo[1]
        ok &= fn(plateau_hi[0])[0] == plateau_hi[1]
    # exact plateau/zero values at the band edges themselves
    ok &= weight_alpha(p.d_com_min, p)[0] == p.k_alpha
    ok &= weight_beta(p.d_los_min, p)[0] == 0.0
    ok &= weight_beta(p.d_los_max, p)[0] == p.k_s
    ok &= weight_gamma_star(p.d_coll_min, p)[0] == 0.0
    _verdict("9 potential breakpoints", ok, f"(C1 mismatches: {', '.join(detail)})")
