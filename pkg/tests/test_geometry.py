import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import rect
from los_swarm.geometry import (
    DegenerateInput,
    Polygon,
    Pose,
    cast_ray,
    convex_hull,
    segment_hits_obstacles,
    vec2,
)
from oracles import ray_range_bruteforce, segment_blocked


class TestConvexHull:
    def test_unit_square_normals(self):
        edges = convex_hull(np.array([[0, 0], [1, 0], [1, 1], [0, 1]]))
        normals = [tuple(np.round(e.n, 9)) for e in edges]
        assert normals == [(0, -1), (1, 0), (0, 1), (-1, 0)]
        for e in edges:
            assert abs(np.linalg.norm(e.n) - 1) < 1e-9
            assert abs(e.n @ (e.b - e.a)) < 1e-9

    def test_interior_point_absorbed(self):
        base = convex_hull(np.array([[0, 0], [1, 0], [1, 1], [0, 1]]))
        with_inner = convex_hull(np.array([[0, 0], [1, 0], [1, 1], [0, 1], [0.5, 0.5]]))
        assert len(base) == len(with_inner)
        for e1, e2 in zip(base, with_inner):
            assert np.allclose(e1.a, e2.a) and np.allclose(e1.n, e2.n)

    def test_random_disk_containment(self, rng):
        ang = rng.uniform(0, 2 * np.pi, 50)
        rad = np.sqrt(rng.uniform(0, 1, 50))
        pts = np.stack([rad * np.cos(ang), rad * np.sin(ang)], axis=1)
        edges = convex_hull(pts)
        for e in edges:
            assert np.max(e.n @ (pts - e.a).T) <= 1e-9

    def test_idempotent(self, rng):
        pts = rng.normal(size=(40, 2))
        edges = convex_hull(pts)
        verts = np.array([e.a for e in edges])
        again = convex_hull(verts)
        assert len(again) == len(edges)
        assert np.allclose(np.array([e.a for e in again]), verts)

    def test_collinear_raises(self):
        with pytest.raises(DegenerateInput):
            convex_hull(np.array([[0, 0], [1, 1], [2, 2], [3, 3]]))

    def test_too_few_raises(self):
        with pytest.raises(DegenerateInput):
            convex_hull(np.array([[0, 0], [1, 1]]))

    def test_duplicates_merged(self):
        edges = convex_hull(np.array([[0, 0], [0, 0], [1, 0], [1, 0], [0.5, 1]]))
        assert len(edges) == 3


class TestSegmentHitsObstacles:
    def test_empty_world(self):
        assert not segment_hits_obstacles(vec2(0, 0), vec2(1, 0), [])

    def test_straddling_square(self):
        sq = rect(1, -1, 2, 1)
        assert segment_hits_obstacles(vec2(0, 0), vec2(3, 0), [sq])

    def test_symmetry_and_oracle_agreement(self, rng):
        from conftest import random_box_world

        mismatches = 0
        for _ in range(1000):
            world = random_box_world(rng)
            p = rng.uniform(-9, 9, 2)
            q = rng.uniform(-9, 9, 2)
            got = segment_hits_obstacles(p, q, world)
            assert got == segment_hits_obstacles(q, p, world)
            if got != segment_blocked(p, q, world):
                mismatches += 1
        assert mismatches == 0

    def test_endpoint_inside(self):
        sq = rect(0, 0, 2, 2)
        assert segment_hits_obstacles(vec2(1, 1), vec2(5, 5), [sq])

    def test_touching_corner_counts(self):
        sq = rect(1, -1, 2, 1)
        assert segment_hits_obstacles(vec2(0, 1), vec2(3, 1), [sq])


class TestCastRay:
    def test_perpendicular_wall(self):
        wall = rect(3, -5, 3.2, 5)
        assert cast_ray(vec2(0, 0), 0.0, 10.0, [wall]) == pytest.approx(3.0, abs=1e-9)

    def test_empty_world_none(self):
        assert cast_ray(vec2(0, 0), 1.0, 10.0, []) is None

    def test_random_scenes_match_bruteforce(self, rng):
        from conftest import random_box_world

        for _ in range(250):
            world = random_box_world(rng)
            origin = rng.uniform(-9, 9, 2)
            angle = rng.uniform(0, 2 * np.pi)
            got = cast_ray(origin, angle, 12.0, world)
            want = ray_range_bruteforce(origin, angle, 12.0, world)
            if want is None:
                assert got is None
            else:
                assert got == pytest.approx(want, abs=1e-9)

    def test_hit_point_on_edge(self, rng):
        from conftest import random_box_world

        from los_swarm.geometry import _point_segment_distance

        for _ in range(100):
            world = random_box_world(rng)
            origin = rng.uniform(-9, 9, 2)
            angle = rng.uniform(0, 2 * np.pi)
            r = cast_ray(origin, angle, 12.0, world)
            if r is None:
                continue
            hit = origin + r * np.array([math.cos(angle), math.sin(angle)])
            dmin = math.inf
            for poly in world:
                a, b = poly.edges()
                dmin = min(dmin, float(np.min(_point_segment_distance(hit[None, :], a, b))))
            assert dmin < 1e-6

    def test_bad_range_raises(self):
        with pytest.raises(ValueError):
            cast_ray(vec2(0, 0), 0.0, -1.0, [])


class TestPolygon:
    def test_cw_rejected(self):
        with pytest.raises(ValueError):
            Polygon(np.array([[0, 0], [0, 1], [1, 1], [1, 0]], dtype=float))

    def test_self_intersecting_rejected(self):
        with pytest.raises(ValueError):
            Polygon(np.array([[0, 0], [2, 2], [2, 0], [0, 2]], dtype=float))

    def test_contains_matches_winding(self, rng):
        from oracles import winding_inside

        poly = rect(-1, -2, 3, 2)
        pts = rng.uniform(-4, 4, (200, 2))
        got = poly.contains(pts)
        want = np.array([winding_inside(p, poly) for p in pts])
        assert np.array_equal(got, want)

    def test_nan_rejected(self):
        with pytest.raises(ValueError):
            vec2(float("nan"), 0.0)


class TestPose:
    @given(
        st.floats(-50, 50), st.floats(-50, 50), st.floats(-math.pi, math.pi),
        st.floats(-20, 20), st.floats(-20, 20),
    )
    @settings(max_examples=60, deadline=None)
    def test_frame_round_trip(self, qx, qy, heading, px, py):
        pose = Pose(np.array([qx, qy]), heading)
        p = np.array([px, py])
        assert np.allclose(pose.local_to_world(pose.world_to_local(p)), p, atol=1e-9)
