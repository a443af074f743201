import math

import numpy as np
import pytest

from conftest import rect
from los_swarm.geometry import Polygon, vec2
from los_swarm.world import (
    CollisionDetected,
    RobotState,
    SensorParams,
    World,
    ground_truth_los,
    saturate_command,
    simulate_lidar,
    step,
    virtual_obstacle_neighbor,
)
from oracles import segment_blocked


def make_world(obstacles=(), robots=((0.0, 0.0),), bounds=(-100, -100, 100, 100), dt=0.1):
    states = [RobotState(i, np.array(p, dtype=float), 0.0) for i, p in enumerate(robots)]
    return World(bounds, list(obstacles), states, dt=dt)


class TestSaturation:
    def test_below_limit_passthrough(self):
        v = saturate_command(np.zeros(2), np.array([0.5, 0.0]), 1.0)
        assert np.allclose(v, [0.5, 0.0])

    def test_connectivity_priority_drops_navigation(self):
        v = saturate_command(np.array([2.0, 0.0]), np.array([0.0, 7.0]), 1.0)
        assert np.allclose(v, [1.0, 0.0])

    def test_perpendicular_shrink_factor(self):
        # |c| = |n| = 0.8, perpendicular: nav shrinks by 0.75 so the sum hits the limit
        v = saturate_command(np.array([0.8, 0.0]), np.array([0.0, 0.8]), 1.0)
        assert np.allclose(v, [0.8, 0.6], atol=1e-12)
        assert np.linalg.norm(v) == pytest.approx(1.0, abs=1e-12)

    def test_never_exceeds_limit(self, rng):
        for _ in range(200):
            c = rng.normal(size=2) * rng.uniform(0, 3)
            n = rng.normal(size=2) * rng.uniform(0, 3)
            v = saturate_command(c, n, 1.0)
            assert np.linalg.norm(v) <= 1.0 + 1e-9


class TestStep:
    def test_displacement_below_saturation(self):
        w = make_world()
        step(w, {0: (np.zeros(2), np.array([1.25, 0.0]))}, u_max=1.0, d_coll_min=0.3)
        # k_n defaults to 0.4: displacement = dt * 0.4 * 1.25 = 0.05
        assert np.allclose(w.robot(0).position, [0.05, 0.0])

    def test_heading_follows_velocity(self):
        w = make_world()
        step(w, {0: (np.zeros(2), np.array([0.0, 2.0]))}, u_max=1.0, d_coll_min=0.3)
        assert w.robot(0).heading == pytest.approx(math.pi / 2)

    def test_heading_held_at_low_speed(self):
        w = make_world()
        w.robot(0).heading = 0.7
        step(w, {0: (np.zeros(2), np.array([0.001, 0.0]))}, u_max=1.0, d_coll_min=0.3)
        assert w.robot(0).heading == 0.7

    def test_obstacle_collision_detected(self):
        w = make_world(obstacles=[rect(0.05, -1, 1, 1)])
        w.robot(0).k_n = 1.0
        with pytest.raises(CollisionDetected):
            step(w, {0: (np.zeros(2), np.array([1.0, 0.0]))}, u_max=1.0, d_coll_min=0.3)

    def test_robot_separation_enforced(self):
        w = make_world(robots=((0.0, 0.0), (0.32, 0.0)))
        w.robots[0].k_n = 1.0
        with pytest.raises(CollisionDetected):
            step(w, {0: (np.zeros(2), np.array([1.0, 0.0])), 1: (np.zeros(2), np.zeros(2))}, u_max=1.0, d_coll_min=0.3)

    def test_bounds_exit_detected(self):
        w = make_world(robots=((99.95, 0.0),))
        w.robot(0).k_n = 1.0
        with pytest.raises(CollisionDetected):
            step(w, {0: (np.zeros(2), np.array([1.0, 0.0]))}, u_max=1.0, d_coll_min=0.3)

    def test_tick_counter(self):
        w = make_world()
        step(w, {0: (np.zeros(2), np.zeros(2))}, u_max=1.0, d_coll_min=0.3)
        assert w.tick == 1


class TestLidar:
    def test_empty_world_all_misses(self):
        w = make_world()
        scan = simulate_lidar(w, 0, SensorParams())
        assert not np.any(np.isfinite(scan.ranges))
        assert len(scan.points) == 360
        assert np.allclose(np.linalg.norm(scan.points, axis=1), 12.0)

    def test_wall_ranges_match_secant(self):
        wall = rect(3.0, -50, 3.3, 50)
        w = make_world(obstacles=[wall])
        sensor = SensorParams()
        scan = simulate_lidar(w, 0, sensor)
        want = np.where(np.cos(sensor.angles) > 1e-9, 3.0 / np.cos(sensor.angles), np.inf)
        hit = want <= sensor.max_range
        assert np.allclose(scan.ranges[hit], want[hit], atol=1e-9)

    def test_neighbors_invisible_to_lidar(self):
        wall = rect(6.0, -50, 6.3, 50)
        w = make_world(obstacles=[wall], robots=((0.0, 0.0), (3.0, 0.0)))
        solo = make_world(obstacles=[wall])
        a = simulate_lidar(w, 0, SensorParams())
        b = simulate_lidar(solo, 0, SensorParams())
        assert np.array_equal(a.ranges, b.ranges)

    def test_heading_rotates_scan_frame(self):
        wall = rect(3.0, -50, 3.3, 50)
        w = make_world(obstacles=[wall])
        w.robot(0).heading = math.pi / 2
        scan = simulate_lidar(w, 0, SensorParams())
        # wall now appears at local angle -pi/2 (ray 270)
        assert scan.ranges[270] == pytest.approx(3.0, abs=1e-9)
        assert not np.isfinite(scan.ranges[0])


class TestVirtualObstacleNeighbor:
    def test_open_space_none(self):
        w = make_world()
        scan = simulate_lidar(w, 0, SensorParams())
        assert virtual_obstacle_neighbor(0, scan, w.robot(0).pose) is None

    def test_wall_foot_point(self):
        wall = rect(3.0, -50, 3.3, 50)
        w = make_world(obstacles=[wall])
        scan = simulate_lidar(w, 0, SensorParams())
        p = virtual_obstacle_neighbor(0, scan, w.robot(0).pose)
        assert np.allclose(p, [3.0, 0.0], atol=1e-9)

    def test_argmin_with_angle_tiebreak(self, rng):
        from conftest import random_box_world

        for _ in range(30):
            world_polys = random_box_world(rng)
            w = make_world(obstacles=world_polys)
            if any(p.contains(vec2(0, 0)) for p in world_polys):
                continue
            sensor = SensorParams()
            scan = simulate_lidar(w, 0, sensor)
            got = virtual_obstacle_neighbor(0, scan, w.robot(0).pose)
            finite = np.isfinite(scan.ranges)
            if not np.any(finite):
                assert got is None
                continue
            ranges = np.where(finite, scan.ranges, np.inf)
            k = int(np.argmin(ranges))
            want = ranges[k] * np.array([math.cos(scan.angles[k]), math.sin(scan.angles[k])])
            assert np.allclose(got, want, atol=1e-9)
            assert np.linalg.norm(got) == pytest.approx(float(np.min(ranges)), abs=1e-9)


class TestGroundTruthLos:
    def test_open_pair(self):
        w = make_world(robots=((0.0, 0.0), (5.0, 0.0)))
        assert ground_truth_los(w, 0, 1)

    def test_wall_blocks(self):
        w = make_world(obstacles=[rect(2.0, -3, 2.3, 3)], robots=((0.0, 0.0), (5.0, 0.0)))
        assert not ground_truth_los(w, 0, 1)

    def test_matches_oracle(self, rng):
        from conftest import random_box_world

        for _ in range(200):
            polys = random_box_world(rng)
            a = rng.uniform(-9, 9, 2)
            b = rng.uniform(-9, 9, 2)
            w = make_world(obstacles=polys, robots=(tuple(a), tuple(b)))
            assert ground_truth_los(w, 0, 1) == (not segment_blocked(a, b, polys))


class TestDeterminism:
    def test_identical_commands_identical_trajectories(self):
        results = []
        for _ in range(2):
            w = make_world(obstacles=[rect(4, -2, 5, 2)], robots=((0.0, 0.0), (2.0, 1.0)))
            rngl = np.random.default_rng(7)
            for _ in range(40):
                cmds = {
                    i: (rngl.normal(size=2) * 0.3, rngl.normal(size=2) * 0.5)
                    for i in range(2)
                }
                step(w, cmds, u_max=1.0, d_coll_min=0.1)
            results.append([r.position.copy() for r in w.robots])
        for a, b in zip(*results):
            assert np.array_equal(a, b)
