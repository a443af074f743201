import logging

import numpy as np
import pytest

from los_swarm.geometry import Polygon, Pose, cast_rays, stack_edges
from los_swarm.visibility import augment, build_visible_region

logging.disable(logging.WARNING)


def rect(x0, y0, x1, y1):
    return Polygon(np.array([[x0, y0], [x1, y0], [x1, y1], [x0, y1]], dtype=float))


def scan_from_world(pose, world, rays=360, max_range=12.0, bounds=None):
    angles = np.linspace(0, 2 * np.pi, rays, endpoint=False)
    starts, ends = stack_edges(world, bounds=bounds)
    ranges = cast_rays(pose.position, angles + pose.heading, max_range, starts, ends)
    gap_chord = 4.0 * max_range * (2 * np.pi / rays)
    return augment(ranges, angles, max_range, gap_chord)


def region_from_world(pose, world, rays=360, max_range=12.0, flip_mult=10.0, bounds=None):
    scan = scan_from_world(pose, world, rays=rays, max_range=max_range, bounds=bounds)
    return build_visible_region(scan, flip_mult * max_range, pose)


def random_box_world(rng, n_lo=2, n_hi=6, span=8.0):
    polys = []
    for _ in range(rng.integers(n_lo, n_hi)):
        cx, cy = rng.uniform(-span, span, 2)
        w, h = rng.uniform(0.4, 4.0, 2)
        th = rng.uniform(0, np.pi)
        c, s = np.cos(th), np.sin(th)
        rot = np.array([[c, -s], [s, c]])
        box = np.array([[-w / 2, -h / 2], [w / 2, -h / 2], [w / 2, h / 2], [-w / 2, h / 2]]) @ rot.T + [cx, cy]
        polys.append(Polygon(box))
    return polys


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)
