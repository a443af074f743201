#!/usr/bin/env python3
"""Regenerate the bundled scenario JSON files in src/los_swarm/scenarios/."""

import json
from pathlib import Path

OUT = Path(__file__).resolve().parent.parent / "src" / "los_swarm" / "scenarios"


def rect(x0, y0, x1, y1):
    return [[x0, y0], [x1, y0], [x1, y1], [x0, y1]]


def perimeter(xmax, ymax, t=0.5):
    return [
        rect(0, 0, xmax, t),
        rect(0, ymax - t, xmax, ymax),
        rect(0, t, t, ymax - t),
        rect(xmax - t, t, xmax, ymax - t),
    ]


def open_world():
    return {
        "name": "open_world",
        "bounds": [0, 0, 40, 40],
        "obstacles": [],
        "robots": [[18, 20, 0.0], [22, 20, 0.0]],
        "mode": {
            "kind": "goals",
            "goals": [{"robot": 0, "point": [17.5, 20.0]}, {"robot": 1, "point": [22.5, 20.0]}],
        },
        "seed": 1,
        "max_ticks": 400,
    }


WEIGHTS = {
    "k_alpha": 1.0,
    "k_s": 1.0,
    "k_gamma": 1.0,
    "d_com_min": 6.0,
    "d_com_max": 13.0,
    "d_coll_min": 0.3,
    "d_coll_max": 1.8,
    "d_los_min": 0.3,
    "d_los_max": 4.0,
    "fusion_c": 0.5,
    "lse_alpha": 100.0,
    "lambda2_min": 0.01,
}

KINEMATICS = {"dt": 0.1, "u_max": 1.0, "k_c": 0.4, "k_lead": 1.0, "k_sec": 0.4, "dwell_ticks": 3}

MAPPING = {"w_dist": 150.0, "inflate_cells": 2, "plan_stride": 3}


def maze_env2():
    """40 x 57 serpentine: thick slabs force an S-sweep, stubs add corners."""
    W, H = 40.0, 57.0
    t = 0.5
    obstacles = perimeter(W, H, t)
    obstacles += [
        # serpentine slabs (left-, right-, left-attached)
        rect(t, 11.0, 27.0, 18.0),
        rect(13.0, 25.0, W - t, 32.0),
        rect(t, 39.0, 27.0, 46.0),
        # stubs creating sharp turns inside the sweeps
        rect(18.0, t, 18.6, 5.5),
        rect(32.0, 18.0, 32.6, 21.5),
        rect(8.0, 21.5, 8.6, 25.0),
        rect(8.0, 32.0, 8.6, 35.5),
        rect(32.0, 46.0, 32.6, 50.0),
        rect(16.0, 52.0, 16.6, H - t),
    ]
    return {
        "name": "maze_env2",
        "bounds": [0, 0, W, H],
        "obstacles": obstacles,
        "robots": [[4.0, 4.0, 0.0], [8.0, 4.0, 0.0], [4.0, 8.0, 0.0], [8.0, 8.0, 0.0]],
        "mode": {"kind": "explore"},
        "seed": 0,
        "max_ticks": 5000,
        "assign_period": 15,
        "cluster_radius": 14.0,
        "weights": dict(WEIGHTS),
        "sensor": {"rays": 360, "max_range": 12.0},
        "kinematics": dict(KINEMATICS),
        "mapping": dict(MAPPING),
    }


def maze_env1():
    """87 x 69 warehouse: thick shelf rows, long halls, sharp turn stubs."""
    W, H = 87.0, 69.0
    t = 0.5
    obstacles = perimeter(W, H, t)
    obstacles += [
        # shelf slabs with alternating hall openings
        rect(t, 11.0, 60.0, 22.0),
        rect(70.0, 11.0, W - t, 22.0),
        rect(16.0, 31.0, W - t, 42.0),
        rect(t, 51.0, 40.0, 60.0),
        rect(50.0, 51.0, W - t, 60.0),
        # stubs narrowing the halls into sharp turns
        rect(30.0, t, 30.6, 5.5),
        rect(58.0, 5.0, 58.6, 11.0),
        rect(22.0, 22.0, 22.6, 26.0),
        rect(44.0, 27.0, 44.6, 31.0),
        rect(70.0, 42.0, 70.6, 46.5),
        rect(30.0, 46.0, 30.6, 51.0),
        rect(12.0, 62.0, 12.6, H - t),
        rect(62.0, 60.0, 62.6, 64.5),
    ]
    return {
        "name": "maze_env1",
        "bounds": [0, 0, W, H],
        "obstacles": obstacles,
        "robots": [[4.0, 4.0, 0.0], [8.0, 4.0, 0.0], [4.0, 7.5, 0.0], [8.0, 7.5, 0.0]],
        "mode": {"kind": "explore"},
        "seed": 0,
        "max_ticks": 6500,
        "assign_period": 15,
        "cluster_radius": 14.0,
        "weights": dict(WEIGHTS),
        "sensor": {"rays": 360, "max_range": 12.0},
        "kinematics": dict(KINEMATICS),
        "mapping": dict(MAPPING),
    }


def steered_demo():
    doc = maze_env2()
    doc["name"] = "steered_demo"
    doc["mode"] = {"kind": "steered", "robot": 0}
    doc["robots"] = doc["robots"][:3]
    doc["max_ticks"] = 3000
    doc.pop("cluster_radius", None)
    return doc


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    for builder in (open_world, maze_env2, maze_env1, steered_demo):
        doc = builder()
        path = OUT / f"{doc['name']}.json"
        path.write_text(json.dumps(doc, indent=1) + "\n")
        print(path)


if __name__ == "__main__":
    main()
