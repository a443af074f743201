#!/usr/bin/env python3
"""Record a short snapshot log + scenario info for the frontend golden tests."""

import json
import logging
from pathlib import Path

logging.disable(logging.WARNING)

from los_swarm.bridge import snapshot_encode  # noqa: E402
from los_swarm.harness import Scenario, run  # noqa: E402

ROOT = Path(__file__).resolve().parent.parent
FIXTURES = ROOT / "frontend" / "tests" / "fixtures"

STEERED = {
    "name": "steered_mini",
    "bounds": [0, 0, 30, 30],
    "obstacles": [[[14.0, 10.0], [16.0, 10.0], [16.0, 20.0], [14.0, 20.0]]],
    "robots": [[8.0, 15.0, 0.0], [8.0, 11.0, 0.0]],
    "mode": {"kind": "steered", "robot": 0},
    "seed": 1,
    "max_ticks": 40,
}


def main():
    FIXTURES.mkdir(parents=True, exist_ok=True)
    sc = Scenario.from_dict(STEERED)
    frames = []
    state = {"last": None}

    def on_tick(ctx):
        snap, states = snapshot_encode(ctx, state["last"])
        state["last"] = states
        if ctx["tick"] in (0, 5, 12, 25, 39):
            frames.append(snap.encode())

    run(sc, on_tick=on_tick, max_ticks=40)
    (FIXTURES / "snapshots.jsonl").write_text("\n".join(frames) + "\n")
    info = {
        "name": sc.name,
        "bounds": list(sc.bounds),
        "obstacles": [poly.vertices.tolist() for poly in sc.obstacles],
        "mode": sc.mode,
        "steered_robot": sc.steered_robot,
        "lambda2_min": sc.weights.lambda2_min,
    }
    (FIXTURES / "scenario.json").write_text(json.dumps(info, sort_keys=True, indent=1) + "\n")
    print(FIXTURES / "snapshots.jsonl", len(frames), "frames")


if __name__ == "__main__":
    main()
