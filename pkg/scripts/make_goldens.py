#!/usr/bin/env python3
"""Regenerate golden files for plot and snapshot tests (review diffs before committing)."""

import json
import logging
from pathlib import Path

logging.disable(logging.WARNING)

from los_swarm.bridge import BridgeServer, snapshot_encode  # noqa: E402
from los_swarm.harness import Scenario, run  # noqa: E402
from los_swarm.plots import emit_plots  # noqa: E402

ROOT = Path(__file__).resolve().parent.parent
GOLDEN = ROOT / "tests" / "golden"

OPEN_GOALS = {
    "name": "open_goals",
    "bounds": [0, 0, 40, 40],
    "obstacles": [],
    "robots": [[18.0, 20.0, 0.0], [22.0, 20.0, 0.0]],
    "mode": {
        "kind": "goals",
        "goals": [{"robot": 0, "point": [17.5, 20.0]}, {"robot": 1, "point": [22.5, 20.0]}],
    },
    "seed": 1,
    "max_ticks": 400,
}


def plot_goldens():
    sc = Scenario.from_dict(OPEN_GOALS)
    metrics = run(sc, max_ticks=30)
    emit_plots(metrics, GOLDEN, scenario=sc)


def snapshot_golden():
    sc = Scenario.from_dict(OPEN_GOALS)
    frames = []

    def on_tick(ctx):
        if ctx["tick"] == 2:
            snap, _ = snapshot_encode(ctx, None)
            frames.append(snap.encode())

    run(sc, max_ticks=3, on_tick=on_tick)
    (GOLDEN / "snapshot_tick2.json").write_text(frames[0] + "\n")


def main():
    GOLDEN.mkdir(parents=True, exist_ok=True)
    plot_goldens()
    snapshot_golden()
    for p in sorted(GOLDEN.iterdir()):
        print(p)


if __name__ == "__main__":
    main()
