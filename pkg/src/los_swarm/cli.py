"""Command line entry points: run / validate / plot.

Exit codes: 0 success, 1 constraint failure during a run, 2 usage or
configuration error. LOS_SWARM_LOG={error|info|debug} sets verbosity.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from .harness import RunMetrics, Scenario, ScenarioError, run


def _setup_logging():
    level = os.environ.get("LOS_SWARM_LOG", "error").lower()
    logging.basicConfig(
        level={"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}.get(level, logging.ERROR),
        format="%(asctime)s %(name)s %(levelname)s %(message)s",
    )


def _cmd_run(args) -> int:
    scenario = Scenario.from_file(args.scenario)
    if args.serve is not None:
        from .bridge import serve

        serve(scenario, port=args.serve, seed=args.seed, max_ticks=args.ticks, ablate_beta=args.ablate_beta)
        return 0
    metrics = run(scenario, seed=args.seed, max_ticks=args.ticks, ablate_beta=args.ablate_beta)
    print(json.dumps(metrics.summary, sort_keys=True))
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "metrics.csv").write_text(metrics.to_csv())
        from .plots import emit_plots

        emit_plots(metrics, out, scenario=scenario)
        print(f"wrote {out / 'metrics.csv'} and plots", file=sys.stderr)
    return 0 if metrics.summary["success"] else 1


def _cmd_validate(args) -> int:
    scenario = Scenario.from_file(args.scenario)
    scenario.validate(args.seed)
    print(f"{scenario.name}: ok")
    return 0


def _cmd_plot(args) -> int:
    text = Path(args.metrics).read_text()
    metrics = RunMetrics.from_csv(text)
    scenario = Scenario.from_file(args.scenario) if args.scenario else None
    from .plots import emit_plots

    paths = emit_plots(metrics, args.out_dir, scenario=scenario)
    for p in paths:
        print(p)
    return 0


def main(argv=None) -> int:
    _setup_logging()
    parser = argparse.ArgumentParser(prog="los-swarm", description="LoS-connectivity multi-robot simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute a scenario")
    p_run.add_argument("scenario")
    p_run.add_argument("--seed", type=int, default=None)
    p_run.add_argument("--out", default=None, help="directory for metrics.csv and plots")
    p_run.add_argument("--ticks", type=int, default=None, help="override max ticks")
    p_run.add_argument("--ablate-beta", action="store_true", help="pin the LoS weight to its plateau")
    p_run.add_argument("--serve", type=int, default=None, metavar="PORT", help="serve live state over WebSocket")
    p_run.set_defaults(func=_cmd_run)

    p_val = sub.add_parser("validate", help="check a scenario file")
    p_val.add_argument("scenario")
    p_val.add_argument("--seed", type=int, default=None)
    p_val.set_defaults(func=_cmd_validate)

    p_plot = sub.add_parser("plot", help="render SVG plots from a metrics CSV")
    p_plot.add_argument("metrics")
    p_plot.add_argument("out_dir")
    p_plot.add_argument("--scenario", default=None, help="overlay world geometry")
    p_plot.set_defaults(func=_cmd_plot)

    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    try:
        return args.func(args)
    except ScenarioError as exc:
        print(f"scenario error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
