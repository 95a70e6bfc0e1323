"""Command line interface: ``run``, ``report`` and ``profiles``."""
from __future__ import annotations

import argparse
import json
import sys

from .config import ConfigError, load_scenario
from .runner import OUTPUT_ENV, RunError, report_summary, run_scenario


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="liouville-lab",
        description="Bistable reaction-diffusion around obstacles: invasion, blocking and geometry sweeps.",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run every parameter point of a scenario config")
    run.add_argument("config", help="scenario JSON file")
    run.add_argument("--output-root", default=None,
                     help=f"directory for run outputs (default: ${OUTPUT_ENV} or the config's 'output')")
    run.add_argument("--workers", type=int, default=None, help="parallel parameter points")

    rep = sub.add_parser("report", help="print a markdown summary of a finished run")
    rep.add_argument("run_dir")

    prof = sub.add_parser("profiles", help="compute 1D profiles and the traveling wave for a config")
    prof.add_argument("config")
    prof.add_argument("--output-root", default=None)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "report":
            print(report_summary(args.run_dir))
            return 0
        scenario = load_scenario(args.config)
        if args.command == "profiles":
            scenario.kind = "profiles"
            scenario.name = f"{scenario.name}_profiles"
            scenario.raw = {**scenario.raw, "kind": "profiles"}
            scenario.eps, scenario.eta, scenario.h = (scenario.eps[0],), None, (scenario.h[0],)
            workers = 1
        else:
            workers = args.workers
        result = run_scenario(scenario, args.output_root, workers)
    except (ConfigError, RunError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    for row in result.rows:
        print(json.dumps({k: row.get(k) for k in ("point", "status", "verdict", "message") if row.get(k) is not None}))
    print(f"run directory: {result.run_dir} ({result.n_failed} failed)")
    return result.exit_code


if __name__ == "__main__":
    sys.exit(main())
