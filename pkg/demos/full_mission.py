#!/usr/bin/env python3
"""The whole retrieval mission at desk scale.

Runs the bundled nominal scenario (and, with --slip, the grasp-slip
variant) and prints the stage timeline, key events, and the metrics a
field log would carry.
"""

import argparse
import pathlib

from seahex.mission import run_mission
from seahex.scenario import load_scenario

SCENARIOS = pathlib.Path(__file__).resolve().parent.parent / "scenarios"


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--slip", action="store_true", help="run the grasp-slip recovery variant")
    ap.add_argument("--seed", type=int, default=None)
    args = ap.parse_args()

    name = "slip_recovery.json" if args.slip else "nominal.json"
    cfg = load_scenario(str(SCENARIOS / name))
    if args.seed is not None:
        from dataclasses import replace

        cfg = replace(cfg, seed=args.seed)

    print(f"scenario: {name}  seed: {cfg.seed}\n")
    records, metrics, runner = run_mission(cfg)

    print("stage timeline:")
    last = None
    for rec in records:
        if rec.stage != last:
            print(f"  t={rec.t:7.2f}s  {rec.stage}")
            last = rec.stage
    print("\nevents:")
    for rec in records:
        for ev in rec.events:
            if not ev.startswith("stage:"):
                print(f"  t={rec.t:7.2f}s  {ev}")

    print("\nmetrics:")
    for key, value in metrics.to_dict().items():
        print(f"  {key}: {value}")


if __name__ == "__main__":
    main()
