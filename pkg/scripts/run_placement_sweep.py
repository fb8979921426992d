#!/usr/bin/env python3
"""Correlation-module placement sweep: which encoder levels carry the
KL constraint (empty set = dual-attention only)."""

import argparse

from triseg.config import ExperimentConfig
from triseg.experiments import default_placements, placement_experiment


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--placements", default=None,
                    help="semicolon-separated level sets, e.g. ';3;2,3'")
    ap.add_argument("--seeds", default="1")
    ap.add_argument("--count", type=int, default=50)
    ap.add_argument("--epochs", type=int, default=8)
    ap.add_argument("--out", default="runs/placement")
    args = ap.parse_args()

    cfg = ExperimentConfig(count=args.count, epochs=args.epochs,
                           shape=(32, 32, 32), noise=0.3, deterministic=False)
    if args.placements is not None:
        placements = [tuple(int(x) for x in part.split(",") if x)
                      for part in args.placements.split(";")]
    else:
        placements = default_placements(cfg.network().levels)
    seeds = tuple(int(s) for s in args.seeds.split(","))
    result = placement_experiment(cfg, placements, seeds, out_dir=args.out)
    print(result.to_text())


if __name__ == "__main__":
    main()
