#!/usr/bin/env python3
"""Linear vs nonlinear correlation expression, paired seeds/splits."""

import argparse

from triseg.config import ExperimentConfig
from triseg.experiments import expression_comparison


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seeds", default="1,2")
    ap.add_argument("--count", type=int, default=50)
    ap.add_argument("--epochs", type=int, default=8)
    ap.add_argument("--out", default="runs/expression")
    args = ap.parse_args()

    cfg = ExperimentConfig(count=args.count, epochs=args.epochs,
                           shape=(32, 32, 32), noise=0.3, deterministic=False)
    seeds = tuple(int(s) for s in args.seeds.split(","))
    result = expression_comparison(cfg, seeds, out_dir=args.out)
    print(result.to_text())


if __name__ == "__main__":
    main()
