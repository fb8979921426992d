#!/usr/bin/env python3
"""Sweep the correlation-loss weight and plot avg dice / avg HD vs lambda."""

import argparse

from triseg.config import ExperimentConfig
from triseg.experiments import DEFAULT_LAMBDAS, lambda_grid_search


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--lambdas", default=",".join(str(l) for l in DEFAULT_LAMBDAS))
    ap.add_argument("--seeds", default="1")
    ap.add_argument("--count", type=int, default=50)
    ap.add_argument("--epochs", type=int, default=8)
    ap.add_argument("--out", default="runs/lambda")
    args = ap.parse_args()

    cfg = ExperimentConfig(count=args.count, epochs=args.epochs,
                           shape=(32, 32, 32), noise=0.3, deterministic=False)
    lambdas = tuple(float(l) for l in args.lambdas.split(","))
    seeds = tuple(int(s) for s in args.seeds.split(","))
    result = lambda_grid_search(cfg, lambdas, seeds, out_dir=args.out)
    print(result.to_text())
    print(f"curve: {args.out}/lambda_curve.csv, {args.out}/lambda_curve.png")


if __name__ == "__main__":
    main()
