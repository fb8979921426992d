"""Command-line interface.

Subcommands: gen-data, train, eval, ablate, grid-lambda, placement,
expr-compare, hist. Exit codes: 0 success, 2 config/usage, 3 data or file
error, 4 shape/validation error, 5 training divergence.
"""

import argparse
import sys
from pathlib import Path

from .backbone import ShapeError
from .config import ConfigError, ExperimentConfig, load_config, seed_for
from .losses import LossInputError
from .metrics import MetricInputError
from .mmv import MmvError
from .nifti import NiftiError
from .volume import DataError

EXIT_CONFIG, EXIT_DATA, EXIT_VALIDATION, EXIT_TRAINING = 2, 3, 4, 5


def _parse_ints(text):
    return tuple(int(x) for x in text.split(",") if x.strip())


def _parse_floats(text):
    return tuple(float(x) for x in text.split(",") if x.strip())


def _load_cfg(args):
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    return cfg


def cmd_gen_data(args):
    from .mmv import write_mmv
    from .synth import CorrelationSpec, generate_synthetic_sample

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    spec = CorrelationSpec().with_noise(args.noise)
    base = seed_for(args.seed, "data") % 2 ** 31
    for i in range(args.count):
        sample = generate_synthetic_sample((base + i) % 2 ** 31, args.shape, spec)
        write_mmv(sample, out / f"{sample.id}.mmv")
    print(f"wrote {args.count} samples to {out}")
    return 0


def cmd_train(args):
    from .train import train

    cfg = _load_cfg(args)
    _, report = train(cfg, out_dir=args.out)
    print(report.to_text())
    print(f"artifacts in {args.out}")
    return 0


def cmd_eval(args):
    from .mmv import read_mmv
    from .train import evaluate_checkpoint

    paths = sorted(Path(args.data).glob("*.mmv"))
    if not paths:
        raise FileNotFoundError(f"no .mmv files under {args.data}")
    samples = [read_mmv(p) for p in paths]
    rows, aggregates = evaluate_checkpoint(args.ckpt, samples, out_dir=args.out)
    for region, m in aggregates.items():
        hd = f"{m['hd_mean']:.3f} mm" if m["hd_defined"] else "undefined"
        print(f"{region.upper():3s}: dice {m['dice_mean']:.4f} +/- {m['dice_std']:.4f}, hd {hd}")
    return 0


def _seeds(args, cfg):
    return _parse_ints(args.seeds) if args.seeds else (cfg.seed,)


def cmd_ablate(args):
    from .experiments import run_ablation

    cfg = _load_cfg(args)
    result = run_ablation(cfg, _seeds(args, cfg), out_dir=args.out)
    print(result.to_text())
    return 0


def cmd_grid_lambda(args):
    from .experiments import DEFAULT_LAMBDAS, lambda_grid_search

    cfg = _load_cfg(args)
    lambdas = _parse_floats(args.lambdas) if args.lambdas else DEFAULT_LAMBDAS
    result = lambda_grid_search(cfg, lambdas, _seeds(args, cfg), out_dir=args.out)
    print(result.to_text())
    return 0


def cmd_placement(args):
    from .experiments import default_placements, placement_experiment

    cfg = _load_cfg(args)
    if args.placements is not None:
        placements = [_parse_ints(part) for part in args.placements.split(";")]
    else:
        placements = default_placements(cfg.network().levels)
    result = placement_experiment(cfg, placements, _seeds(args, cfg), out_dir=args.out)
    print(result.to_text())
    return 0


def cmd_expr_compare(args):
    from .experiments import expression_comparison

    cfg = _load_cfg(args)
    result = expression_comparison(cfg, _seeds(args, cfg), out_dir=args.out)
    print(result.to_text())
    return 0


def _load_volume_arg(spec_text):
    """'vol.nii' or 'sample.mmv:K' (modality K of an MMV sample, 1-based;
    ':label' for the label volume)."""
    from .mmv import read_mmv
    from .nifti import read_nifti

    path, sep, selector = str(spec_text).rpartition(":")
    if not sep or "/" in selector or "\\" in selector:
        path, selector = spec_text, ""
    p = Path(path)
    if p.suffix == ".nii":
        return read_nifti(p), None
    if p.suffix == ".mmv":
        sample = read_mmv(p)
        if selector == "label":
            return sample.label, sample
        index = int(selector) if selector else 1
        return sample.modality(index), sample
    raise DataError(f"cannot load volume from {spec_text!r} (.nii or .mmv[:K] expected)")


def cmd_hist(args):
    import numpy as np

    from .metrics import joint_intensity_histogram, write_histogram_csv
    from .volume import region_masks

    vol_a, sample_a = _load_volume_arg(args.a)
    vol_b, _ = _load_volume_arg(args.b)
    if args.mask == "all":
        mask = np.ones(vol_a.shape, dtype=bool)
    elif args.mask == "wt":
        if sample_a is None:
            raise DataError("--mask wt needs an .mmv input (label map required)")
        mask = region_masks(sample_a.label)[0].values.astype(bool)
    else:
        mask = (vol_a.values != 0) & (vol_b.values != 0)
    counts, a_edges, b_edges = joint_intensity_histogram(vol_a, vol_b, args.bins, mask)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_histogram_csv(counts, out / "hist.csv")
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(4.5, 4))
    ax.pcolormesh(a_edges, b_edges, counts.T, cmap="viridis")
    ax.set_xlabel(args.a); ax.set_ylabel(args.b)
    fig.tight_layout()
    fig.savefig(out / "hist.png", dpi=120)
    plt.close(fig)
    print(f"histogram over {int(counts.sum())} voxels -> {out}/hist.csv, hist.png")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="triseg")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="generate synthetic .mmv samples")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--count", type=int, default=50)
    p.add_argument("--shape", type=_parse_ints, default=(32, 32, 32))
    p.add_argument("--noise", type=float, default=0.3)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("train", help="train one run from a config file")
    p.add_argument("--config")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on an .mmv directory")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_eval)

    for name, func, extra in (
        ("ablate", cmd_ablate, None),
        ("grid-lambda", cmd_grid_lambda, "lambdas"),
        ("placement", cmd_placement, "placements"),
        ("expr-compare", cmd_expr_compare, None),
    ):
        p = sub.add_parser(name)
        p.add_argument("--config")
        p.add_argument("--seeds", help="comma-separated, e.g. 1,2,3")
        p.add_argument("--out", required=True)
        if extra == "lambdas":
            p.add_argument("--lambdas", help="comma-separated, e.g. 0,0.1,0.5")
        if extra == "placements":
            p.add_argument("--placements",
                           help="semicolon-separated level sets, e.g. ';3;2,3'")
        p.set_defaults(func=func)

    p = sub.add_parser("hist", help="joint intensity histogram of two volumes")
    p.add_argument("--a", required=True, help=".nii file or sample.mmv:K")
    p.add_argument("--b", required=True)
    p.add_argument("--bins", type=int, default=64)
    p.add_argument("--mask", choices=("nonzero", "wt", "all"), default="nonzero")
    p.add_argument("--out", default=".")
    p.set_defaults(func=cmd_hist)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, MmvError, NiftiError, FileNotFoundError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (ShapeError, LossInputError, MetricInputError, ValueError) as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except RuntimeError as exc:
        print(f"training error: {exc}", file=sys.stderr)
        return EXIT_TRAINING


if __name__ == "__main__":
    sys.exit(main())
