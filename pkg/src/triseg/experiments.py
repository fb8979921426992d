"""Experiment runners: mode ablation, lambda grid, correlation-module
placement sweep, and linear-vs-nonlinear expression comparison.

Every runner trains with shared data/splits per seed (the master seed
drives both), aggregates per-region dice/HD over seeds, and writes a CSV
plus a human-readable table. Full-scale reference numbers from the
published BraTS 2018 study are quoted in footers for context only; desk
runs are not comparable.
"""

import csv
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .config import ExperimentConfig
from .train import train
from .volume import REGION_NAMES

TABLE_REGIONS = ("et", "wt", "tc")  # presentation order

REFERENCE_FOOTERS = {
    "ablation": ("Full-scale BraTS 2018 reference (context only, not comparable at "
                 "desk scale): avg dice baseline 0.786, +dual 0.792, +tri 0.811; "
                 "avg HD 8.896 / 8.323 / 8.118 mm."),
    "expression": ("Full-scale BraTS 2018 reference (context only): avg dice "
                   "linear 0.795 vs nonlinear 0.811."),
    "placement": ("Full-scale BraTS 2018 reference (context only): deepest-level "
                  "placement scored best (avg dice 0.811); stacking many shallow "
                  "levels degraded sharply."),
    "lambda": "Full-scale BraTS 2018 reference (context only): lambda = 0.1 scored best.",
}


@dataclass
class ExperimentRow:
    label: str
    dice: dict   # region -> mean over runs, plus "avg"
    hd: dict     # region -> mean over runs (nan when never defined), plus "avg"
    n_runs: int


@dataclass
class ExperimentResult:
    name: str
    rows: list                # ExperimentRow per arm
    reports: dict             # (label, seed) -> RunReport
    footer: str

    def to_text(self):
        cols = [r.upper() for r in TABLE_REGIONS] + ["Avg"]
        head = (f"{'method':>16s} | " + "  ".join(f"dice {c:>4s}" for c in cols)
                + " | " + "  ".join(f"hd {c:>4s}" for c in cols))
        lines = [self.name, "=" * len(head), head, "-" * len(head)]
        for row in self.rows:
            dice = "  ".join(f"{row.dice[c]:9.4f}" for c in TABLE_REGIONS + ("avg",))
            hd = "  ".join(f"{row.hd[c]:7.2f}" for c in TABLE_REGIONS + ("avg",))
            lines.append(f"{row.label:>16s} | {dice} | {hd}")
        lines += ["-" * len(head), self.footer, ""]
        return "\n".join(lines)

    def write(self, out_dir):
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / f"{self.name}.txt").write_text(self.to_text())
        with open(out / f"{self.name}.csv", "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["method"]
                            + [f"dice_{r}" for r in TABLE_REGIONS + ("avg",)]
                            + [f"hd_{r}" for r in TABLE_REGIONS + ("avg",)]
                            + ["n_runs"])
            for row in self.rows:
                writer.writerow([row.label]
                                + [repr(row.dice[r]) for r in TABLE_REGIONS + ("avg",)]
                                + [repr(row.hd[r]) for r in TABLE_REGIONS + ("avg",)]
                                + [row.n_runs])


def _aggregate_runs(reports):
    """Mean per-region dice/HD across runs (per-run values are already
    test-split means)."""
    dice, hd = {}, {}
    for region in REGION_NAMES:
        d = [rep.final_metrics[region]["dice_mean"] for rep in reports]
        h = [rep.final_metrics[region]["hd_mean"] for rep in reports
             if rep.final_metrics[region]["hd_defined"]]
        dice[region] = float(np.mean(d))
        hd[region] = float(np.mean(h)) if h else math.nan
    dice["avg"] = float(np.mean([dice[r] for r in REGION_NAMES]))
    defined = [hd[r] for r in REGION_NAMES if not math.isnan(hd[r])]
    hd["avg"] = float(np.mean(defined)) if defined else math.nan
    return dice, hd


def _run_arm(label, cfg, seeds, out_dir, reports):
    arm_reports = []
    for seed in seeds:
        run_cfg = replace(cfg, seed=seed).normalized()
        run_dir = Path(out_dir) / f"{label}-seed{seed}" if out_dir else None
        _, report = train(run_cfg, out_dir=run_dir)
        reports[(label, seed)] = report
        arm_reports.append(report)
    dice, hd = _aggregate_runs(arm_reports)
    return ExperimentRow(label, dice, hd, len(arm_reports))


def run_ablation(base: ExperimentConfig, seeds, out_dir=None) -> ExperimentResult:
    """Baseline / +dual / +tri on identical data and splits per seed."""
    if not seeds:
        raise ValueError("need at least one seed")
    reports = {}
    rows = [_run_arm(mode, replace(base, mode=mode), seeds, out_dir, reports)
            for mode in ("baseline", "dual", "tri")]
    result = ExperimentResult("ablation", rows, reports, REFERENCE_FOOTERS["ablation"])
    if out_dir:
        result.write(out_dir)
    return result


DEFAULT_LAMBDAS = (0.0, 0.05, 0.1, 0.2, 0.5)


def lambda_grid_search(base: ExperimentConfig, lambdas=DEFAULT_LAMBDAS, seeds=(0,),
                       out_dir=None) -> ExperimentResult:
    """Tri-mode runs across the lambda grid; also emits the avg dice / avg HD
    curve as CSV and a plot."""
    for lam in lambdas:
        if not (lam >= 0 and math.isfinite(lam)):
            raise ValueError(f"lambda values must be finite and >= 0, got {lam}")
    reports = {}
    rows = [_run_arm(f"lambda={lam:g}", replace(base, mode="tri", lam=lam),
                     seeds, out_dir, reports)
            for lam in lambdas]
    result = ExperimentResult("lambda_grid", rows, reports, REFERENCE_FOOTERS["lambda"])
    if out_dir:
        result.write(out_dir)
        _write_lambda_curve(lambdas, rows, Path(out_dir))
    return result


def _write_lambda_curve(lambdas, rows, out):
    with open(out / "lambda_curve.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["lambda", "avg_dice", "avg_hd_mm"])
        for lam, row in zip(lambdas, rows):
            writer.writerow([repr(float(lam)), repr(row.dice["avg"]), repr(row.hd["avg"])])
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, axes = plt.subplots(1, 2, figsize=(9, 3.5))
    xs = list(lambdas)
    axes[0].plot(xs, [r.dice["avg"] for r in rows], "o-")
    axes[0].set_xlabel("lambda"); axes[0].set_ylabel("avg dice")
    axes[1].plot(xs, [r.hd["avg"] for r in rows], "o-", color="tab:red")
    axes[1].set_xlabel("lambda"); axes[1].set_ylabel("avg HD (mm)")
    fig.tight_layout()
    fig.savefig(out / "lambda_curve.png", dpi=120)
    plt.close(fig)


def placement_experiment(base: ExperimentConfig, placements, seeds=(0,),
                         out_dir=None) -> ExperimentResult:
    """One run per correlation-module placement set (1-based level indices);
    the empty set is the correlation-disabled (dual) arm."""
    levels = base.network().levels
    for placement in placements:
        for lvl in placement:
            if not 1 <= int(lvl) <= levels:
                raise ValueError(f"placement level {lvl} outside 1..{levels}")
    reports = {}
    rows = []
    for placement in placements:
        placement = tuple(sorted(int(l) for l in placement))
        if placement:
            cfg = replace(base, mode="tri", correlation_levels=placement)
            label = "levels " + "+".join(str(l) for l in placement)
        else:
            cfg = replace(base, mode="dual")
            label = "none (dual)"
        rows.append(_run_arm(label, cfg, seeds, out_dir, reports))
    result = ExperimentResult("placement", rows, reports, REFERENCE_FOOTERS["placement"])
    if out_dir:
        result.write(out_dir)
    return result


def default_placements(levels):
    """Every single level, the deepest adjacent pair, all levels, and off."""
    sets = [()]
    sets += [(l,) for l in range(1, levels + 1)]
    if levels >= 2:
        sets.append((levels - 1, levels))
        sets.append(tuple(range(1, levels + 1)))
    return sets


def expression_comparison(base: ExperimentConfig, seeds, out_dir=None) -> ExperimentResult:
    """Linear vs nonlinear correlation expression, identical seeds/splits."""
    if not seeds:
        raise ValueError("need at least one seed")
    reports = {}
    rows = [_run_arm(expr, replace(base, mode="tri", expression=expr),
                     seeds, out_dir, reports)
            for expr in ("linear", "nonlinear")]
    result = ExperimentResult("expression", rows, reports, REFERENCE_FOOTERS["expression"])
    if out_dir:
        result.write(out_dir)
    return result
