"""Config-driven training and evaluation.

One master seed fans out to data generation, splitting, parameter init,
and the training loop, so paired runs (e.g. the ablation arms) see
identical data, splits, and shared-module initializations. In
deterministic mode a run is bit-reproducible; report.json is the
byte-comparable artifact (wall time lives in run_meta.json).
"""

import json
import math
import time
from dataclasses import dataclass, asdict
from pathlib import Path

import numpy as np
import torch

from .config import ExperimentConfig, seed_for
from .losses import dice_loss, correlation_loss, total_loss
from .metrics import (RegionMetrics, aggregate_region_metrics, dice_score,
                      hausdorff_distance, write_metrics_csv)
from .mmv import read_mmv
from .network import SegmentationNet
from .synth import CorrelationSpec, generate_synthetic_sample
from .volume import REGION_NAMES, normalize_intensity, region_masks


class TrainingDivergence(RuntimeError):
    """A loss term went non-finite; message names the term."""


class PlateauController:
    """LR-on-plateau plus early stopping with exact epoch semantics.

    With a constant validation loss and patience 10/50, the LR halves at
    epochs 11, 21, ... and training stops after epoch 51 (torch's
    ReduceLROnPlateau would halve one epoch later, so this is hand-rolled).
    """

    def __init__(self, lr, factor=0.5, lr_patience=10, stop_patience=50, min_delta=0.0):
        self.lr = lr
        self.factor = factor
        self.lr_patience = lr_patience
        self.stop_patience = stop_patience
        self.min_delta = min_delta
        self.best = math.inf
        self.best_epoch = 0
        self._since_best = 0
        self._since_reduce = 0

    def update(self, epoch, val_loss):
        """Returns (lr, improved, stop)."""
        if val_loss < self.best - self.min_delta:
            self.best = val_loss
            self.best_epoch = epoch
            self._since_best = 0
            self._since_reduce = 0
            return self.lr, True, False
        self._since_best += 1
        self._since_reduce += 1
        if self._since_reduce >= self.lr_patience:
            self.lr *= self.factor
            self._since_reduce = 0
        return self.lr, False, self._since_best >= self.stop_patience


_DEFAULT_THREADS = torch.get_num_threads()


def apply_determinism(deterministic):
    # single-threaded is the only mode where bit-reproducibility is promised
    torch.set_num_threads(1 if deterministic else _DEFAULT_THREADS)


def init_parameters(model, seed):
    """Re-initialize every parameter from a per-parameter-name generator.

    U(-1/sqrt(fan_in), 1/sqrt(fan_in)) for conv/linear weights and biases
    (torch's default bound); norm layers get weight 1 / bias 0 and reset
    running stats. Name-keyed seeding keeps shared modules identical across
    model variants that add or drop other modules.
    """
    def gen(name):
        g = torch.Generator()
        g.manual_seed(seed_for(seed, name))
        return g

    with torch.no_grad():
        for name, module in model.named_modules():
            if isinstance(module, (torch.nn.Conv3d, torch.nn.Linear)):
                fan_in = module.weight.shape[1:].numel()
                bound = 1.0 / math.sqrt(fan_in)
                module.weight.uniform_(-bound, bound, generator=gen(f"{name}.weight"))
                if module.bias is not None:
                    module.bias.uniform_(-bound, bound, generator=gen(f"{name}.bias"))
                if ".heads." in f"{name}.":
                    # region-logit heads start positive: a sigmoid channel
                    # that goes dead early cannot recover (grad ~ p(1-p))
                    # within short training budgets
                    module.bias.fill_(0.5)
            elif isinstance(module, torch.nn.InstanceNorm3d):
                module.reset_running_stats()
                if module.affine:
                    module.weight.fill_(1.0)
                    module.bias.fill_(0.0)


def build_model(cfg: ExperimentConfig) -> SegmentationNet:
    cfg = cfg.normalized()
    return SegmentationNet(
        cfg.network(), mode=cfg.mode, pairs=cfg.training_pairs(),
        expression=cfg.expression, correlation_levels=cfg.correlation_levels,
    )


def build_dataset(cfg: ExperimentConfig):
    """Synthetic samples from the fanned-out data seed, or .mmv files."""
    if cfg.data == "synthetic":
        base = seed_for(cfg.seed, "data") % 2 ** 31
        spec = CorrelationSpec().with_noise(cfg.noise)
        return [generate_synthetic_sample((base + i) % 2 ** 31, cfg.shape, spec)
                for i in range(cfg.count)]
    paths = sorted(Path(cfg.data).glob("*.mmv"))
    if not paths:
        raise FileNotFoundError(f"no .mmv files under {cfg.data}")
    return [read_mmv(p) for p in paths]


def split_dataset(samples, cfg: ExperimentConfig):
    """Deterministic 80/20-style split: function of (seed, dataset) only."""
    n = len(samples)
    n_test = max(1, round(n * cfg.test_fraction))
    if n_test >= n:
        raise ValueError(f"dataset of {n} samples too small for test fraction")
    rng = np.random.default_rng(seed_for(cfg.seed, "split"))
    perm = rng.permutation(n)
    test_idx = set(perm[:n_test].tolist())
    train = [s for i, s in enumerate(samples) if i not in test_idx]
    test = [s for i, s in enumerate(samples) if i in test_idx]
    return train, test


def sample_to_tensors(sample):
    """(1, 4, D, H, W) normalized input and (1, 3, D, H, W) region targets."""
    mods = [normalize_intensity(v).values for v in sample.modalities]
    x = torch.from_numpy(np.stack(mods)[None]).float()
    masks = region_masks(sample.label)
    t = torch.from_numpy(np.stack([m.values for m in masks])[None]).float()
    return x, t


@dataclass
class RunReport:
    config_echo: dict
    seed: int
    epochs_run: int
    best_epoch: int
    epoch_rows: list          # per-epoch dicts: lr, train losses, val loss
    final_metrics: dict       # per region: mean/std dice and HD over the test split
    wall_time_s: float = 0.0  # excluded from the canonical serialization

    def canonical_json(self):
        payload = asdict(self)
        payload.pop("wall_time_s")
        return json.dumps(payload, sort_keys=True, indent=1)

    def save(self, out_dir):
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.json").write_text(self.canonical_json())
        (out / "run_meta.json").write_text(
            json.dumps({"wall_time_s": self.wall_time_s}))
        (out / "report.txt").write_text(self.to_text())

    def to_text(self):
        lines = ["run report", "=" * 60,
                 f"seed {self.seed}  epochs {self.epochs_run}  best epoch {self.best_epoch}",
                 "",
                 "epoch    lr        train_dice  train_corr  train_total  val_total"]
        for r in self.epoch_rows:
            corr = sum(r["train_corr"]) if r["train_corr"] else 0.0
            lines.append(f"{r['epoch']:5d}  {r['lr']:.2e}  {r['train_dice']:10.4f}  "
                         f"{corr:10.4f}  {r['train_total']:11.4f}  {r['val_total']:9.4f}")
        lines += ["", "test metrics (mean +/- std; validation = test split at desk scale)"]
        for region in REGION_NAMES:
            m = self.final_metrics[region]
            hd = (f"{m['hd_mean']:.3f} +/- {m['hd_std']:.3f} mm ({m['hd_defined']}/{m['n']})"
                  if m["hd_defined"] else "undefined")
            lines.append(f"  {region.upper():3s}: dice {m['dice_mean']:.4f} +/- "
                         f"{m['dice_std']:.4f}   hd {hd}")
        return "\n".join(lines) + "\n"


def _check_finite(value, term, epoch):
    if not math.isfinite(value):
        raise TrainingDivergence(f"{term} became {value} at epoch {epoch}")


def train(cfg: ExperimentConfig, out_dir=None):
    """Optimize the total loss; returns (checkpoint dict, RunReport).

    Adam at cfg.lr, LR x0.5 after lr_patience stagnant validation epochs,
    early stop after early_stop_patience. The checkpoint holds the best
    validation epoch's parameters.
    """
    cfg = cfg.normalized()
    apply_determinism(cfg.deterministic)
    t_start = time.perf_counter()

    samples = build_dataset(cfg)
    train_samples, val_samples = split_dataset(samples, cfg)
    train_data = [sample_to_tensors(s) for s in train_samples]
    val_data = [sample_to_tensors(s) for s in val_samples]

    model = build_model(cfg)
    init_parameters(model, seed_for(cfg.seed, "init"))
    torch.manual_seed(seed_for(cfg.seed, "train") % 2 ** 63)
    shuffle_rng = np.random.default_rng(seed_for(cfg.seed, "shuffle"))

    optimizer = torch.optim.Adam(model.parameters(), lr=cfg.lr)
    controller = PlateauController(cfg.lr, cfg.lr_factor, cfg.lr_patience,
                                   cfg.early_stop_patience)
    tri = cfg.mode == "tri"
    epoch_rows = []
    best_state = None
    best_epoch = 0
    epochs_run = 0

    for epoch in range(1, cfg.epochs + 1):
        model.train()
        order = shuffle_rng.permutation(len(train_data))
        dice_sum, corr_sums, total_sum = 0.0, None, 0.0
        for idx in order:
            x, target = train_data[idx]
            optimizer.zero_grad()
            out = model(x, compute_couples=tri)
            pred = torch.sigmoid(out.logits)
            dice = dice_loss(pred, target)
            if tri and cfg.lam > 0:
                pair_losses = correlation_loss(out.couples)
            elif tri:
                # lambda = 0: correlation losses are report-only; detaching
                # keeps the backward pass identical to a dual run
                pair_losses = correlation_loss(
                    [(f.detach(), z.detach()) for f, z in out.couples])
            else:
                pair_losses = []
            breakdown = total_loss(dice, pair_losses, cfg.lam if tri else 0.0)
            breakdown.total.backward()
            optimizer.step()

            step_losses = breakdown.detached()
            _check_finite(step_losses.dice, "dice loss", epoch)
            for k, pl in enumerate(step_losses.pair_losses):
                _check_finite(pl, f"correlation loss (pair {k})", epoch)
            dice_sum += step_losses.dice
            if step_losses.pair_losses:
                if corr_sums is None:
                    corr_sums = [0.0] * len(step_losses.pair_losses)
                for k, pl in enumerate(step_losses.pair_losses):
                    corr_sums[k] += pl
            total_sum += step_losses.total

        n_train = len(train_data)
        val_total = _validation_loss(model, val_data, cfg)
        _check_finite(val_total, "validation loss", epoch)
        lr, improved, stop = controller.update(epoch, val_total)
        epoch_rows.append({
            "epoch": epoch,
            "lr": optimizer.param_groups[0]["lr"],
            "train_dice": dice_sum / n_train,
            "train_corr": [c / n_train for c in corr_sums] if corr_sums else [],
            "train_total": total_sum / n_train,
            "val_total": val_total,
        })
        for group in optimizer.param_groups:
            group["lr"] = lr
        if improved or best_state is None:
            best_state = {k: v.detach().clone() for k, v in model.state_dict().items()}
            best_epoch = epoch
        epochs_run = epoch
        if stop:
            break

    model.load_state_dict(best_state)
    rows, aggregates = evaluate_model(model, val_samples)
    report = RunReport(
        config_echo=_config_echo(cfg),
        seed=cfg.seed,
        epochs_run=epochs_run,
        best_epoch=best_epoch,
        epoch_rows=epoch_rows,
        final_metrics=aggregates,
        wall_time_s=time.perf_counter() - t_start,
    )
    checkpoint = {
        "config_text": cfg.to_text(),
        "config_hash": cfg.config_hash(),
        "state_dict": best_state,
    }
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        torch.save(checkpoint, out / "checkpoint.pt")
        report.save(out)
        write_metrics_csv(rows, out / "metrics.csv")
    return checkpoint, report


def _config_echo(cfg):
    echo = {}
    for k, v in asdict(cfg).items():
        echo["lambda" if k == "lam" else k] = v
    return echo


def _validation_loss(model, val_data, cfg):
    model.eval()
    tri = cfg.mode == "tri"
    total = 0.0
    with torch.no_grad():
        for x, target in val_data:
            out = model(x, compute_couples=tri)
            dice = dice_loss(torch.sigmoid(out.logits), target)
            pair_losses = correlation_loss(out.couples) if tri else []
            total += float(total_loss(dice, pair_losses, cfg.lam if tri else 0.0).total)
    return total / len(val_data)


def evaluate_model(model, samples, threshold=0.5):
    """Threshold sigmoid outputs into the 3 region masks and score them.

    Returns (RegionMetrics rows, per-region aggregates).
    """
    model.eval()
    rows = []
    with torch.no_grad():
        for sample in samples:
            x, _ = sample_to_tensors(sample)
            pred = torch.sigmoid(model(x, compute_couples=False).logits)[0]
            pred_masks = (pred >= threshold).numpy()
            truth = region_masks(sample.label)
            for k, region in enumerate(REGION_NAMES):
                d = dice_score(pred_masks[k], truth[k].values)
                hd = hausdorff_distance(pred_masks[k], truth[k].values, sample.spacing)
                rows.append(RegionMetrics(sample.id, region, d, hd))
    return rows, aggregate_region_metrics(rows)


def load_checkpoint(path):
    """Returns (ExperimentConfig, model with restored weights)."""
    from .config import parse_config

    payload = torch.load(path, weights_only=False)
    cfg = parse_config(payload["config_text"]).normalized()
    if payload.get("config_hash") != cfg.config_hash():
        raise ValueError(f"{path}: config hash mismatch (corrupt checkpoint?)")
    model = build_model(cfg)
    model.load_state_dict(payload["state_dict"])
    return cfg, model


def evaluate_checkpoint(ckpt_path, samples, out_dir=None):
    cfg, model = load_checkpoint(ckpt_path)
    expected = tuple(cfg.network().input_shape)
    for s in samples:
        if tuple(s.shape) != expected:
            raise ValueError(
                f"sample {s.id} shape {s.shape} incompatible with checkpoint {expected}")
    rows, aggregates = evaluate_model(model, samples)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_metrics_csv(rows, out / "metrics.csv")
        (out / "aggregates.json").write_text(json.dumps(aggregates, sort_keys=True, indent=1))
    return rows, aggregates
