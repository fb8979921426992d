"""Training losses: overlap (dice) loss, KL correlation constraint, total.

All functions accept torch tensors and are differentiable; they work for
float32 or float64 inputs (tests use float64 for finite-difference checks).
"""

from dataclasses import dataclass

import torch


class LossInputError(ValueError):
    pass


def dice_loss(pred, target, eps=1e-5):
    """1 - 2*(sum p*g + eps) / (sum (p+g) + eps), summed jointly over the
    region channels and voxels (one ratio, not a per-class average).

    pred: probabilities in [0,1]; target: binary masks of the same shape.
    """
    if pred.shape != target.shape:
        raise LossInputError(f"shape mismatch: {tuple(pred.shape)} vs {tuple(target.shape)}")
    if eps < 0:
        raise LossInputError("eps must be >= 0")
    with torch.no_grad():
        if pred.min() < -1e-6 or pred.max() > 1 + 1e-6:
            raise LossInputError(
                f"pred must be probabilities in [0,1], got range "
                f"[{pred.min().item():.3g}, {pred.max().item():.3g}]"
            )
    target = target.to(pred.dtype)
    intersection = (pred * target).sum()
    total = (pred + target).sum()
    return 1.0 - 2.0 * (intersection + eps) / (total + eps)


def to_distribution(x):
    """Project a feature tensor onto a probability vector: flatten over all
    channels and positions, then softmax. Sums to 1, every entry > 0."""
    return torch.softmax(x.reshape(-1), dim=0)


def kl_divergence(p, q, eps=1e-8):
    """sum p * ln(p / max(q, eps)) with the 0*ln(0/q) := 0 convention.

    Both arguments must be normalized probability vectors of equal length.
    """
    if p.shape != q.shape:
        raise LossInputError(f"length mismatch: {tuple(p.shape)} vs {tuple(q.shape)}")
    if eps <= 0:
        raise LossInputError("eps must be > 0")
    with torch.no_grad():
        for name, v in (("P", p), ("Q", q)):
            if v.min() < 0:
                raise LossInputError(f"{name} has negative entries")
            if abs(v.sum().item() - 1.0) > 1e-5:
                raise LossInputError(f"{name} is not normalized (sum = {v.sum().item():.6g})")
    q = torch.clamp(q, min=eps)
    return torch.special.xlogy(p, p / q).sum()


def correlation_loss(couples, eps=1e-8):
    """Per (F_i, Z_js) couple: KL(dist(Z_js) || dist(F_i)).

    The target modality's spatial-attention representation plays P; the
    correlated (predicted) representation plays Q. Empty input gives [].
    """
    return [kl_divergence(to_distribution(z_js), to_distribution(f_i), eps)
            for f_i, z_js in couples]


@dataclass
class LossBreakdown:
    """total = dice + lam * sum(pair_losses), exactly as computed."""

    dice: object
    pair_losses: list
    lam: float
    total: object

    def detached(self):
        """Float-valued copy (for reports)."""
        def f(v):
            return float(v.detach()) if hasattr(v, "detach") else float(v)
        return LossBreakdown(f(self.dice), [f(p) for p in self.pair_losses],
                             float(self.lam), f(self.total))


def total_loss(dice, pair_losses, lam):
    """Combine the dice loss with lambda-weighted correlation losses.

    Works on floats or torch scalars; the returned breakdown holds whatever
    was passed in (call .detached() for a report-friendly copy).
    """
    if lam < 0:
        raise LossInputError(f"lambda must be >= 0, got {lam}")
    pair_losses = list(pair_losses)
    total = dice + lam * sum(pair_losses) if pair_losses else dice
    return LossBreakdown(dice, pair_losses, lam, total)
