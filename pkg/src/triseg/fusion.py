"""Attention fusion over the concatenated per-modality features.

Modality attention is a channel squeeze-excitation over the 4*C
concatenated channels; spatial attention is one shared sigmoid map from a
1x1x1 conv. Their gated representations are added per modality and
re-concatenated (dual fusion). The correlation branch maps each source
modality's spatial-attention slice through a small fully connected
describer to per-channel (alpha, beta, gamma) and predicts the target
modality's slice through a quadratic (or linear) expression; it feeds the
KL constraint only and never changes the fused forward value.
"""

import torch
import torch.nn as nn

from .backbone import ShapeError, modality_slice

DEFAULT_PAIRS = ((1, 3), (1, 4), (4, 2))  # T1->T1c, T1->T2, T2->FLAIR
EXPRESSIONS = ("nonlinear", "linear")


def validate_pairs(pairs, num_modalities=4):
    for i, j in pairs:
        if i == j or not (1 <= i <= num_modalities and 1 <= j <= num_modalities):
            raise ShapeError(f"invalid correlation pair ({i}, {j})")
    return tuple((int(i), int(j)) for i, j in pairs)


def oriented_pairs(pairs, direction="forward"):
    """Apply the pair-direction config: forward, reverse, or both."""
    pairs = validate_pairs(pairs)
    if direction == "forward":
        return pairs
    if direction == "reverse":
        return tuple((j, i) for i, j in pairs)
    if direction == "both":
        return pairs + tuple((j, i) for i, j in pairs)
    raise ValueError(f"unknown pair direction {direction!r}")


class ModalityAttention(nn.Module):
    """Squeeze-excitation gate over concatenated channels.

    Global average pool -> FC(total -> total/ratio) -> LeakyReLU -> FC back
    -> sigmoid. With scalar=True the per-channel logits of each modality
    slice are averaged first, giving one weight per modality.
    """

    def __init__(self, total_channels, num_modalities=4, ratio=4, slope=0.01, scalar=False):
        super().__init__()
        if total_channels % num_modalities:
            raise ShapeError(
                f"channel count {total_channels} not divisible by {num_modalities} modalities"
            )
        self.total_channels = total_channels
        self.num_modalities = num_modalities
        self.scalar = scalar
        hidden = max(total_channels // ratio, 1)
        self.fc1 = nn.Linear(total_channels, hidden)
        self.fc2 = nn.Linear(hidden, total_channels)
        self.act = nn.LeakyReLU(slope)

    def forward(self, concat):
        if concat.shape[1] != self.total_channels:
            raise ShapeError(f"expected {self.total_channels} channels, got {concat.shape[1]}")
        pooled = concat.mean(dim=(2, 3, 4))
        logits = self.fc2(self.act(self.fc1(pooled)))
        if self.scalar:
            n = concat.shape[0]
            logits = logits.reshape(n, self.num_modalities, -1).mean(dim=2)
            logits = logits.repeat_interleave(self.total_channels // self.num_modalities, dim=1)
        return torch.sigmoid(logits)

    def apply_gate(self, concat, weights):
        return concat * weights[:, :, None, None, None]


class SpatialAttention(nn.Module):
    """One shared sigmoid position map from a 1x1x1 conv."""

    def __init__(self, total_channels):
        super().__init__()
        self.total_channels = total_channels
        self.conv = nn.Conv3d(total_channels, 1, 1)

    def forward(self, concat):
        if concat.shape[1] != self.total_channels:
            raise ShapeError(f"expected {self.total_channels} channels, got {concat.shape[1]}")
        return torch.sigmoid(self.conv(concat))


def dual_attention_fuse(z_im_list, z_is_list):
    """Concat over modalities of (Z_im + Z_is)."""
    if len(z_im_list) != len(z_is_list):
        raise ShapeError("modality list length mismatch")
    for a, b in zip(z_im_list, z_is_list):
        if a.shape != b.shape:
            raise ShapeError(f"shape mismatch {tuple(a.shape)} vs {tuple(b.shape)}")
    return torch.cat([a + b for a, b in zip(z_im_list, z_is_list)], dim=1)


class CorrelationDescriber(nn.Module):
    """FC head mapping a pooled C-channel slice to (alpha, beta, gamma)."""

    def __init__(self, channels, slope=0.01):
        super().__init__()
        self.channels = channels
        self.fc1 = nn.Linear(channels, channels)
        self.fc2 = nn.Linear(channels, 3 * channels)
        self.act = nn.LeakyReLU(slope)

    def forward(self, z_is):
        if z_is.shape[1] != self.channels:
            raise ShapeError(f"expected {self.channels} channels, got {z_is.shape[1]}")
        pooled = z_is.mean(dim=(2, 3, 4))
        out = self.fc2(self.act(self.fc1(pooled)))
        return out[:, : self.channels], out[:, self.channels: 2 * self.channels], \
            out[:, 2 * self.channels:]


def correlation_transform(z_is, params, mode="nonlinear"):
    """Per-channel expression predicting a correlated representation.

    nonlinear: alpha*z^2 + beta*z + gamma; linear: alpha*z + gamma
    (channel vectors broadcast over space).
    """
    if mode not in EXPRESSIONS:
        raise ValueError(f"unknown expression mode {mode!r}")
    alpha, beta, gamma = params
    if alpha.shape[-1] != z_is.shape[1]:
        raise ShapeError(
            f"parameter length {alpha.shape[-1]} != channel count {z_is.shape[1]}"
        )
    def b(v):
        return v.reshape(*v.shape, 1, 1, 1)
    if mode == "nonlinear":
        return b(alpha) * z_is * z_is + b(beta) * z_is + b(gamma)
    return b(alpha) * z_is + b(gamma)


class CorrelationAttention(nn.Module):
    """Correlation branch for one network level.

    Owns one describer per source modality in `pairs`; a pair (i, j) yields
    the couple (F_i, Z_js) consumed by the KL loss. When the level has no
    dual-attention fusion (shallow placements), the branch brings its own
    spatial attention to form Z_is.
    """

    def __init__(self, total_channels, pairs, num_modalities=4, mode="nonlinear",
                 slope=0.01, own_spatial=False):
        super().__init__()
        self.pairs = validate_pairs(pairs, num_modalities)
        self.num_modalities = num_modalities
        self.mode = mode
        c = total_channels // num_modalities
        self.spatial = SpatialAttention(total_channels) if own_spatial else None
        self.describers = nn.ModuleDict({
            str(i): CorrelationDescriber(c, slope) for i in sorted({i for i, _ in self.pairs})
        })

    def forward(self, concat=None, z_is_list=None):
        if z_is_list is None:
            if self.spatial is None:
                raise ShapeError("this correlation branch needs precomputed Z_is slices")
            smap = self.spatial(concat)
            z_is_list = [modality_slice(concat, m, self.num_modalities) * smap
                         for m in range(1, self.num_modalities + 1)]
        couples = []
        for i, j in self.pairs:
            z_i = z_is_list[i - 1]
            f_i = correlation_transform(z_i, self.describers[str(i)](z_i), self.mode)
            couples.append((f_i, z_is_list[j - 1]))
        return couples


class DualAttentionFusion(nn.Module):
    """Modality + spatial attention over the concatenated features."""

    def __init__(self, total_channels, num_modalities=4, ratio=4, slope=0.01, scalar=False):
        super().__init__()
        self.total_channels = total_channels
        self.num_modalities = num_modalities
        self.modality = ModalityAttention(total_channels, num_modalities, ratio, slope, scalar)
        self.spatial = SpatialAttention(total_channels)

    def forward(self, concat):
        """Returns (Z_f, Z_im list, Z_is list)."""
        weights = self.modality(concat)
        smap = self.spatial(concat)
        gated_m = self.modality.apply_gate(concat, weights)
        gated_s = concat * smap
        n = self.num_modalities
        z_im = [modality_slice(gated_m, m, n) for m in range(1, n + 1)]
        z_is = [modality_slice(gated_s, m, n) for m in range(1, n + 1)]
        return dual_attention_fuse(z_im, z_is), z_im, z_is


class TriAttentionFusion(nn.Module):
    """Dual fusion plus the correlation branch at the same level.

    The branch only exposes (F_i, Z_js) couples for the loss; Z_f is
    bitwise identical with and without it.
    """

    def __init__(self, total_channels, pairs=DEFAULT_PAIRS, num_modalities=4,
                 mode="nonlinear", ratio=4, slope=0.01, scalar=False):
        super().__init__()
        self.dual = DualAttentionFusion(total_channels, num_modalities, ratio, slope, scalar)
        self.correlation = (
            CorrelationAttention(total_channels, pairs, num_modalities, mode, slope)
            if pairs else None
        )

    def forward(self, concat, compute_couples=True):
        z_f, z_im, z_is = self.dual(concat)
        couples = []
        if self.correlation is not None and compute_couples:
            couples = self.correlation(z_is_list=z_is)
        return z_f, couples
