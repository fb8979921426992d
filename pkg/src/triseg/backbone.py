"""Multi-encoder 3D U-Net backbone.

The four modality encoders are parameter-independent paths realized as one
grouped-convolution stack (groups = modalities): block-diagonal weights and
per-channel norms make this exactly equivalent to four separate encoders,
and it is considerably faster on CPU. Feature tensors are (N, C, D, H, W);
per-level channel layout is [mod1 | mod2 | mod3 | mod4].
"""

from dataclasses import dataclass, replace

import torch
import torch.nn as nn
import torch.nn.functional as F


class ShapeError(ValueError):
    pass


@dataclass(frozen=True)
class NetworkConfig:
    levels: int = 3
    initial_filters: int = 8
    input_shape: tuple = (32, 32, 32)
    dropout: float = 0.2
    num_modalities: int = 4
    num_regions: int = 3
    dilation_rates: tuple = (2, 4)
    leaky_slope: float = 0.01
    se_ratio: int = 4
    modality_scalar: bool = False  # one attention scalar per modality instead of per channel

    def __post_init__(self):
        if self.levels < 2:
            raise ShapeError(f"levels must be >= 2, got {self.levels}")
        stride = 2 ** (self.levels - 1)
        if any(s % stride for s in self.input_shape):
            raise ShapeError(
                f"input shape {self.input_shape} not divisible by 2^(levels-1) = {stride}"
            )

    def filters_at(self, level):
        """Per-modality channel count at 0-based level."""
        return self.initial_filters * 2 ** level

    @property
    def fused_channels(self):
        return self.num_modalities * self.filters_at(self.levels - 1)


def desk_config(**overrides):
    return replace(NetworkConfig(), **overrides) if overrides else NetworkConfig()


def paper_config(**overrides):
    cfg = NetworkConfig(levels=6, initial_filters=8, input_shape=(128, 128, 128))
    return replace(cfg, **overrides) if overrides else cfg


class DilatedConv3d(nn.Conv3d):
    """3x3x3 conv with dilation d, padding d (shape preserving).

    Forward routes through an exact space-to-batch decomposition (dense conv
    on the d-interleaved sub-grids) when the spatial dims divide d; torch's
    direct dilated-3d path is several times slower on CPU.
    """

    def __init__(self, in_channels, out_channels, dilation, groups=1):
        super().__init__(in_channels, out_channels, 3,
                         padding=dilation, dilation=dilation, groups=groups)

    def forward(self, x):
        d = self.dilation[0]
        n, c, D, H, W = x.shape
        if D % d or H % d or W % d:
            return self._conv_forward(x, self.weight, self.bias)
        xb = (x.reshape(n, c, D // d, d, H // d, d, W // d, d)
               .permute(0, 3, 5, 7, 1, 2, 4, 6)
               .reshape(n * d ** 3, c, D // d, H // d, W // d))
        yb = F.conv3d(xb, self.weight, self.bias, padding=1, groups=self.groups)
        co = yb.shape[1]
        return (yb.reshape(n, d, d, d, co, D // d, H // d, W // d)
                  .permute(0, 4, 5, 1, 6, 2, 7, 3)
                  .reshape(n, co, D, H, W))


def conv_norm_act(in_ch, out_ch, slope, groups=1):
    return nn.Sequential(
        nn.Conv3d(in_ch, out_ch, 3, padding=1, groups=groups),
        nn.InstanceNorm3d(out_ch, affine=True, track_running_stats=True),
        nn.LeakyReLU(slope),
    )


class ResDilBlock(nn.Module):
    """x + f(x), f = two dilated 3x3x3 convs (rates 2 then 4), each with
    normalization and nonlinearity. Shape preserving."""

    def __init__(self, channels, rates=(2, 4), slope=0.01, groups=1):
        super().__init__()
        self.channels = channels
        body = []
        for r in rates:
            body += [
                DilatedConv3d(channels, channels, r, groups=groups),
                nn.InstanceNorm3d(channels, affine=True, track_running_stats=True),
                nn.LeakyReLU(slope),
            ]
        self.body = nn.Sequential(*body)

    def forward(self, x):
        if x.shape[1] != self.channels:
            raise ShapeError(f"expected {self.channels} channels, got {x.shape[1]}")
        return x + self.body(x)


class MultiEncoder(nn.Module):
    """Per-modality encoders over the stacked input (N, n_mod, D, H, W).

    forward returns one concatenated feature map per level; level l halves
    the spatial dims l times and has n_mod * initial_filters * 2^l channels.
    """

    def __init__(self, cfg: NetworkConfig):
        super().__init__()
        self.cfg = cfg
        g = cfg.num_modalities
        self.stages = nn.ModuleList()
        in_ch = g
        for level in range(cfg.levels):
            out_ch = g * cfg.filters_at(level)
            ops = [nn.MaxPool3d(2)] if level > 0 else []
            ops += [
                conv_norm_act(in_ch, out_ch, cfg.leaky_slope, groups=g),
                ResDilBlock(out_ch, cfg.dilation_rates, cfg.leaky_slope, groups=g),
                nn.Dropout3d(cfg.dropout),
            ]
            self.stages.append(nn.Sequential(*ops))
            in_ch = out_ch

    def forward(self, x):
        if x.shape[1] != self.cfg.num_modalities:
            raise ShapeError(
                f"expected {self.cfg.num_modalities} input modalities, got {x.shape[1]}"
            )
        stride = 2 ** (self.cfg.levels - 1)
        if any(s % stride for s in x.shape[2:]):
            raise ShapeError(f"spatial dims {tuple(x.shape[2:])} not divisible by {stride}")
        feats = []
        for stage in self.stages:
            x = stage(x)
            feats.append(x)
        return feats

    def encode_modality(self, x_1ch, index):
        """Encode a single modality (1-based index) alone.

        Runs the grouped stack on a zero-filled input with the modality in
        its slot and slices its group; exact because the groups never mix.
        """
        full = torch.zeros(
            (x_1ch.shape[0], self.cfg.num_modalities, *x_1ch.shape[2:]),
            dtype=x_1ch.dtype, device=x_1ch.device,
        )
        full[:, index - 1: index] = x_1ch
        return [modality_slice(f, index, self.cfg.num_modalities) for f in self.forward(full)]


def modality_slice(feat, index, num_modalities=4):
    """Channel slice of one modality (1-based) from a concatenated map."""
    c = feat.shape[1] // num_modalities
    return feat[:, (index - 1) * c: index * c]


class Decoder(nn.Module):
    """Upsample x2, channel-adjust conv, concat the fused skip, res_dil,
    1x1x1 logit head at every level. Returns logits shallow..full-res."""

    def __init__(self, cfg: NetworkConfig):
        super().__init__()
        self.cfg = cfg
        self.adjust = nn.ModuleList()
        self.blocks = nn.ModuleList()
        self.heads = nn.ModuleList()
        in_ch = cfg.fused_channels
        for level in range(cfg.levels - 2, -1, -1):
            skip_ch = cfg.num_modalities * cfg.filters_at(level)
            adj_ch = cfg.filters_at(level)
            self.adjust.append(conv_norm_act(in_ch, adj_ch, cfg.leaky_slope))
            self.blocks.append(ResDilBlock(adj_ch + skip_ch, cfg.dilation_rates, cfg.leaky_slope))
            self.heads.append(nn.Conv3d(adj_ch + skip_ch, cfg.num_regions, 1))
            in_ch = adj_ch + skip_ch

    def forward(self, fused, skips):
        if len(skips) != self.cfg.levels:
            raise ShapeError(f"expected {self.cfg.levels} skip levels, got {len(skips)}")
        z = fused
        logits = []
        for i, level in enumerate(range(self.cfg.levels - 2, -1, -1)):
            z = F.interpolate(z, scale_factor=2, mode="trilinear", align_corners=False)
            z = self.adjust[i](z)
            z = torch.cat([z, skips[level]], dim=1)
            z = self.blocks[i](z)
            logits.append(self.heads[i](z))
        return logits


def merge_deep_supervision(level_logits):
    """Trilinearly upsample every non-final logit map to the final
    resolution and sum. Linear in its inputs."""
    if not level_logits:
        raise ShapeError("need at least one level of logits")
    final = level_logits[-1]
    out = final
    for lg in level_logits[:-1]:
        out = out + F.interpolate(lg, size=final.shape[2:], mode="trilinear",
                                  align_corners=False)
    return out
