"""Full segmentation network: modality encoders, fusion at the deepest
level, optional correlation branches at configured levels, decoder with
deep supervision.

Modes:
    baseline - encoders + decoder, fused feature is the raw concatenation
    dual     - adds modality + spatial attention fusion at the deepest level
    tri      - dual plus correlation branches at `correlation_levels`
               (1-based; the deepest level reuses the fusion's Z_is)
"""

from dataclasses import dataclass

import torch.nn as nn

from .backbone import (Decoder, MultiEncoder, NetworkConfig, ShapeError,
                       merge_deep_supervision)
from .fusion import DEFAULT_PAIRS, CorrelationAttention, TriAttentionFusion

MODES = ("baseline", "dual", "tri")


@dataclass
class ForwardOutput:
    logits: object            # merged full-resolution 3-region logits
    level_logits: list        # per decoder level, shallow resolution first
    couples: list             # (F_i, Z_js) pairs for the correlation loss


class SegmentationNet(nn.Module):
    def __init__(self, cfg: NetworkConfig = None, mode="tri", pairs=DEFAULT_PAIRS,
                 expression="nonlinear", correlation_levels=None):
        super().__init__()
        cfg = cfg or NetworkConfig()
        if mode not in MODES:
            raise ValueError(f"unknown mode {mode!r}")
        if mode != "tri":
            pairs, correlation_levels = (), ()
        elif correlation_levels is None:
            correlation_levels = (cfg.levels,)
        correlation_levels = tuple(sorted(set(int(l) for l in correlation_levels)))
        for lvl in correlation_levels:
            if not 1 <= lvl <= cfg.levels:
                raise ShapeError(f"correlation level {lvl} outside 1..{cfg.levels}")
        if mode == "tri" and not pairs:
            raise ValueError("tri mode needs at least one correlation pair")

        self.cfg = cfg
        self.mode = mode
        self.correlation_levels = correlation_levels

        self.encoder = MultiEncoder(cfg)
        self.fusion = None
        if mode != "baseline":
            deep_pairs = pairs if cfg.levels in correlation_levels else ()
            self.fusion = TriAttentionFusion(
                cfg.fused_channels, deep_pairs, cfg.num_modalities,
                expression, cfg.se_ratio, cfg.leaky_slope, cfg.modality_scalar,
            )
        # shallow correlation branches carry their own spatial attention
        self.shallow_correlation = nn.ModuleDict({
            str(lvl): CorrelationAttention(
                cfg.num_modalities * cfg.filters_at(lvl - 1), pairs,
                cfg.num_modalities, expression, cfg.leaky_slope, own_spatial=True,
            )
            for lvl in correlation_levels if lvl != cfg.levels
        })
        self.decoder = Decoder(cfg)

    def forward(self, x, compute_couples=True):
        feats = self.encoder(x)
        couples = []
        for lvl in self.correlation_levels:
            if compute_couples and lvl != self.cfg.levels:
                couples += self.shallow_correlation[str(lvl)](concat=feats[lvl - 1])
        if self.fusion is None:
            fused = feats[-1]
        else:
            fused, deep_couples = self.fusion(feats[-1], compute_couples)
            couples += deep_couples
        level_logits = self.decoder(fused, feats)
        return ForwardOutput(merge_deep_supervision(level_logits), level_logits, couples)
