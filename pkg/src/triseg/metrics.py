"""Evaluation metrics on binary masks: volumetric overlap (dice),
surface Hausdorff distance in mm, and the joint-intensity histogram
diagnostic used to eyeball cross-modality correlation.
"""

import csv
import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .volume import REGION_NAMES


class MetricInputError(ValueError):
    pass


def _as_bool(mask):
    a = np.asarray(mask)
    return a.astype(bool)


def dice_score(pred, truth):
    """2TP / (2TP + FP + FN). Both masks empty -> 1.0 by convention."""
    p, t = _as_bool(pred), _as_bool(truth)
    if p.shape != t.shape:
        raise MetricInputError(f"shape mismatch: {p.shape} vs {t.shape}")
    tp = np.logical_and(p, t).sum()
    denom = 2 * tp + np.logical_and(p, ~t).sum() + np.logical_and(~p, t).sum()
    if denom == 0:
        return 1.0
    return 2.0 * tp / denom


def border_mask(mask):
    """Mask voxels with a 6-connected non-mask neighbour or on the volume
    boundary (the surface set used by the Hausdorff distance)."""
    m = _as_bool(mask)
    padded = np.pad(m, 1)
    interior = np.ones_like(m)
    for axis in range(3):
        lo = [slice(1, -1)] * 3
        hi = [slice(1, -1)] * 3
        lo[axis] = slice(0, -2)
        hi[axis] = slice(2, None)
        interior &= padded[tuple(lo)] & padded[tuple(hi)]
    return m & ~interior


def hausdorff_distance(pred, truth, spacing=(1.0, 1.0, 1.0), percentile=None):
    """Symmetric Hausdorff distance between mask surfaces, in mm.

    Surfaces are the 6-connectivity border sets; distances are Euclidean
    between voxel centers scaled by `spacing`. Returns None ("undefined")
    if either mask is empty. `percentile` (e.g. 95) replaces the sup of
    each directed distance set with that percentile.
    """
    p, t = _as_bool(pred), _as_bool(truth)
    if p.shape != t.shape:
        raise MetricInputError(f"shape mismatch: {p.shape} vs {t.shape}")
    if not p.any() or not t.any():
        return None
    bp, bt = border_mask(p), border_mask(t)
    # distance_transform_edt gives every voxel's exact distance to the
    # nearest surface voxel of the other mask
    dist_to_t = ndimage.distance_transform_edt(~bt, sampling=spacing)
    dist_to_p = ndimage.distance_transform_edt(~bp, sampling=spacing)
    d_pt = dist_to_t[bp]
    d_tp = dist_to_p[bt]
    if percentile is None:
        return float(max(d_pt.max(), d_tp.max()))
    return float(max(np.percentile(d_pt, percentile), np.percentile(d_tp, percentile)))


def joint_intensity_histogram(vol_a, vol_b, bins=64, mask=None):
    """2D histogram of paired intensities over `mask` voxels.

    Returns (counts, a_edges, b_edges); counts.sum() equals the number of
    mask voxels.
    """
    if vol_a.shape != vol_b.shape:
        raise MetricInputError(f"shape mismatch: {vol_a.shape} vs {vol_b.shape}")
    if bins < 2:
        raise MetricInputError("bins must be >= 2")
    if mask is None:
        mask = np.ones(vol_a.shape, dtype=bool)
    else:
        mask = _as_bool(mask)
        if mask.shape != vol_a.shape:
            raise MetricInputError("mask shape mismatch")
    if not mask.any():
        raise MetricInputError("empty mask")
    a = np.asarray(vol_a.values if hasattr(vol_a, "values") else vol_a)[mask]
    b = np.asarray(vol_b.values if hasattr(vol_b, "values") else vol_b)[mask]
    counts, a_edges, b_edges = np.histogram2d(a.astype(np.float64), b.astype(np.float64), bins=bins)
    return counts, a_edges, b_edges


@dataclass
class RegionMetrics:
    """Per-sample, per-region scores. hausdorff_mm is None when undefined
    (an empty surface on either side)."""

    sample_id: str
    region: str
    dice: float
    hausdorff_mm: float | None


def write_metrics_csv(rows, path):
    """One row per (sample id, region); undefined HD written as 'undefined'."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["sample_id", "region", "dice", "hausdorff_mm"])
        for r in rows:
            hd = "undefined" if r.hausdorff_mm is None else repr(float(r.hausdorff_mm))
            writer.writerow([r.sample_id, r.region, repr(float(r.dice)), hd])


def write_histogram_csv(counts, path):
    np.savetxt(path, counts, fmt="%d", delimiter=",")


def aggregate_region_metrics(rows):
    """Mean and population std per region; undefined HDs are excluded and
    counted. Returns {region: {dice_mean, dice_std, hd_mean, hd_std,
    hd_defined, n}}."""
    out = {}
    for region in REGION_NAMES:
        sel = [r for r in rows if r.region == region]
        dices = np.array([r.dice for r in sel], dtype=np.float64)
        hds = np.array([r.hausdorff_mm for r in sel if r.hausdorff_mm is not None],
                       dtype=np.float64)
        out[region] = {
            "n": len(sel),
            "dice_mean": float(dices.mean()) if dices.size else math.nan,
            "dice_std": float(dices.std()) if dices.size else math.nan,
            "hd_mean": float(hds.mean()) if hds.size else math.nan,
            "hd_std": float(hds.std()) if hds.size else math.nan,
            "hd_defined": int(hds.size),
        }
    return out
