"""Synthetic correlated multi-modal volume generator.

Stands in for real multi-modal MR data at desk scale. Each sample has a
brain-like nonzero support, three concentric ellipsoidal tumor regions
(edema=2 around necrotic=1 around enhancing=4, so ET <= TC <= WT), a
smooth base intensity field for modality 1, and the remaining modalities
tied to their pair source inside the whole-tumor region by a planted
monotone quadratic transfer function. Generation is a pure function of
(seed, shape, spec).
"""

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import gaussian_filter

from .volume import DataError, Volume, MultiModalSample, region_masks


class GenerationError(DataError):
    """Requested sample cannot be generated (e.g. shape too small)."""


MIN_DIM = 16

# per-label additive offsets on the modality-1 base field
_REGION_OFFSETS = {2: 0.12, 1: 0.75, 4: 1.15}


@dataclass(frozen=True)
class CorrelationSpec:
    """Planted cross-modality structure.

    pairs: (source, target) 1-based modality indices; each target modality
    is an exact quadratic function of its source inside WT when noise_sd=0.
    coefficients: per-pair (a, b, c) for target = a*x^2 + b*x + c; must be
    monotone over the source intensity range.
    """

    pairs: tuple = ((1, 3), (1, 4), (4, 2))
    coefficients: tuple = ((0.3, 0.7, 0.6), (-0.1, 1.4, 0.3), (0.2, 0.5, 0.8))
    noise_sd: float = 0.3

    def __post_init__(self):
        if len(self.pairs) != len(self.coefficients):
            raise DataError("one coefficient triple required per pair")
        for i, j in self.pairs:
            if i == j or not (1 <= i <= 4 and 1 <= j <= 4):
                raise DataError(f"invalid modality pair ({i}, {j})")
        targets = [j for _, j in self.pairs]
        if len(set(targets)) != len(targets):
            raise DataError("each modality may be the target of at most one pair")
        if self.noise_sd < 0:
            raise DataError("noise_sd must be >= 0")

    def with_noise(self, noise_sd):
        return CorrelationSpec(self.pairs, self.coefficients, noise_sd)


def _ellipsoid_mask(shape, center, semi_axes):
    grids = np.meshgrid(*[np.arange(s, dtype=np.float64) for s in shape], indexing="ij")
    q = sum(((g - c) / a) ** 2 for g, c, a in zip(grids, center, semi_axes))
    return q <= 1.0


def _smooth_field(rng, shape, sigma, lo, hi):
    """Min-max scaled Gaussian-smoothed noise in [lo, hi]."""
    f = gaussian_filter(rng.standard_normal(shape), sigma=sigma)
    f = (f - f.min()) / (f.max() - f.min() + 1e-12)
    return lo + (hi - lo) * f


# confounder bumps: bright smooth blobs independent per modality, so a
# single modality's brightness alone cannot identify tumor tissue
_BUMP_COUNT = (1, 2)
_BUMP_AMP = (0.3, 0.7)
_BUMP_SIGMA = (0.05, 0.10)


def _bump_field(rng, shape):
    dims = np.asarray(shape, dtype=np.float64)
    grids = np.meshgrid(*[np.arange(s, dtype=np.float64) for s in shape], indexing="ij")
    field = np.zeros(shape)
    for _ in range(int(rng.integers(_BUMP_COUNT[0], _BUMP_COUNT[1] + 1))):
        center = rng.uniform(0.2, 0.8, size=3) * dims
        sig = rng.uniform(*_BUMP_SIGMA) * dims
        amp = rng.uniform(*_BUMP_AMP)
        field += amp * np.exp(-0.5 * sum(((g - c) / s) ** 2
                                         for g, c, s in zip(grids, center, sig)))
    return field


def generate_synthetic_sample(seed, shape=(32, 32, 32), spec=None, spacing=(1.0, 1.0, 1.0)):
    """Generate one deterministic MultiModalSample.

    Args:
        seed: any integer; fixed (seed, shape, spec) gives bit-identical output.
        shape: (D, H, W), each >= 16.
        spec: CorrelationSpec; defaults to the standard three-pair spec.

    Returns:
        MultiModalSample with float32 modalities and a uint8 label volume.
    """
    spec = spec or CorrelationSpec()
    shape = tuple(int(s) for s in shape)
    if len(shape) != 3 or any(s < MIN_DIM for s in shape):
        raise GenerationError(
            f"shape {shape} too small to contain three nested regions (min {MIN_DIM} per axis)"
        )
    rng = np.random.default_rng(seed)
    dims = np.asarray(shape, dtype=np.float64)
    center = dims / 2.0

    brain = _ellipsoid_mask(shape, center, dims * rng.uniform(0.42, 0.46, size=3))

    # concentric tumor ellipsoids; shared center keeps nesting guaranteed
    t_center = center + rng.uniform(-0.10, 0.10, size=3) * dims
    outer = np.maximum(rng.uniform(0.15, 0.20, size=3) * dims, 3.4)
    middle = np.maximum(rng.uniform(0.62, 0.78, size=3) * outer, 2.6)
    inner = np.maximum(rng.uniform(0.52, 0.66, size=3) * middle, 1.6)

    label = np.zeros(shape, dtype=np.uint8)
    label[_ellipsoid_mask(shape, t_center, outer)] = 2
    label[_ellipsoid_mask(shape, t_center, middle)] = 1
    label[_ellipsoid_mask(shape, t_center, inner)] = 4

    wt = label > 0
    if not (label == 4).any():
        raise GenerationError(f"shape {shape} produced an empty enhancing region")

    sigma = np.maximum(dims / 10.0, 1.5)
    offsets = np.zeros(shape, dtype=np.float64)
    for lab, off in _REGION_OFFSETS.items():
        offsets[label == lab] = off

    volumes = {}
    base = _smooth_field(rng, shape, sigma, 0.4, 1.0) + _bump_field(rng, shape)
    volumes[1] = np.where(brain, base + offsets, 0.0).astype(np.float32)

    # independent background texture (with its own confounder bumps) for
    # every other modality
    textures = {m: _smooth_field(rng, shape, sigma, 0.4, 1.0) + _bump_field(rng, shape)
                for m in (2, 3, 4)}
    targets = {j for _, j in spec.pairs}
    for m in (2, 3, 4):
        if m not in targets:
            volumes[m] = np.where(brain, textures[m] + offsets, 0.0).astype(np.float32)

    for (src, dst), (a, b, c) in zip(spec.pairs, spec.coefficients):
        if src not in volumes:
            raise DataError(
                f"pair source modality {src} must be generated before target {dst}; "
                "reorder spec.pairs"
            )
        x = volumes[src].astype(np.float64)
        y = a * x * x + b * x + c
        if spec.noise_sd > 0:
            y = y + spec.noise_sd * rng.standard_normal(shape)
        vol = np.where(brain, textures[dst], 0.0)
        vol[wt] = y[wt]
        volumes[dst] = vol.astype(np.float32)

    sample = MultiModalSample(
        modalities=[Volume(volumes[m], spacing) for m in (1, 2, 3, 4)],
        label=Volume(label, spacing),
        id=f"synth-{seed:08d}",
    )
    # derived regions must nest by construction; cheap sanity check
    wt_m, tc_m, et_m = region_masks(sample.label)
    assert (et_m.values <= tc_m.values).all() and (tc_m.values <= wt_m.values).all()
    return sample
