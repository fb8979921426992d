"""Core volume data model and preprocessing.

A Volume is a single 3D scalar grid: one MR modality (float32 intensities)
or one label map (uint8, BraTS-style values {0, 1, 2, 4}). A
MultiModalSample bundles the four co-registered modalities with the label
map. Evaluation regions (WT/TC/ET) are always derived from the label map,
never stored.
"""

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

MODALITY_NAMES = ("t1", "flair", "t1c", "t2")  # index 1..4 in configs
LABEL_VALUES = (0, 1, 2, 4)
REGION_NAMES = ("wt", "tc", "et")

# label membership per region: WT = all tumor tissue, TC = core, ET = enhancing
_REGION_LABELS = {"wt": (1, 2, 4), "tc": (1, 4), "et": (4,)}


class DataError(ValueError):
    """Invalid volume content or incompatible volume combination."""


@dataclass
class Volume:
    """One 3D scalar grid with voxel spacing in mm.

    values: float32 for intensity volumes, uint8 for label volumes,
    shape (D, H, W).
    """

    values: np.ndarray
    spacing: tuple = (1.0, 1.0, 1.0)

    def __post_init__(self):
        self.values = np.asarray(self.values)
        if self.values.ndim != 3:
            raise DataError(f"volume must be 3D, got ndim={self.values.ndim}")
        if any(s < 1 for s in self.values.shape):
            raise DataError(f"volume shape must be >= 1 per axis, got {self.values.shape}")
        self.spacing = tuple(float(s) for s in self.spacing)
        if len(self.spacing) != 3 or any(s <= 0 for s in self.spacing):
            raise DataError(f"spacing must be 3 positive reals, got {self.spacing}")

    @property
    def shape(self):
        return self.values.shape

    def is_label(self):
        return self.values.dtype == np.uint8


@dataclass
class MultiModalSample:
    """Four aligned modality volumes plus the label volume."""

    modalities: list  # [T1, FLAIR, T1c, T2]
    label: Volume
    id: str = ""

    def __post_init__(self):
        if len(self.modalities) != 4:
            raise DataError(f"expected 4 modalities, got {len(self.modalities)}")
        shapes = {v.shape for v in self.modalities} | {self.label.shape}
        if len(shapes) != 1:
            raise DataError(f"modalities and label must share one shape, got {shapes}")
        spacings = {v.spacing for v in self.modalities} | {self.label.spacing}
        if len(spacings) != 1:
            raise DataError(f"modalities and label must share one spacing, got {spacings}")
        validate_label_values(self.label.values)

    @property
    def shape(self):
        return self.label.shape

    @property
    def spacing(self):
        return self.label.spacing

    def modality(self, index):
        """Modality by 1-based index (1=T1, 2=FLAIR, 3=T1c, 4=T2)."""
        return self.modalities[index - 1]


def validate_label_values(values):
    bad = np.setdiff1d(np.unique(values), LABEL_VALUES)
    if bad.size:
        raise DataError(f"invalid label value {bad[0]} (allowed: {LABEL_VALUES})")


def region_masks(label: Volume):
    """Derive the three nested evaluation regions from a label volume.

    Returns (WT, TC, ET) as binary uint8 Volumes:
      WT = labels {1,2,4}, TC = {1,4}, ET = {4}, so ET <= TC <= WT voxelwise.
    """
    validate_label_values(label.values)
    out = []
    for name in REGION_NAMES:
        mask = np.isin(label.values, _REGION_LABELS[name]).astype(np.uint8)
        out.append(Volume(mask, label.spacing))
    return tuple(out)


def normalize_intensity(v: Volume) -> Volume:
    """Z-score an intensity volume over its nonzero support.

    Mean and population std are computed over nonzero voxels only; zero
    voxels (background/air) stay exactly 0. Constant nonzero support maps
    to all-zeros rather than raising.
    """
    mask = v.values != 0
    if not mask.any():
        raise DataError("cannot normalize an all-zero volume")
    vals = v.values[mask].astype(np.float64)
    mean = vals.mean()
    std = vals.std()  # population std: deterministic at tiny supports
    out = np.zeros(v.shape, dtype=np.float32)
    if std > 0:
        out[mask] = ((vals - mean) / std).astype(np.float32)
    return Volume(out, v.spacing)


def _tight_bbox(values):
    nz = np.nonzero(values)
    if nz[0].size == 0:
        raise DataError("cannot crop an empty (all-zero) volume")
    return tuple(slice(int(ix.min()), int(ix.max()) + 1) for ix in nz)


def crop_resize(v: Volume, target) -> Volume:
    """Crop to the tight nonzero bounding box, then resample to `target`.

    Intensities are trilinearly interpolated; labels use nearest-neighbour
    so the output value set stays within {0,1,2,4}. Output spacing is
    rescaled so the cropped physical extent is preserved.
    """
    target = tuple(int(t) for t in target)
    if len(target) != 3 or any(t < 1 for t in target):
        raise DataError(f"target shape must be 3 positive ints, got {target}")
    cropped = v.values[_tight_bbox(v.values)]
    src_shape = cropped.shape

    # pixel-center alignment: output voxel i samples input at (i+.5)*S/T-.5
    coords = np.meshgrid(
        *[(np.arange(t) + 0.5) * s / t - 0.5 for t, s in zip(target, src_shape)],
        indexing="ij",
    )
    order = 0 if v.is_label() else 1
    out = ndimage.map_coordinates(
        cropped.astype(np.float32 if order else cropped.dtype),
        np.stack([c.ravel() for c in coords]),
        order=order,
        mode="nearest",
    ).reshape(target)
    spacing = tuple(sp * s / t for sp, s, t in zip(v.spacing, src_shape, target))
    if v.is_label():
        return Volume(out.astype(np.uint8), spacing)
    return Volume(out.astype(np.float32), spacing)
