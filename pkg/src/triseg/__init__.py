"""Tri-attention multi-encoder volumetric segmentation at desk scale."""

from .volume import (Volume, MultiModalSample, DataError, region_masks,
                     normalize_intensity, crop_resize,
                     MODALITY_NAMES, REGION_NAMES, LABEL_VALUES)
from .synth import CorrelationSpec, GenerationError, generate_synthetic_sample
from .mmv import read_mmv, write_mmv
from .nifti import read_nifti

__version__ = "0.1.0"
