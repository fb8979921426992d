"""Minimal single-file NIfTI-1 reader (.nii, little-endian, 3D).

Supports datatypes uint8/int16/float32 and applies scl_slope/scl_inter
when slope is nonzero. Two-file ("ni1") form, big-endian files, gzip and
extensions are out of scope.
"""

import struct
from pathlib import Path

import numpy as np

from .volume import Volume

HEADER_SIZE = 348
MAGIC_SINGLE = b"n+1\x00"
MAGIC_PAIR = b"ni1\x00"

_DTYPES = {2: np.uint8, 4: "<i2", 16: "<f4"}


class NiftiError(IOError):
    pass


class NiftiBadHeader(NiftiError):
    pass


class NiftiUnsupportedFormat(NiftiError):
    pass


class NiftiUnsupportedDatatype(NiftiError):
    pass


class NiftiUnsupportedDimensionality(NiftiError):
    pass


class NiftiTruncated(NiftiError):
    pass


def read_nifti(path) -> Volume:
    path = Path(path)
    blob = path.read_bytes()
    if len(blob) < HEADER_SIZE:
        raise NiftiTruncated(f"{path}: shorter than the {HEADER_SIZE}-byte header")

    (sizeof_hdr,) = struct.unpack_from("<i", blob, 0)
    if sizeof_hdr != HEADER_SIZE:
        raise NiftiBadHeader(
            f"{path}: sizeof_hdr = {sizeof_hdr}, expected {HEADER_SIZE} "
            "(big-endian files are not supported)"
        )
    magic = blob[344:348]
    if magic == MAGIC_PAIR:
        raise NiftiUnsupportedFormat(f"{path}: two-file (hdr/img) form is not supported")
    if magic != MAGIC_SINGLE:
        raise NiftiUnsupportedFormat(f"{path}: bad magic {magic!r}")

    dim = struct.unpack_from("<8h", blob, 40)
    if dim[0] != 3:
        raise NiftiUnsupportedDimensionality(f"{path}: dim[0] = {dim[0]}, only 3D supported")
    nx, ny, nz = dim[1], dim[2], dim[3]
    if min(nx, ny, nz) < 1:
        raise NiftiBadHeader(f"{path}: non-positive dims {(nx, ny, nz)}")

    (datatype,) = struct.unpack_from("<h", blob, 70)
    if datatype not in _DTYPES:
        raise NiftiUnsupportedDatatype(f"{path}: datatype code {datatype} not supported")

    pixdim = struct.unpack_from("<8f", blob, 76)
    (vox_offset,) = struct.unpack_from("<f", blob, 108)
    scl_slope, scl_inter = struct.unpack_from("<2f", blob, 112)

    start = int(vox_offset) if vox_offset >= HEADER_SIZE else HEADER_SIZE
    itemsize = np.dtype(_DTYPES[datatype]).itemsize
    nvox = nx * ny * nz
    if len(blob) < start + nvox * itemsize:
        raise NiftiTruncated(f"{path}: data payload shorter than {nvox} voxels")

    # on-disk order is x-fastest; transpose to (dim1, dim2, dim3)
    raw = np.frombuffer(blob, dtype=_DTYPES[datatype], count=nvox, offset=start)
    values = raw.reshape(nz, ny, nx).T.astype(np.float32)
    if scl_slope != 0.0:
        values = (values * scl_slope + scl_inter).astype(np.float32)
    return Volume(values, spacing=(pixdim[1], pixdim[2], pixdim[3]))
