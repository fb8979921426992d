"""Reader checked against fixture files laid out field-by-field from the
published NIfTI-1 header table (independent of the reader's own parsing)."""

import struct

import numpy as np
import pytest

from triseg.nifti import (NiftiBadHeader, NiftiTruncated, NiftiUnsupportedDatatype,
                          NiftiUnsupportedDimensionality, NiftiUnsupportedFormat,
                          read_nifti)

DT_UINT8, DT_INT16, DT_FLOAT32 = 2, 4, 16
BITPIX = {DT_UINT8: 8, DT_INT16: 16, DT_FLOAT32: 32}


def build_nii(path, data_xyz, datatype=DT_INT16, pixdim=(1.0, 1.0, 1.0),
              scl_slope=0.0, scl_inter=0.0, magic=b"n+1\x00", sizeof_hdr=348):
    """Write a single-file NIfTI-1 volume; data_xyz is indexed [x, y, z]."""
    nx, ny, nz = data_xyz.shape
    hdr = bytearray(352)
    struct.pack_into("<i", hdr, 0, sizeof_hdr)
    struct.pack_into("<8h", hdr, 40, 3, nx, ny, nz, 1, 1, 1, 1)
    struct.pack_into("<h", hdr, 70, datatype)
    struct.pack_into("<h", hdr, 72, BITPIX[datatype])
    struct.pack_into("<8f", hdr, 76, 0.0, *pixdim, 0.0, 0.0, 0.0, 0.0)
    struct.pack_into("<f", hdr, 108, 352.0)
    struct.pack_into("<2f", hdr, 112, scl_slope, scl_inter)
    hdr[344:348] = magic
    np_dtype = {DT_UINT8: np.uint8, DT_INT16: "<i2", DT_FLOAT32: "<f4"}[datatype]
    # disk order is x-fastest: transpose to (z, y, x) before flattening
    payload = np.ascontiguousarray(data_xyz.T.astype(np_dtype)).tobytes()
    path.write_bytes(bytes(hdr) + payload)


@pytest.fixture()
def grid():
    return np.fromfunction(lambda x, y, z: x + 10 * y + 100 * z, (4, 4, 4))


def test_reference_volume_field_by_field(tmp_path, grid):
    p = tmp_path / "ref.nii"
    build_nii(p, grid, datatype=DT_INT16, pixdim=(1.0, 2.0, 3.0))
    v = read_nifti(p)
    assert v.shape == (4, 4, 4)
    assert v.spacing == (1.0, 2.0, 3.0)
    assert v.values.dtype == np.float32
    np.testing.assert_array_equal(v.values, grid.astype(np.float32))


def test_zero_slope_passes_raw_values(tmp_path, grid):
    p = tmp_path / "raw.nii"
    build_nii(p, grid, scl_slope=0.0, scl_inter=100.0)
    np.testing.assert_array_equal(read_nifti(p).values, grid.astype(np.float32))


def test_slope_and_intercept_applied(tmp_path, grid):
    p = tmp_path / "scaled.nii"
    build_nii(p, grid, scl_slope=2.0, scl_inter=-1.0)
    np.testing.assert_allclose(read_nifti(p).values, grid * 2.0 - 1.0, rtol=1e-6)


def test_float32_payload(tmp_path):
    data = np.linspace(-1, 1, 27).reshape(3, 3, 3)
    p = tmp_path / "f32.nii"
    build_nii(p, data, datatype=DT_FLOAT32)
    np.testing.assert_array_equal(read_nifti(p).values, data.astype(np.float32))


def test_two_file_magic_rejected(tmp_path, grid):
    p = tmp_path / "pair.nii"
    build_nii(p, grid, magic=b"ni1\x00")
    with pytest.raises(NiftiUnsupportedFormat):
        read_nifti(p)


def test_bad_sizeof_hdr(tmp_path, grid):
    p = tmp_path / "bad.nii"
    build_nii(p, grid, sizeof_hdr=320)
    with pytest.raises(NiftiBadHeader):
        read_nifti(p)


def test_unsupported_datatype(tmp_path, grid):
    p = tmp_path / "dt.nii"
    build_nii(p, grid)
    blob = bytearray(p.read_bytes())
    struct.pack_into("<h", blob, 70, 64)  # float64: not supported
    p.write_bytes(bytes(blob))
    with pytest.raises(NiftiUnsupportedDatatype):
        read_nifti(p)


def test_non_3d_rejected(tmp_path, grid):
    p = tmp_path / "4d.nii"
    build_nii(p, grid)
    blob = bytearray(p.read_bytes())
    struct.pack_into("<h", blob, 40, 4)
    p.write_bytes(bytes(blob))
    with pytest.raises(NiftiUnsupportedDimensionality):
        read_nifti(p)


def test_truncated_payload(tmp_path, grid):
    p = tmp_path / "short.nii"
    build_nii(p, grid)
    blob = p.read_bytes()
    p.write_bytes(blob[:-40])
    with pytest.raises(NiftiTruncated):
        read_nifti(p)
