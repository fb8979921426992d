"""MMV container: one multi-modal sample per file.

Layout (little-endian):
    magic "MMV1" | u32 modality count (must be 4) | u32 D, H, W
    | f32 spacing x3 | 4 modality payloads of D*H*W f32
    | label payload of D*H*W u8 | u32 CRC32 of all preceding bytes
"""

import struct
import zlib
from pathlib import Path

import numpy as np

from .volume import Volume, MultiModalSample

MAGIC = b"MMV1"
MODALITY_COUNT = 4


class MmvError(IOError):
    """Base error for MMV parsing/writing."""


class MmvBadMagic(MmvError):
    pass


class MmvTruncated(MmvError):
    pass


class MmvUnsupportedModalityCount(MmvError):
    pass


class MmvShapeMismatch(MmvError):
    pass


class MmvChecksumMismatch(MmvError):
    pass


def write_mmv(sample: MultiModalSample, path):
    """Serialize a sample; read_mmv(write_mmv(s)) is bit-identical on the payloads.

    The sample id is not stored; name files `<id>.mmv` so read_mmv recovers it
    from the stem.
    """
    d, h, w = sample.shape
    parts = [MAGIC, struct.pack("<4I", MODALITY_COUNT, d, h, w),
             struct.pack("<3f", *sample.spacing)]
    for vol in sample.modalities:
        parts.append(np.ascontiguousarray(vol.values, dtype="<f4").tobytes())
    parts.append(np.ascontiguousarray(sample.label.values, dtype=np.uint8).tobytes())
    body = b"".join(parts)
    Path(path).write_bytes(body + struct.pack("<I", zlib.crc32(body)))


def read_mmv(path) -> MultiModalSample:
    path = Path(path)
    blob = path.read_bytes()
    if len(blob) < 4 or blob[:4] != MAGIC:
        raise MmvBadMagic(f"{path}: bad magic {blob[:4]!r}, expected {MAGIC!r}")
    header_len = 4 + 16 + 12
    if len(blob) < header_len + 4:
        raise MmvTruncated(f"{path}: file shorter than header")
    count, d, h, w = struct.unpack_from("<4I", blob, 4)
    if count != MODALITY_COUNT:
        raise MmvUnsupportedModalityCount(
            f"{path}: unsupported modality count {count}, expected {MODALITY_COUNT}"
        )
    if min(d, h, w) < 1:
        raise MmvShapeMismatch(f"{path}: non-positive shape ({d}, {h}, {w})")
    spacing = struct.unpack_from("<3f", blob, 20)
    nvox = d * h * w
    body_len = header_len + MODALITY_COUNT * nvox * 4 + nvox
    if len(blob) != body_len + 4:
        raise MmvTruncated(
            f"{path}: expected {body_len + 4} bytes for shape ({d}, {h}, {w}), got {len(blob)}"
        )
    (stored_crc,) = struct.unpack_from("<I", blob, body_len)
    if zlib.crc32(blob[:body_len]) != stored_crc:
        raise MmvChecksumMismatch(f"{path}: CRC32 mismatch")

    offset = header_len
    modalities = []
    for _ in range(MODALITY_COUNT):
        vals = np.frombuffer(blob, dtype="<f4", count=nvox, offset=offset).reshape(d, h, w)
        modalities.append(Volume(vals.copy(), spacing))
        offset += nvox * 4
    label = np.frombuffer(blob, dtype=np.uint8, count=nvox, offset=offset).reshape(d, h, w)
    return MultiModalSample(modalities, Volume(label.copy(), spacing), id=path.stem)
