import struct

import numpy as np
import pytest

_DTYPES = {2: np.uint8, 4: np.int16, 16: np.float32}


def build_nifti(
    data: np.ndarray,
    datatype: int = 16,
    magic: bytes = b"n+1\x00",
    slope: float = 0.0,
    inter: float = 0.0,
) -> bytes:
    """348 byte 헤더 + 4 byte extension + Fortran 순서 voxel 데이터"""
    header = bytearray(348)
    dtype = np.dtype(_DTYPES.get(datatype, np.float32))
    struct.pack_into("<i", header, 0, 348)
    struct.pack_into("<8h", header, 40, 3, *data.shape, 1, 1, 1, 1)
    struct.pack_into("<h", header, 70, datatype)
    struct.pack_into("<h", header, 72, dtype.itemsize * 8)
    struct.pack_into("<8f", header, 76, *([1.0] * 8))
    struct.pack_into("<f", header, 108, 352.0)
    struct.pack_into("<f", header, 112, slope)
    struct.pack_into("<f", header, 116, inter)
    header[344:348] = magic
    voxels = np.asarray(data, dtype=dtype.newbyteorder("<"))
    return bytes(header) + b"\x00" * 4 + voxels.tobytes(order="F")


@pytest.fixture
def nifti_file(tmp_path):
    def _write(data, name="vol.nii", **kwargs):
        path = tmp_path / name
        path.write_bytes(build_nifti(np.asarray(data), **kwargs))
        return path

    return _write
