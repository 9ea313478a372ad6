"""최소 NIfTI-1 단일 파일(.nii, 비압축) 읽기/쓰기.

지원 범위를 먼저 헤더에서 직접 검사한 뒤 (magic, datatype, 크기) 실제 디코딩은
nibabel 에 맡긴다. 방향(orientation) 정보는 무시하고 저장된 축 순서 그대로 쓴다.
"""

import struct
from pathlib import Path
from typing import Any

import nibabel as nib
import numpy as np
from nibabel.filebasedimages import ImageFileError
from nibabel.spatialimages import HeaderDataError

from modules.volume_io.exceptions import (
    BadMagicError,
    TruncatedDataError,
    UnsupportedDatatypeError,
    VolumeFormatError,
)

HEADER_SIZE = 348
NIFTI_MAGIC = b"n+1\x00"
# datatype code -> bytes per voxel (uint8, int16, float32)
SUPPORTED_DATATYPES = {2: 1, 4: 2, 16: 4}


def _endianness(blob: bytes) -> str:
    for prefix in ("<", ">"):
        if struct.unpack_from(f"{prefix}i", blob, 0)[0] == HEADER_SIZE:
            return prefix
    raise VolumeFormatError("sizeof_hdr is not 348")


def inspect_header(blob: bytes) -> dict[str, Any]:
    """nibabel 로 넘기기 전 지원 범위 검사. dims/datatype/vox_offset 반환."""
    if len(blob) < HEADER_SIZE:
        raise TruncatedDataError(
            f"file has {len(blob)} bytes, NIfTI-1 header needs {HEADER_SIZE}"
        )
    magic = blob[344:348]
    if magic != NIFTI_MAGIC:
        raise BadMagicError(f"bad NIfTI magic {magic!r}")
    order = _endianness(blob)
    dims = struct.unpack_from(f"{order}8h", blob, 40)
    datatype = struct.unpack_from(f"{order}h", blob, 70)[0]
    vox_offset = int(struct.unpack_from(f"{order}f", blob, 108)[0])
    if datatype not in SUPPORTED_DATATYPES:
        raise UnsupportedDatatypeError(f"unsupported datatype {datatype}")
    ndim = dims[0]
    if not 3 <= ndim <= 7 or any(d != 1 for d in dims[4 : ndim + 1]):
        raise VolumeFormatError(f"expected a 3D volume, got dim={dims}")
    shape = tuple(int(d) for d in dims[1:4])
    if any(d < 1 for d in shape):
        raise VolumeFormatError(f"invalid dims {dims}")
    expected = int(np.prod(shape)) * SUPPORTED_DATATYPES[datatype]
    if len(blob) < vox_offset + expected:
        raise TruncatedDataError(
            f"expected {expected} voxel bytes at offset {vox_offset}, "
            f"file has {len(blob)} bytes"
        )
    return {"shape": shape, "datatype": datatype, "vox_offset": vox_offset}


def load_nifti(path: str | Path) -> tuple[np.ndarray, dict[str, Any]]:
    """(float64 배열, 헤더 정보). scl_slope/scl_inter 는 nibabel 이 적용."""
    blob = Path(path).read_bytes()
    info = inspect_header(blob)
    try:
        image = nib.Nifti1Image.from_bytes(blob)
        data = np.asarray(image.get_fdata(dtype=np.float64))
    except (ValueError, ImageFileError, HeaderDataError) as e:
        raise VolumeFormatError(f"{path}: {e}") from e
    data = data.reshape(data.shape[:3])
    slope, inter = image.header.get_slope_inter()
    info["scl_slope"] = 1.0 if slope is None else float(slope)
    info["scl_inter"] = 0.0 if inter is None else float(inter)
    return data, info


def save_nifti(path: str | Path, array: Any) -> Path:
    """float32 NIfTI-1 단일 파일로 저장 (identity affine)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    data = np.asarray(array, dtype=np.float32)
    nib.save(nib.Nifti1Image(data, affine=np.eye(4)), str(path))
    return path
