"""볼륨 로딩/저장, plane 별 슬라이스 추출, min-max 정규화.

축 규약: 저장된 축 순서 (X, Y, Z) 를 그대로 쓴다. orientation 메타데이터는 무시.
"""

import dataclasses
import logging
from pathlib import Path
from typing import Any, TypeVar

import numpy as np

from dataprep.exceptions import DataPrepError
from dataprep.schemas import PLANE_AXIS, ImageSlice, PatientVolume
from dataprep.transforms import resample_area
from modules.volume_io import is_raw, load_nifti, load_raw, save_raw

logger = logging.getLogger("dataprep")

DEFAULT_SLICE_COUNT = 100

N = TypeVar("N", PatientVolume, ImageSlice, np.ndarray)


def load_volume(
    path: str | Path,
    patient_id: str | None = None,
    scan_label: str | None = None,
) -> PatientVolume:
    """raw 포맷(magic 으로 판별) 또는 NIfTI-1 을 읽는다.

    patient_id / scan_label 을 주지 않으면 raw meta 값, 그것도 없으면
    파일 이름(stem) 과 "clean" 을 쓴다.
    """
    path = Path(path)
    if is_raw(path):
        data, meta = load_raw(path)
        norm_min = meta.get("norm_min")
        norm_max = meta.get("norm_max")
    else:
        data, meta = load_nifti(path)
        norm_min = norm_max = None
    volume = PatientVolume(
        patient_id=patient_id or meta.get("patient_id") or path.stem,
        scan_label=scan_label or meta.get("scan_label") or "clean",
        voxels=np.asarray(data, dtype=np.float64),
        source_path=str(path),
        norm_min=norm_min,
        norm_max=norm_max,
        meta=dict(meta),
    )
    logger.debug(
        "loaded %s/%s %s from %s",
        volume.patient_id,
        volume.scan_label,
        volume.shape,
        path,
    )
    return volume


def save_volume(
    volume: PatientVolume,
    path: str | Path,
    meta: dict[str, Any] | None = None,
) -> Path:
    """raw 포맷으로 저장. 환자/scan/정규화 기록을 meta 에 함께 남긴다."""
    header = dict(meta or {})
    header.update(
        patient_id=volume.patient_id, scan_label=volume.scan_label
    )
    if volume.norm_min is not None:
        header.update(norm_min=volume.norm_min, norm_max=volume.norm_max)
    return save_raw(path, volume.voxels, header)


def central_indices(depth: int, k: int | None) -> range:
    """가운데 k 개 인덱스. k 가 depth 보다 크거나 None 이면 전체."""
    if k is None or k >= depth:
        return range(depth)
    if k < 0:
        raise DataPrepError(f"central(k) needs k >= 0 (got {k})")
    start = (depth - k) // 2
    return range(start, start + k)


def extract_slices(
    vol: PatientVolume,
    plane: str,
    k: int | None = DEFAULT_SLICE_COUNT,
    size: tuple[int, int] | None = None,
) -> list[ImageSlice]:
    """sagittal 은 X, coronal 은 Y, transversal 은 Z 를 고정한 2D 슬라이스.

    size 를 주면 area averaging 으로 리샘플한다.
    """
    if plane not in PLANE_AXIS:
        raise DataPrepError(
            f"unknown plane: {plane} (one of {tuple(PLANE_AXIS)})"
        )
    axis = PLANE_AXIS[plane]
    slices = []
    for index in central_indices(vol.voxels.shape[axis], k):
        pixels = np.take(vol.voxels, index, axis=axis)
        if size is not None:
            pixels = resample_area(pixels, size)
        slices.append(
            ImageSlice(
                pixels=np.array(pixels, dtype=np.float64),
                plane=plane,
                patient_id=vol.patient_id,
                scan_label=vol.scan_label,
                index=index,
                norm_min=vol.norm_min,
                norm_max=vol.norm_max,
            )
        )
    return slices


def _min_max(values: np.ndarray) -> tuple[np.ndarray, float, float]:
    low, high = float(np.min(values)), float(np.max(values))
    if not (np.isfinite(low) and np.isfinite(high)):
        raise DataPrepError("normalize needs finite values")
    if high == low:
        return np.zeros_like(values, dtype=np.float64), low, high
    return (values - low) / (high - low), low, high


def _lerp(a: float, b: float, w: float) -> float:
    # w=0, w=1 에서 a, b 를 정확히 돌려준다
    return a * (1.0 - w) + b * w


def normalize(item: N) -> N:
    """per-volume min-max 로 [0, 1] 스케일. 상수 입력은 전부 0.

    이미 정규화된 값이면 기존 기록에 합성해서 원래 intensity 범위가 유지된다.
    """
    if isinstance(item, np.ndarray):
        return _min_max(np.asarray(item, dtype=np.float64))[0]
    values = item.voxels if isinstance(item, PatientVolume) else item.pixels
    scaled, low, high = _min_max(np.asarray(values, dtype=np.float64))
    if item.norm_min is not None and item.norm_max is not None:
        record = (item.norm_min, item.norm_max)
        low, high = _lerp(*record, low), _lerp(*record, high)
    if isinstance(item, PatientVolume):
        return dataclasses.replace(
            item, voxels=scaled, norm_min=low, norm_max=high
        )
    return dataclasses.replace(
        item, pixels=scaled, norm_min=low, norm_max=high
    )


def stack_slices(slices: list[ImageSlice]) -> np.ndarray:
    """extract_slices(k=None) 의 역연산 (plane 축으로 다시 쌓기)"""
    if not slices:
        raise DataPrepError("no slices to stack")
    planes = {s.plane for s in slices}
    if len(planes) != 1:
        raise DataPrepError(f"slices come from several planes: {planes}")
    ordered = sorted(slices, key=lambda s: s.index)
    return np.stack(
        [s.pixels for s in ordered], axis=PLANE_AXIS[planes.pop()]
    )
