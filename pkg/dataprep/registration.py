"""모션 스캔을 clean 스캔에 맞추는 2D 정수 평행이동 정합."""

import dataclasses
import logging

import numpy as np
from scipy.ndimage import shift as nd_shift

from dataprep.exceptions import PairingError
from dataprep.schemas import ImageSlice

logger = logging.getLogger("dataprep")

DEFAULT_MAX_SHIFT = 10
MIN_OVERLAP = 0.25
TIE_TOLERANCE = 1e-9


def _overlap(
    moving: np.ndarray, fixed: np.ndarray, dy: int, dx: int
) -> tuple[np.ndarray, np.ndarray]:
    """fixed[y, x] 와 moving[y - dy, x - dx] 가 겹치는 영역"""
    h, w = fixed.shape
    fy = slice(max(0, dy), min(h, h + dy))
    fx = slice(max(0, dx), min(w, w + dx))
    my = slice(max(0, -dy), min(h, h - dy))
    mx = slice(max(0, -dx), min(w, w - dx))
    return moving[my, mx], fixed[fy, fx]


def ncc(a: np.ndarray, b: np.ndarray) -> float:
    """zero-mean normalized cross-correlation. 한쪽이 상수면 0."""
    a = a - a.mean()
    b = b - b.mean()
    denom = np.sqrt(np.sum(a * a) * np.sum(b * b))
    if denom == 0.0:
        return 0.0
    return float(np.sum(a * b) / denom)


def ncc_at(
    moving: np.ndarray, fixed: np.ndarray, dy: int, dx: int
) -> float | None:
    """(dy, dx) 에서의 NCC. 겹침이 25% 미만이면 None (후보 제외)."""
    h, w = fixed.shape
    if (h - abs(dy)) * (w - abs(dx)) < MIN_OVERLAP * h * w:
        return None
    if abs(dy) >= h or abs(dx) >= w:
        return None
    m, f = _overlap(moving, fixed, dy, dx)
    return ncc(m, f)


def find_shift(
    moving: np.ndarray, fixed: np.ndarray, max_shift: int
) -> tuple[tuple[int, int], float]:
    """[-max_shift, max_shift]² 전수 탐색. 동점은 가장 작은 ‖shift‖, 그다음 사전순."""
    if moving.shape != fixed.shape:
        raise PairingError(
            f"registration needs equal shapes ({moving.shape} vs "
            f"{fixed.shape})"
        )
    if max_shift < 0:
        raise ValueError(f"max_shift must be >= 0 (got {max_shift})")
    scores: list[tuple[float, int, int]] = []
    for dy in range(-max_shift, max_shift + 1):
        for dx in range(-max_shift, max_shift + 1):
            score = ncc_at(moving, fixed, dy, dx)
            if score is not None:
                scores.append((score, dy, dx))
    best = max(score for score, _, _ in scores)
    _, dy, dx = min(
        (
            (dy * dy + dx * dx, dy, dx)
            for score, dy, dx in scores
            if score >= best - TIE_TOLERANCE
        )
    )
    return (dy, dx), best


def apply_shift(image: np.ndarray, dy: int, dx: int) -> np.ndarray:
    """정수 평행이동, 밖에서 들어오는 영역은 0"""
    return nd_shift(image, (dy, dx), order=0, mode="constant", cval=0.0)


def register_rigid(
    moving: ImageSlice,
    fixed: ImageSlice,
    max_shift: int = DEFAULT_MAX_SHIFT,
) -> tuple[ImageSlice, tuple[int, int]]:
    """moving 을 fixed 에 맞게 옮긴 슬라이스와 적용한 (dy, dx)"""
    (dy, dx), score = find_shift(moving.pixels, fixed.pixels, max_shift)
    if (dy, dx) != (0, 0):
        logger.debug(
            "registered %s onto %s: shift=(%d, %d) ncc=%.4f",
            moving.key,
            fixed.scan_label,
            dy,
            dx,
            score,
        )
    shifted = apply_shift(moving.pixels, dy, dx)
    return dataclasses.replace(moving, pixels=shifted), (dy, dx)
