import math
from typing import Any

import numpy as np

from modules.metrics.exceptions import MetricShapeError, ZeroReferenceError
from modules.metrics.schemas import MetricConfig
from modules.metrics.ssim import DEFAULT_CONFIG, pixels_of


def _pair(x: Any, ref: Any) -> tuple[np.ndarray, np.ndarray]:
    xa, ra = pixels_of(x), pixels_of(ref)
    if xa.shape != ra.shape:
        raise MetricShapeError(f"shape mismatch: {xa.shape} vs {ra.shape}")
    return xa, ra


def mse(x: Any, ref: Any) -> float:
    xa, ra = _pair(x, ref)
    return float(np.mean((xa - ra) ** 2))


def nmse(x: Any, ref: Any, convention: str = "energy") -> float:
    """‖x - ref‖² / ‖ref‖² (energy) 또는 / ‖ref - mean(ref)‖² (variance)"""
    xa, ra = _pair(x, ref)
    if convention == "energy":
        denominator = float(np.sum(ra**2))
    elif convention == "variance":
        denominator = float(np.sum((ra - ra.mean()) ** 2))
    else:
        raise ValueError(f"unknown NMSE convention: {convention}")
    if denominator == 0.0:
        raise ZeroReferenceError(f"reference has zero {convention}")
    return float(np.sum((xa - ra) ** 2)) / denominator


def psnr(x: Any, ref: Any, cfg: MetricConfig = DEFAULT_CONFIG) -> float:
    """10·log10(data_range² / MSE) dB. MSE 가 0 이면 math.inf."""
    error = mse(x, ref)
    if error == 0.0:
        return math.inf
    return 10.0 * math.log10(cfg.data_range**2 / error)
