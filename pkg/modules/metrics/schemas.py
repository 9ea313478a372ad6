from dataclasses import dataclass
from functools import cached_property

import numpy as np

from common.models import SerializableMixin

NMSE_CONVENTIONS = ("energy", "variance")


@dataclass(frozen=True)
class MetricConfig(SerializableMixin):
    """SSIM/NMSE/PSNR 설정. 기본값은 정규화된 [0, 1] 슬라이스 기준."""

    window_size: int = 11
    window_sigma: float = 1.5
    k1: float = 0.01
    k2: float = 0.03
    data_range: float = 1.0
    # energy: ‖x - ref‖² / ‖ref‖², variance: ‖x - ref‖² / ‖ref - mean(ref)‖²
    nmse_convention: str = "energy"

    def __post_init__(self) -> None:
        if self.window_size < 1 or self.window_size % 2 == 0:
            raise ValueError(
                f"window_size must be a positive odd integer "
                f"(got {self.window_size})"
            )
        if self.window_sigma <= 0 or self.data_range <= 0:
            raise ValueError("window_sigma and data_range must be positive")
        if self.nmse_convention not in NMSE_CONVENTIONS:
            raise ValueError(
                f"nmse_convention must be one of {NMSE_CONVENTIONS}"
            )

    @property
    def c1(self) -> float:
        return (self.k1 * self.data_range) ** 2

    @property
    def c2(self) -> float:
        return (self.k2 * self.data_range) ** 2

    @cached_property
    def window(self) -> np.ndarray:
        """정규화된 2D Gaussian window (합 1)"""
        radius = self.window_size // 2
        coords = np.arange(-radius, radius + 1, dtype=np.float64)
        g = np.exp(-(coords**2) / (2.0 * self.window_sigma**2))
        g /= g.sum()
        return np.outer(g, g)
