import math
from dataclasses import dataclass

import numpy as np

from common.models import SerializableMixin

# 프리셋은 500 step 스케줄 기준으로 정의돼 있다
PRESET_SCALE = 500


@dataclass(frozen=True)
class ScheduleConfig(SerializableMixin):
    T: int = 500
    beta_start: float = 1e-4
    beta_end: float = 0.02
    kind: str = "linear"


@dataclass(frozen=True, eq=False)
class VarianceSchedule:
    """per-timestep 계수. 배열 길이는 T+1 이고 index 0 은 t=0 (잡음 없음).

    beta[0] = 0, alpha[0] = alpha_bar[0] = 1, sigma[0] = 0 으로 두어서
    alpha_bar[t] 를 1-indexed 표기 그대로 쓸 수 있다.
    """

    config: ScheduleConfig
    beta: np.ndarray
    alpha: np.ndarray
    alpha_bar: np.ndarray
    sigma: np.ndarray

    @property
    def T(self) -> int:
        return self.config.T


@dataclass(frozen=True)
class SimulationParams(SerializableMixin):
    """partial step n 과 반복 횟수. 마지막 reverse step 은 항상 z = 0."""

    n: int
    iterations: int = 1
    deterministic_final_step: bool = True
    name: str = ""

    def __post_init__(self) -> None:
        if self.n < 0:
            raise ValueError(f"n must be >= 0 (got {self.n})")
        if self.iterations < 1:
            raise ValueError(
                f"iterations must be >= 1 (got {self.iterations})"
            )
        if not self.deterministic_final_step:
            raise ValueError("the final reverse step is always noise-free")

    def rescaled(self, T: int) -> "SimulationParams":
        """500 step 기준 n 을 T step 스케줄로 비례 환산 (반올림, [0, T-1])"""
        if T == PRESET_SCALE:
            return self
        n = int(math.floor(self.n * T / PRESET_SCALE + 0.5))
        return SimulationParams(
            n=min(max(n, 0), max(T - 1, 0)),
            iterations=self.iterations,
            name=self.name,
        )


PRESETS: dict[str, SimulationParams] = {
    "T": SimulationParams(n=120, iterations=4, name="T"),
    "Z": SimulationParams(n=170, iterations=5, name="Z"),
    "H": SimulationParams(n=280, iterations=2, name="H"),
    "J": SimulationParams(n=330, iterations=1, name="J"),
}

PRESET_PAIRS = ("HJ", "HT", "HZ", "JT", "JZ", "TZ")


def preset(name: str, T: int = PRESET_SCALE) -> SimulationParams:
    if name not in PRESETS:
        raise KeyError(f"unknown simulation preset: {name}")
    return PRESETS[name].rescaled(T)


def preset_pair(pair: str, T: int = PRESET_SCALE) -> list[SimulationParams]:
    """예: "JZ" → [J, Z] (T 에 맞게 환산)"""
    if pair not in PRESET_PAIRS:
        raise KeyError(
            f"unknown preset pair: {pair} (one of {PRESET_PAIRS})"
        )
    return [preset(name, T) for name in pair]


@dataclass(frozen=True)
class LossResult:
    value: float
    grads: dict[str, np.ndarray]
