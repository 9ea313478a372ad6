import numpy as np

from diffusion.exceptions import InvalidScheduleError
from diffusion.schemas import ScheduleConfig, VarianceSchedule

SCHEDULE_KINDS = ("linear",)


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr.flags.writeable = False
    return arr


def make_schedule(
    T: int = 500,
    beta_start: float = 1e-4,
    beta_end: float = 0.02,
    kind: str = "linear",
) -> VarianceSchedule:
    """beta 를 T step 에 걸쳐 선형 보간하고 alpha/alpha_bar/sigma 를 채운다."""
    if kind not in SCHEDULE_KINDS:
        raise InvalidScheduleError(f"unknown schedule kind: {kind}")
    if int(T) != T or T < 1:
        raise InvalidScheduleError(f"T must be a positive integer (got {T})")
    if not 0.0 < beta_start <= beta_end < 1.0:
        raise InvalidScheduleError(
            "expected 0 < beta_start <= beta_end < 1 "
            f"(got {beta_start}, {beta_end})"
        )
    T = int(T)
    beta = np.concatenate(
        [[0.0], np.linspace(beta_start, beta_end, T, dtype=np.float64)]
    )
    alpha = 1.0 - beta
    alpha_bar = np.cumprod(alpha)
    sigma = np.sqrt(beta)
    if not np.all(np.diff(alpha_bar) < 0):
        raise InvalidScheduleError("alpha_bar is not strictly decreasing")
    return VarianceSchedule(
        config=ScheduleConfig(
            T=T, beta_start=beta_start, beta_end=beta_end, kind=kind
        ),
        beta=_frozen(beta),
        alpha=_frozen(alpha),
        alpha_bar=_frozen(alpha_bar),
        sigma=_frozen(sigma),
    )


def schedule_from_config(cfg: ScheduleConfig) -> VarianceSchedule:
    return make_schedule(cfg.T, cfg.beta_start, cfg.beta_end, cfg.kind)
