"""forward noising, reverse step, 전체 DDPM 샘플링, partial diffusion 모션 시뮬레이션.

모든 함수는 명시적으로 받은 RngStream 외에는 상태가 없다.
"""

import dataclasses
import logging
from typing import Any, Sequence

import numpy as np
from tqdm import tqdm

from diffusion.exceptions import (
    DiffusionError,
    TimestepOutOfRangeError,
    UnnormalizedInputError,
)
from diffusion.predictors import NoisePredictor, per_item
from diffusion.schemas import SimulationParams, VarianceSchedule
from modules.autograd import RngStream, Tensor
from modules.autograd.exceptions import ShapeMismatchError
from modules.autograd.tensor import as_array

logger = logging.getLogger("diffusion")

NORMALIZED_TOLERANCE = 1e-6


def _check_t(t: int, low: int, high: int) -> int:
    if int(t) != t or not low <= t <= high:
        raise TimestepOutOfRangeError(f"t={t} outside [{low}, {high}]")
    return int(t)


def noise_coefficient(
    sched: VarianceSchedule, t, literal_paper_coefficient: bool = False
):
    """x_t = √ᾱ_t x0 + c·z 의 c. 기본은 √(1-ᾱ_t), literal 이면 (1-ᾱ_t)."""
    one_minus = 1.0 - np.asarray(sched.alpha_bar)[t]
    return one_minus if literal_paper_coefficient else np.sqrt(one_minus)


def forward_noise(
    x0: Any,
    t: int,
    z: Any,
    sched: VarianceSchedule,
    literal_paper_coefficient: bool = False,
) -> Tensor:
    """t 단계까지 한 번에 noising. t=0 이면 x0 를 그대로 돌려준다."""
    t = _check_t(t, 0, sched.T)
    if t == 0:
        return x0 if isinstance(x0, Tensor) else Tensor(x0)
    x = as_array(x0)
    noise = as_array(z)
    if noise.shape != x.shape:
        raise ShapeMismatchError("forward_noise", [x.shape, noise.shape])
    c = noise_coefficient(sched, t, literal_paper_coefficient)
    out = np.sqrt(sched.alpha_bar[t]) * x + c * noise
    return Tensor._wrap(out, where="forward_noise")


def noise_batch(
    x0: np.ndarray,
    t: np.ndarray,
    eps: np.ndarray,
    sched: VarianceSchedule,
    literal_paper_coefficient: bool = False,
) -> np.ndarray:
    """배치 원소마다 다른 t 로 noising (학습 objective 용)"""
    ab = per_item(sched.alpha_bar, t, x0.ndim)
    one_minus = 1.0 - ab
    c = one_minus if literal_paper_coefficient else np.sqrt(one_minus)
    return np.sqrt(ab) * x0 + c * eps


def reverse_step(
    x_t: Any,
    t: int,
    pred: NoisePredictor,
    sched: VarianceSchedule,
    z: Any = None,
) -> Tensor:
    """x_{t-1} = (x_t - (1-α_t)/√(1-ᾱ_t)·ε̂) / √α_t + σ_t z.

    z=None 은 0 과 같다. t=1 에서는 z 가 0 이어야 한다.
    """
    t = _check_t(t, 1, sched.T)
    x = np.asarray(as_array(x_t))
    eps_hat = np.asarray(pred(x, t), dtype=np.float64)
    if eps_hat.shape != x.shape:
        raise ShapeMismatchError("reverse_step", [x.shape, eps_hat.shape])
    alpha = sched.alpha[t]
    coef = (1.0 - alpha) / np.sqrt(1.0 - sched.alpha_bar[t])
    out = (x - coef * eps_hat) / np.sqrt(alpha)
    if z is not None:
        noise = as_array(z)
        if noise.shape != x.shape:
            raise ShapeMismatchError("reverse_step", [x.shape, noise.shape])
        if t == 1 and np.any(noise != 0.0):
            raise DiffusionError("the final reverse step (t=1) is noise-free")
        out = out + sched.sigma[t] * noise
    return Tensor._wrap(out, where=f"reverse_step(t={t})")


def sample(
    pred: NoisePredictor,
    sched: VarianceSchedule,
    shape: tuple[int, ...],
    rng: RngStream,
    deterministic: bool = False,
) -> Tensor:
    """x_T ~ N(0, I) 에서 시작하는 전체 reverse chain"""
    x = rng.standard_normal(tuple(shape))
    for t in range(sched.T, 0, -1):
        z = None
        if t > 1 and not deterministic:
            z = rng.standard_normal(x.shape)
        x = reverse_step(x, t, pred, sched, z).data
    return Tensor._wrap(x, where="sample")


def check_normalized(x: np.ndarray, what: str = "input") -> None:
    low, high = float(np.min(x)), float(np.max(x))
    if low < -NORMALIZED_TOLERANCE or high > 1.0 + NORMALIZED_TOLERANCE:
        raise UnnormalizedInputError(
            f"{what} must lie in [0, 1] (got [{low:.6g}, {high:.6g}])"
        )


def _draw(rngs: Sequence[RngStream], shape: tuple[int, ...]) -> np.ndarray:
    """슬라이스마다 자기 스트림에서 뽑는다 (배치 구성과 무관한 난수)"""
    return np.stack([rng.standard_normal(shape) for rng in rngs])


def simulate_batch(
    images: np.ndarray,
    params: SimulationParams,
    pred: NoisePredictor,
    sched: VarianceSchedule,
    rngs: Sequence[RngStream],
    deterministic: bool = False,
    fresh_noise_per_iteration: bool = True,
    literal_paper_coefficient: bool = False,
    progress: bool = False,
) -> np.ndarray:
    """(N, H, W) 배치에 모션 시뮬레이션. rngs[i] 는 i 번째 슬라이스 전용.

    iteration 마다: n 단계 noising → n 번 reverse_step (마지막은 z=0) →
    [0, 1] clamp → 다음 iteration 의 입력.
    """
    x = np.asarray(as_array(images), dtype=np.float64)
    check_normalized(x)
    if len(rngs) != x.shape[0]:
        raise ValueError(
            f"need one RngStream per slice ({len(rngs)} != {x.shape[0]})"
        )
    if params.n >= sched.T:
        raise TimestepOutOfRangeError(
            f"partial step n={params.n} must be < T={sched.T}"
        )
    if params.n == 0:
        return x.copy()

    n = params.n
    slice_shape = x.shape[1:]
    first_noise: np.ndarray | None = None
    for iteration in tqdm(
        range(params.iterations),
        desc=f"simulate {params.name or n}",
        disable=not progress,
    ):
        if deterministic:
            noise = np.zeros_like(x)
        elif fresh_noise_per_iteration or first_noise is None:
            noise = _draw(rngs, slice_shape)
        else:
            noise = first_noise
        if first_noise is None:
            first_noise = noise
        current = forward_noise(x, n, noise, sched, literal_paper_coefficient)
        for t in range(n, 0, -1):
            z = None
            if t > 1 and not deterministic:
                z = _draw(rngs, slice_shape)
            current = reverse_step(current, t, pred, sched, z)
        x = np.clip(current.data, 0.0, 1.0)
        logger.debug(
            "simulation iteration %d/%d done (n=%d, batch=%d)",
            iteration + 1,
            params.iterations,
            n,
            x.shape[0],
        )
    return x


def simulate_motion(
    Y: Any,
    params: SimulationParams,
    pred: NoisePredictor,
    sched: VarianceSchedule,
    rng: RngStream,
    **options: Any,
) -> Any:
    """슬라이스 하나에 모션 아티팩트를 입힌다.

    ImageSlice(.pixels 보유) 를 넣으면 pixels 만 바뀐 ImageSlice 를, 배열/Tensor
    를 넣으면 Tensor 를 돌려준다. n=0 이면 입력 그대로.
    """
    pixels = getattr(Y, "pixels", Y)
    arr = np.asarray(as_array(pixels), dtype=np.float64)
    if params.n == 0:
        check_normalized(arr)
        return Y
    out = simulate_batch(arr[None], params, pred, sched, [rng], **options)[0]
    if hasattr(Y, "pixels"):
        return dataclasses.replace(Y, pixels=out)
    return Tensor._wrap(out, where="simulate_motion")
