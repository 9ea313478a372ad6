"""ε-predictor 구현들.

모든 predictor 는 `pred(x_t, t)` 로 호출하며 입력과 같은 shape 의 배열을
돌려준다. t 는 정수 하나이거나, 첫 축(배치)마다 다른 정수 배열이다.
"""

from typing import Protocol, runtime_checkable

import numpy as np

from dataprep.transforms import crop_to, pad_to_multiple
from diffusion.schemas import VarianceSchedule
from modules.autograd import ExprGraph, NodeRef
from networks.unet import IMAGE_INPUT, TIME_INPUT, UNet, time_embedding

EPS_INPUT = "eps"


@runtime_checkable
class NoisePredictor(Protocol):
    trainable: bool

    def __call__(self, x_t: np.ndarray, t) -> np.ndarray: ...


def per_item(values: np.ndarray, t, ndim: int) -> np.ndarray | float:
    """schedule 배열에서 t 위치 값을 배치 축에 맞게 broadcast 가능한 모양으로"""
    steps = np.asarray(t)
    if steps.ndim == 0:
        return float(values[int(steps)])
    return values[steps].reshape((-1,) + (1,) * (ndim - 1))


class ZeroPredictor:
    trainable = False

    def __call__(self, x_t: np.ndarray, t) -> np.ndarray:
        return np.zeros_like(np.asarray(x_t, dtype=np.float64))


class AnalyticGaussianPredictor:
    """데이터가 N(mu, s²I) 일 때의 최적 ε 예측 (closed form)"""

    trainable = False

    def __init__(self, mu: float, s: float, sched: VarianceSchedule) -> None:
        self.mu = float(mu)
        self.s = float(s)
        self.sched = sched

    def __call__(self, x_t: np.ndarray, t) -> np.ndarray:
        x = np.asarray(x_t, dtype=np.float64)
        ab = per_item(self.sched.alpha_bar, t, x.ndim)
        return (
            np.sqrt(1.0 - ab)
            * (x - np.sqrt(ab) * self.mu)
            / (ab * self.s**2 + 1.0 - ab)
        )


def _to_nchw(x: np.ndarray) -> tuple[np.ndarray, tuple[int, ...]]:
    if x.ndim == 2:
        return x[None, None], x.shape
    if x.ndim == 3:
        return x[:, None], x.shape
    return x, x.shape


class TrainedUNetPredictor:
    """time-conditioned U-Net 을 ε-predictor 로 감싼다."""

    trainable = True

    def __init__(self, unet: UNet, sched: VarianceSchedule | None = None):
        self.unet = unet
        self.sched = sched

    @property
    def param_names(self) -> list[str]:
        return self.unet.param_names

    @property
    def params(self) -> dict[str, np.ndarray]:
        return self.unet.params

    def with_params(
        self, params: dict[str, np.ndarray]
    ) -> "TrainedUNetPredictor":
        return TrainedUNetPredictor(self.unet.with_params(params), self.sched)

    def __call__(self, x_t: np.ndarray, t) -> np.ndarray:
        x = np.asarray(x_t, dtype=np.float64)
        nchw, shape = _to_nchw(x)
        padded, size = pad_to_multiple(nchw, self.unet.cfg.divisor)
        out = crop_to(self.unet.forward(padded, t), size)
        return out.reshape(shape)

    def _loss(self, g: ExprGraph) -> NodeRef:
        out = self.unet.build(g, g.input(IMAGE_INPUT), g.input(TIME_INPUT))
        return g.mean((g.input(EPS_INPUT) - out) ** 2)

    def loss_graph(self) -> tuple[ExprGraph, NodeRef]:
        """mean((ε - ε̂)²) 그래프 (U-Net 마다 한 번만 생성)"""
        return self.unet.cached_graph("ddpm_loss", self._loss)

    def loss_bindings(
        self, x_t: np.ndarray, t: np.ndarray, eps: np.ndarray
    ) -> dict[str, np.ndarray]:
        x, _ = _to_nchw(np.asarray(x_t, dtype=np.float64))
        e, _ = _to_nchw(np.asarray(eps, dtype=np.float64))
        self.unet.check_input(x)
        bindings = dict(self.unet.params)
        bindings[IMAGE_INPUT] = x
        bindings[EPS_INPUT] = e
        bindings[TIME_INPUT] = time_embedding(
            np.broadcast_to(np.asarray(t), (x.shape[0],)),
            self.unet.cfg.time_embed_dim,
        )
        return bindings
