"""학습 대상 정의: corrector (SSIM loss) 와 DDPM ε-predictor (ddpm_loss)."""

import math
from typing import Any, Iterator, Sequence

import numpy as np

from dataprep.transforms import crop_to, pad_to_multiple
from diffusion.objective import ddpm_loss, stack_batch
from diffusion.predictors import TrainedUNetPredictor
from diffusion.schemas import VarianceSchedule
from modules.autograd import (
    ExprGraph,
    NodeRef,
    RngStream,
    evaluate,
    value_and_gradient,
)
from modules.metrics import MetricConfig, ssim_loss_node
from networks.unet import IMAGE_INPUT, UNet

TARGET_INPUT = "target"
EVAL_CHUNK = 32
# validation 은 epoch 마다 같은 노이즈로 비교한다
VAL_STREAM = 2


def chunks(items: Sequence[Any], size: int) -> Iterator[Sequence[Any]]:
    for start in range(0, len(items), size):
        yield items[start : start + size]


def _grads_to_numpy(grads: dict) -> dict[str, np.ndarray]:
    return {name: value.numpy() for name, value in grads.items()}


class CorrectorTask:
    """motion-affected → clean 매핑, loss = 배치 평균 (1 - SSIM)"""

    name = "corrector"
    schedule = None

    def __init__(
        self, unet: UNet, metric_cfg: MetricConfig | None = None
    ) -> None:
        self.unet = unet
        self.metric_cfg = metric_cfg or MetricConfig()

    def _arrays(
        self, batch: Sequence[Any]
    ) -> tuple[np.ndarray, np.ndarray, tuple[int, int]]:
        degraded = stack_batch([pair.degraded for pair in batch])[:, None]
        clean = stack_batch([pair.clean for pair in batch])[:, None]
        padded, size = pad_to_multiple(degraded, self.unet.cfg.divisor)
        return padded, clean, size

    def _graph(self, size: tuple[int, int]) -> tuple[ExprGraph, NodeRef]:
        h, w = size
        cfg = self.metric_cfg

        def builder(g: ExprGraph) -> NodeRef:
            out = self.unet.build(g, g.input(IMAGE_INPUT))
            cropped = g.slice(
                out, (slice(None), slice(None), slice(0, h), slice(0, w))
            )
            return ssim_loss_node(g, cropped, g.input(TARGET_INPUT), cfg)

        return self.unet.cached_graph(f"ssim_loss:{h}x{w}:{cfg}", builder)

    def _bindings(self, params, batch) -> tuple[dict, tuple[int, int]]:
        x, target, size = self._arrays(batch)
        bindings = dict(params)
        bindings[IMAGE_INPUT] = x
        bindings[TARGET_INPUT] = target
        return bindings, size

    def loss_and_grads(
        self,
        params: dict[str, np.ndarray],
        batch: Sequence[Any],
        rng: RngStream,
    ) -> tuple[float, dict[str, np.ndarray]]:
        bindings, size = self._bindings(params, batch)
        g, root = self._graph(size)
        value, grads = value_and_gradient(
            g, bindings, root, wrt=self.unet.param_names
        )
        return value, _grads_to_numpy(grads)

    def validation_loss(
        self, params: dict[str, np.ndarray], items: Sequence[Any]
    ) -> float:
        weighted = []
        for chunk in chunks(items, EVAL_CHUNK):
            bindings, size = self._bindings(params, chunk)
            g, root = self._graph(size)
            weighted.append(evaluate(g, bindings, root).item() * len(chunk))
        return math.fsum(weighted) / len(items)


class DenoiserTask:
    """motion-affected 슬라이스로 time-conditioned ε-predictor 를 학습"""

    name = "ddpm"

    def __init__(
        self, unet: UNet, sched: VarianceSchedule, val_seed: int = 0
    ) -> None:
        self.unet = unet
        self.sched = sched
        self.schedule = sched.config
        self.val_seed = val_seed
        self.predictor = TrainedUNetPredictor(unet, sched)

    def _padded(self, batch: Sequence[Any]) -> np.ndarray:
        padded, _ = pad_to_multiple(stack_batch(batch), self.unet.cfg.divisor)
        return padded

    def loss_and_grads(
        self,
        params: dict[str, np.ndarray],
        batch: Sequence[Any],
        rng: RngStream,
    ) -> tuple[float, dict[str, np.ndarray]]:
        result = ddpm_loss(
            self._padded(batch),
            self.predictor.with_params(params),
            self.sched,
            rng,
        )
        return result.value, result.grads

    def validation_loss(
        self, params: dict[str, np.ndarray], items: Sequence[Any]
    ) -> float:
        rng = RngStream(self.val_seed, VAL_STREAM)
        predictor = self.predictor.with_params(params)
        weighted = []
        for chunk in chunks(items, EVAL_CHUNK):
            result = ddpm_loss(
                self._padded(chunk), predictor, self.sched, rng, False
            )
            weighted.append(result.value * len(chunk))
        return math.fsum(weighted) / len(items)


def correct_slices(
    unet: UNet, images: np.ndarray, batch_size: int = EVAL_CHUNK
) -> np.ndarray:
    """(N, H, W) motion-affected → 보정 결과 (N, H, W), [0, 1] clamp"""
    images = np.asarray(images, dtype=np.float64)
    if len(images) == 0:
        return images.copy()
    outputs = []
    for chunk in chunks(images, batch_size):
        padded, size = pad_to_multiple(chunk[:, None], unet.cfg.divisor)
        outputs.append(crop_to(unet.forward(padded), size)[:, 0])
    return np.clip(np.concatenate(outputs), 0.0, 1.0)
