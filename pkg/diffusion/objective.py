from typing import Any, Sequence

import numpy as np

from diffusion.exceptions import EmptyBatchError
from diffusion.predictors import NoisePredictor
from diffusion.sampler import check_normalized, noise_batch
from diffusion.schemas import LossResult, VarianceSchedule
from modules.autograd import RngStream, evaluate, value_and_gradient
from modules.autograd.tensor import as_array


def stack_batch(batch: Any) -> np.ndarray:
    """ImageSlice 목록 / 배열 목록 / (N, ...) 배열 → float64 배열"""
    if isinstance(batch, np.ndarray):
        return np.asarray(batch, dtype=np.float64)
    items: Sequence[Any] = list(batch)
    if not items:
        return np.zeros((0,))
    return np.stack(
        [np.asarray(as_array(getattr(i, "pixels", i))) for i in items]
    ).astype(np.float64)


def ddpm_loss(
    batch: Any,
    pred: NoisePredictor,
    sched: VarianceSchedule,
    rng: RngStream,
    with_grad: bool = True,
) -> LossResult:
    """ε-prediction MSE.

    원소마다 t ~ U{1..T}, ε ~ N(0, I) 를 뽑아 x_t 를 만들고
    mean((ε - ε̂(x_t, t))²) 를 계산한다. 학습 가능한 predictor 면 파라미터
    gradient 도 함께 돌려준다.
    """
    x0 = stack_batch(batch)
    if x0.ndim == 0 or x0.shape[0] == 0:
        raise EmptyBatchError("ddpm_loss needs at least one sample")
    check_normalized(x0, "ddpm_loss batch")

    t = rng.integers(1, sched.T + 1, (x0.shape[0],))
    eps = rng.standard_normal(x0.shape)
    x_t = noise_batch(x0, t, eps, sched)

    if getattr(pred, "trainable", False):
        g, root = pred.loss_graph()
        bindings = pred.loss_bindings(x_t, t, eps)
        if not with_grad:
            return LossResult(evaluate(g, bindings, root).item(), {})
        value, grads = value_and_gradient(
            g, bindings, root, wrt=pred.param_names
        )
        return LossResult(value, {k: v.numpy() for k, v in grads.items()})

    eps_hat = np.asarray(pred(x_t, t), dtype=np.float64)
    return LossResult(float(np.mean((eps - eps_hat) ** 2)), {})
