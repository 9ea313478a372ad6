"""Gaussian window SSIM (지표 + 미분 가능한 loss).

SSIM map 은 modules.autograd 그래프로 만들어서, 평가와 학습 loss 가 같은 코드를
공유한다. window 경계는 valid 처리 (padding 없음, 가장자리 radius 만큼 제외).
"""

from typing import Any

import numpy as np

from modules.autograd import ExprGraph, NodeRef, evaluate, value_and_gradient
from modules.autograd.tensor import as_array
from modules.metrics.exceptions import MetricShapeError
from modules.metrics.schemas import MetricConfig

DEFAULT_CONFIG = MetricConfig()


def pixels_of(image: Any) -> np.ndarray:
    """ImageSlice(.pixels) / Tensor / ndarray 를 float64 2D 이상 배열로"""
    data = getattr(image, "pixels", image)
    return np.asarray(as_array(data), dtype=np.float64)


def _as_nchw(arr: np.ndarray) -> np.ndarray:
    if arr.ndim == 2:
        return arr[None, None]
    if arr.ndim == 3:
        return arr[:, None]
    if arr.ndim == 4:
        return arr
    raise MetricShapeError(f"expected 2D/3D/4D image, got shape {arr.shape}")


def check_pair(x: np.ndarray, y: np.ndarray, cfg: MetricConfig) -> None:
    if x.shape != y.shape:
        raise MetricShapeError(f"shape mismatch: {x.shape} vs {y.shape}")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise MetricShapeError("images must be finite")
    h, w = x.shape[-2:]
    if cfg.window_size > h or cfg.window_size > w:
        raise MetricShapeError(
            f"SSIM window {cfg.window_size} larger than image {h}x{w}"
        )


def ssim_map_node(
    g: ExprGraph, x: NodeRef, y: NodeRef, cfg: MetricConfig
) -> NodeRef:
    """NCHW(C=1) 입력 두 노드의 local SSIM map 노드 (valid 영역)"""
    window = g.const(cfg.window.reshape(1, 1, *cfg.window.shape))

    def blur(node: NodeRef) -> NodeRef:
        return g.conv2d(node, window, padding="valid")

    mu_x = blur(x)
    mu_y = blur(y)
    mu_xx = mu_x * mu_x
    mu_yy = mu_y * mu_y
    mu_xy = mu_x * mu_y
    var_x = blur(x * x) - mu_xx
    var_y = blur(y * y) - mu_yy
    cov = blur(x * y) - mu_xy

    numerator = (2.0 * mu_xy + cfg.c1) * (2.0 * cov + cfg.c2)
    denominator = (mu_xx + mu_yy + cfg.c1) * (var_x + var_y + cfg.c2)
    return numerator / denominator


def ssim_loss_node(
    g: ExprGraph, x: NodeRef, y: NodeRef, cfg: MetricConfig = DEFAULT_CONFIG
) -> NodeRef:
    """배치 평균 1 - SSIM. 모든 pair 의 map 크기가 같아 전체 mean 과 같다."""
    return 1.0 - g.mean(ssim_map_node(g, x, y, cfg))


def _pair_graph(cfg: MetricConfig) -> tuple[ExprGraph, NodeRef]:
    g = ExprGraph()
    mean_ssim = g.mean(ssim_map_node(g, g.input("x"), g.input("y"), cfg))
    return g, mean_ssim


def ssim(x: Any, y: Any, cfg: MetricConfig = DEFAULT_CONFIG) -> float:
    """local SSIM map 의 평균. (x, y) 에 대해 대칭, [-1, 1] 범위."""
    xa, ya = pixels_of(x), pixels_of(y)
    check_pair(xa, ya, cfg)
    g, root = _pair_graph(cfg)
    value = evaluate(g, {"x": _as_nchw(xa), "y": _as_nchw(ya)}, root).item()
    # 부동소수점 반올림으로 경계를 살짝 넘는 경우만 자른다
    return float(np.clip(value, -1.0, 1.0))


def ssim_map(
    x: Any, y: Any, cfg: MetricConfig = DEFAULT_CONFIG
) -> np.ndarray:
    """local SSIM map. 2D 입력이면 2D, 배치 입력이면 (N, h, w)."""
    xa, ya = pixels_of(x), pixels_of(y)
    check_pair(xa, ya, cfg)
    g = ExprGraph()
    root = ssim_map_node(g, g.input("x"), g.input("y"), cfg)
    out = evaluate(g, {"x": _as_nchw(xa), "y": _as_nchw(ya)}, root)
    result = out.numpy()[:, 0]
    return result[0] if xa.ndim == 2 else result


def ssim_loss(x: Any, y: Any, cfg: MetricConfig = DEFAULT_CONFIG) -> float:
    return 1.0 - ssim(x, y, cfg)


def ssim_loss_and_grad(
    x: Any, y: Any, cfg: MetricConfig = DEFAULT_CONFIG
) -> tuple[float, np.ndarray]:
    """(1 - ssim(x, y), ∂loss/∂x). gradient 는 x 와 같은 shape."""
    xa, ya = pixels_of(x), pixels_of(y)
    check_pair(xa, ya, cfg)
    g = ExprGraph()
    ssim_loss_node(g, g.input("x"), g.input("y"), cfg)
    value, grads = value_and_gradient(
        g, {"x": _as_nchw(xa), "y": _as_nchw(ya)}, wrt=["x"]
    )
    return value, grads["x"].numpy().reshape(xa.shape)
