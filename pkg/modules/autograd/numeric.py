"""중앙 차분 기반 gradient 검증 도구.

학습 코드에서는 쓰지 않고, 새 연산/모델의 역전파 규칙을 검증할 때 쓴다.
"""

from typing import Callable, Mapping

import numpy as np

from modules.autograd.tensor import as_array


def numeric_gradient(
    fn: Callable[[dict[str, np.ndarray]], float],
    bindings: Mapping[str, object],
    name: str,
    h: float = 1e-3,
) -> np.ndarray:
    """bindings[name] 의 원소마다 (f(x+h) - f(x-h)) / 2h. 64-bit 누적."""
    values = {
        key: np.array(as_array(value), dtype=np.float64)
        for key, value in bindings.items()
    }
    x = values[name]
    grad = np.zeros_like(x)
    for idx in np.ndindex(x.shape):
        original = x[idx]
        x[idx] = original + h
        plus = fn(values)
        x[idx] = original - h
        minus = fn(values)
        x[idx] = original
        grad[idx] = (plus - minus) / (2.0 * h)
    return grad


def max_relative_error(
    analytic: np.ndarray, numeric: np.ndarray, floor: float = 1e-8
) -> float:
    """max|a - n| / max(max|n|, floor)"""
    analytic = np.asarray(as_array(analytic), dtype=np.float64)
    numeric = np.asarray(numeric, dtype=np.float64)
    scale = max(float(np.max(np.abs(numeric), initial=0.0)), floor)
    return float(np.max(np.abs(analytic - numeric), initial=0.0) / scale)
