"""연산 테이블: 이름 → (forward, vjp).

Wengert list 방식 역전파에서 쓰는 함수 라이브러리와 편미분 규칙을 한곳에 둔다.
forward(inputs, attrs) 는 float64 배열을, vjp(g, inputs, out, attrs) 는 입력별
cotangent 배열 리스트를 돌려준다. 모든 누적은 float64 로 한다.
"""

from dataclasses import dataclass
from typing import Any, Callable

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.special import expit

from modules.autograd.exceptions import ShapeMismatchError

Forward = Callable[[list[np.ndarray], dict[str, Any]], np.ndarray]
Vjp = Callable[
    [np.ndarray, list[np.ndarray], np.ndarray, dict[str, Any]],
    list[np.ndarray],
]


@dataclass(frozen=True)
class OpDef:
    name: str
    forward: Forward
    vjp: Vjp | None = None


OPS: dict[str, OpDef] = {}


def register_op(name: str, forward: Forward, vjp: Vjp | None = None) -> None:
    """연산 등록. vjp 가 없으면 forward 전용 (역전파 시 UnsupportedOpError)."""
    OPS[name] = OpDef(name=name, forward=forward, vjp=vjp)


def unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """broadcasting 으로 늘어난 축을 합쳐 원래 shape 로 되돌린다."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad.reshape(shape)


# =============================================================================
# elementwise
# =============================================================================


def _add_vjp(g, inputs, out, attrs):
    a, b = inputs
    return [unbroadcast(g, a.shape), unbroadcast(g, b.shape)]


def _sub_vjp(g, inputs, out, attrs):
    a, b = inputs
    return [unbroadcast(g, a.shape), unbroadcast(-g, b.shape)]


def _mul_vjp(g, inputs, out, attrs):
    a, b = inputs
    return [unbroadcast(g * b, a.shape), unbroadcast(g * a, b.shape)]


def _div_vjp(g, inputs, out, attrs):
    a, b = inputs
    return [
        unbroadcast(g / b, a.shape),
        unbroadcast(-g * a / (b * b), b.shape),
    ]


def _pow_forward(inputs, attrs):
    return np.power(inputs[0], attrs["exponent"])


def _pow_vjp(g, inputs, out, attrs):
    p = attrs["exponent"]
    return [g * p * np.power(inputs[0], p - 1.0)]


def _relu_vjp(g, inputs, out, attrs):
    # x == 0 에서의 subgradient 는 0
    return [g * (inputs[0] > 0.0)]


def _sigmoid_vjp(g, inputs, out, attrs):
    return [g * out * (1.0 - out)]


register_op("add", lambda xs, at: xs[0] + xs[1], _add_vjp)
register_op("sub", lambda xs, at: xs[0] - xs[1], _sub_vjp)
register_op("mul", lambda xs, at: xs[0] * xs[1], _mul_vjp)
register_op("div", lambda xs, at: xs[0] / xs[1], _div_vjp)
register_op("neg", lambda xs, at: -xs[0], lambda g, xs, o, at: [-g])
register_op("pow", _pow_forward, _pow_vjp)
register_op("relu", lambda xs, at: np.maximum(xs[0], 0.0), _relu_vjp)
register_op("sigmoid", lambda xs, at: expit(xs[0]), _sigmoid_vjp)


# =============================================================================
# reductions / shape
# =============================================================================


def _axis(attrs: dict[str, Any]) -> int | tuple[int, ...] | None:
    axis = attrs.get("axis")
    return tuple(axis) if isinstance(axis, list) else axis


def _expand_reduced(
    g: np.ndarray, shape: tuple[int, ...], attrs: dict[str, Any]
) -> np.ndarray:
    axis = _axis(attrs)
    if axis is not None and not attrs.get("keepdims", False):
        axes = (axis,) if isinstance(axis, int) else axis
        for ax in sorted(a % len(shape) for a in axes):
            g = np.expand_dims(g, ax)
    return np.broadcast_to(g, shape)


def _reduced_count(shape: tuple[int, ...], attrs: dict[str, Any]) -> int:
    axis = _axis(attrs)
    if axis is None:
        return int(np.prod(shape, dtype=np.int64))
    axes = (axis,) if isinstance(axis, int) else axis
    return int(np.prod([shape[a] for a in axes], dtype=np.int64))


def _sum_forward(inputs, attrs):
    return np.sum(
        inputs[0], axis=_axis(attrs), keepdims=attrs.get("keepdims", False)
    )


def _mean_forward(inputs, attrs):
    return np.mean(
        inputs[0], axis=_axis(attrs), keepdims=attrs.get("keepdims", False)
    )


def _sum_vjp(g, inputs, out, attrs):
    return [np.array(_expand_reduced(g, inputs[0].shape, attrs))]


def _mean_vjp(g, inputs, out, attrs):
    count = _reduced_count(inputs[0].shape, attrs)
    return [np.array(_expand_reduced(g, inputs[0].shape, attrs)) / count]


def _broadcast_forward(inputs, attrs):
    return np.array(np.broadcast_to(inputs[0], tuple(attrs["shape"])))


def _reshape_forward(inputs, attrs):
    return inputs[0].reshape(tuple(attrs["shape"]))


def _concat_forward(inputs, attrs):
    return np.concatenate(inputs, axis=attrs["axis"])


def _concat_vjp(g, inputs, out, attrs):
    sizes = np.cumsum([x.shape[attrs["axis"]] for x in inputs])[:-1]
    return list(np.split(g, sizes, axis=attrs["axis"]))


def _slice_forward(inputs, attrs):
    return inputs[0][attrs["key"]]


def _slice_vjp(g, inputs, out, attrs):
    grad = np.zeros_like(inputs[0])
    grad[attrs["key"]] = g
    return [grad]


register_op("sum", _sum_forward, _sum_vjp)
register_op("mean", _mean_forward, _mean_vjp)
register_op(
    "broadcast",
    _broadcast_forward,
    lambda g, xs, o, at: [unbroadcast(g, xs[0].shape)],
)
register_op(
    "reshape", _reshape_forward, lambda g, xs, o, at: [g.reshape(xs[0].shape)]
)
register_op("concat", _concat_forward, _concat_vjp)
register_op("slice", _slice_forward, _slice_vjp)


# =============================================================================
# linear algebra / image ops (NCHW)
# =============================================================================


def _matmul_forward(inputs, attrs):
    a, b = inputs
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeMismatchError("matmul", [a.shape, b.shape])
    return a @ b


def _matmul_vjp(g, inputs, out, attrs):
    a, b = inputs
    return [g @ b.T, a.T @ g]


def _conv_padding(kh: int, kw: int, padding: str) -> tuple[int, int, int, int]:
    """(top, bottom, left, right). same 은 홀수 커널 기준 대칭 zero padding."""
    if padding == "valid":
        return 0, 0, 0, 0
    return (kh - 1) // 2, kh // 2, (kw - 1) // 2, kw // 2


def _conv2d_forward(inputs, attrs):
    x, w = inputs
    if x.ndim != 4 or w.ndim != 4 or x.shape[1] != w.shape[1]:
        raise ShapeMismatchError("conv2d", [x.shape, w.shape])
    kh, kw = w.shape[2], w.shape[3]
    top, bottom, left, right = _conv_padding(kh, kw, attrs["padding"])
    xp = np.pad(x, ((0, 0), (0, 0), (top, bottom), (left, right)))
    if xp.shape[2] < kh or xp.shape[3] < kw:
        raise ShapeMismatchError(
            "conv2d", [x.shape, w.shape], "kernel larger than input"
        )
    windows = sliding_window_view(xp, (kh, kw), axis=(2, 3))
    # (N, C, H', W', kh, kw) x (O, C, kh, kw) -> (N, H', W', O)
    out = np.tensordot(windows, w, axes=([1, 4, 5], [1, 2, 3]))
    return np.ascontiguousarray(out.transpose(0, 3, 1, 2))


def _conv2d_vjp(g, inputs, out, attrs):
    x, w = inputs
    kh, kw = w.shape[2], w.shape[3]
    top, bottom, left, right = _conv_padding(kh, kw, attrs["padding"])
    xp = np.pad(x, ((0, 0), (0, 0), (top, bottom), (left, right)))
    windows = sliding_window_view(xp, (kh, kw), axis=(2, 3))
    grad_w = np.tensordot(g, windows, axes=([0, 2, 3], [0, 2, 3]))

    out_h, out_w = g.shape[2], g.shape[3]
    grad_xp = np.zeros_like(xp)
    for i in range(kh):
        for j in range(kw):
            # (N, O, H', W') x (O, C) -> (N, H', W', C)
            contrib = np.tensordot(g, w[:, :, i, j], axes=([1], [0]))
            grad_xp[:, :, i : i + out_h, j : j + out_w] += contrib.transpose(
                0, 3, 1, 2
            )
    grad_x = grad_xp[
        :, :, top : top + x.shape[2], left : left + x.shape[3]
    ].copy()
    return [grad_x, grad_w]


def _check_even(op: str, x: np.ndarray) -> None:
    if x.ndim != 4 or x.shape[2] % 2 or x.shape[3] % 2:
        raise ShapeMismatchError(op, [x.shape], "expected NCHW with even H, W")


def _avg_pool_forward(inputs, attrs):
    x = inputs[0]
    _check_even("avg_pool2", x)
    n, c, h, w = x.shape
    return x.reshape(n, c, h // 2, 2, w // 2, 2).mean(axis=(3, 5))


def _avg_pool_vjp(g, inputs, out, attrs):
    return [np.repeat(np.repeat(g, 2, axis=2), 2, axis=3) / 4.0]


def _pool_blocks(x: np.ndarray) -> np.ndarray:
    n, c, h, w = x.shape
    return (
        x.reshape(n, c, h // 2, 2, w // 2, 2)
        .transpose(0, 1, 2, 4, 3, 5)
        .reshape(n, c, h // 2, w // 2, 4)
    )


def _max_pool_forward(inputs, attrs):
    x = inputs[0]
    _check_even("max_pool2", x)
    return _pool_blocks(x).max(axis=-1)


def _max_pool_vjp(g, inputs, out, attrs):
    x = inputs[0]
    n, c, h, w = x.shape
    blocks = _pool_blocks(x)
    # 동률이면 블록 내 첫 번째 최댓값으로 gradient 를 보낸다
    winner = np.argmax(blocks, axis=-1)
    mask = np.zeros_like(blocks)
    np.put_along_axis(mask, winner[..., None], 1.0, axis=-1)
    grad_blocks = mask * g[..., None]
    grad = (
        grad_blocks.reshape(n, c, h // 2, w // 2, 2, 2)
        .transpose(0, 1, 2, 4, 3, 5)
        .reshape(n, c, h, w)
    )
    return [grad]


def _upsample_forward(inputs, attrs):
    x = inputs[0]
    if x.ndim != 4:
        raise ShapeMismatchError("upsample2", [x.shape], "expected NCHW")
    return np.repeat(np.repeat(x, 2, axis=2), 2, axis=3)


def _upsample_vjp(g, inputs, out, attrs):
    n, c, h, w = inputs[0].shape
    return [g.reshape(n, c, h, 2, w, 2).sum(axis=(3, 5))]


register_op("matmul", _matmul_forward, _matmul_vjp)
register_op("conv2d", _conv2d_forward, _conv2d_vjp)
register_op("avg_pool2", _avg_pool_forward, _avg_pool_vjp)
register_op("max_pool2", _max_pool_forward, _max_pool_vjp)
register_op("upsample2", _upsample_forward, _upsample_vjp)
