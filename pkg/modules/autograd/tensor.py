from typing import Any

import numpy as np

from modules.autograd.exceptions import NonFiniteError, ShapeMismatchError

Number = int | float


class Tensor:
    """불변 dense tensor. float64 row-major 저장, 생성 시 유한성 검사.

    numpy 배열을 감싸되 writeable 플래그를 꺼서 여러 스레드/샘플이 공유해도
    안전하게 한다. 산술 연산은 새 Tensor 를 돌려준다.
    """

    __slots__ = ("_data",)

    def __init__(self, data: Any, *, where: str = "Tensor") -> None:
        arr = np.array(data, dtype=np.float64, copy=True)
        self._data = _freeze(arr, where)

    @classmethod
    def _wrap(cls, arr: np.ndarray, where: str = "Tensor") -> "Tensor":
        """내부용: 새로 만든 배열을 복사 없이 감싼다."""
        obj = cls.__new__(cls)
        obj._data = _freeze(np.asarray(arr, dtype=np.float64), where)
        return obj

    @classmethod
    def zeros(cls, shape: tuple[int, ...]) -> "Tensor":
        return cls._wrap(np.zeros(shape))

    @classmethod
    def full(cls, shape: tuple[int, ...], value: float) -> "Tensor":
        return cls._wrap(np.full(shape, float(value)))

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(self._data.shape)

    @property
    def data(self) -> np.ndarray:
        """읽기 전용 배열 view"""
        return self._data

    @property
    def size(self) -> int:
        return int(self._data.size)

    @property
    def ndim(self) -> int:
        return int(self._data.ndim)

    def numpy(self) -> np.ndarray:
        """수정 가능한 복사본"""
        return self._data.copy()

    def item(self) -> float:
        if self._data.size != 1:
            raise ShapeMismatchError("item", [self.shape], "not a scalar")
        return float(self._data.reshape(-1)[0])

    def reshape(self, shape: tuple[int, ...]) -> "Tensor":
        try:
            return Tensor._wrap(self._data.reshape(shape))
        except ValueError as e:
            raise ShapeMismatchError("reshape", [self.shape], str(e)) from e

    def clip(self, low: float, high: float) -> "Tensor":
        return Tensor._wrap(np.clip(self._data, low, high))

    def mean(self) -> float:
        return float(self._data.mean())

    def sum(self) -> float:
        return float(self._data.sum())

    def _binary(self, other: "Tensor | Number", op: str, fn) -> "Tensor":
        other_arr = other._data if isinstance(other, Tensor) else other
        try:
            result = fn(self._data, other_arr)
        except ValueError as e:
            other_shape = (
                other.shape if isinstance(other, Tensor) else tuple()
            )
            raise ShapeMismatchError(op, [self.shape, other_shape]) from e
        return Tensor._wrap(result, where=op)

    def __add__(self, other: "Tensor | Number") -> "Tensor":
        return self._binary(other, "add", np.add)

    def __radd__(self, other: Number) -> "Tensor":
        return self._binary(other, "add", np.add)

    def __sub__(self, other: "Tensor | Number") -> "Tensor":
        return self._binary(other, "sub", np.subtract)

    def __rsub__(self, other: Number) -> "Tensor":
        return Tensor._wrap(other - self._data, where="sub")

    def __mul__(self, other: "Tensor | Number") -> "Tensor":
        return self._binary(other, "mul", np.multiply)

    def __rmul__(self, other: Number) -> "Tensor":
        return self._binary(other, "mul", np.multiply)

    def __truediv__(self, other: "Tensor | Number") -> "Tensor":
        return self._binary(other, "div", np.divide)

    def __neg__(self) -> "Tensor":
        return Tensor._wrap(-self._data)

    def __len__(self) -> int:
        return int(self._data.shape[0]) if self._data.ndim else 1

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape})"


def _freeze(arr: np.ndarray, where: str) -> np.ndarray:
    if not np.all(np.isfinite(arr)):
        raise NonFiniteError(where)
    if arr.flags.writeable and arr.base is None:
        arr.flags.writeable = False
    elif arr.flags.writeable:
        arr = arr.copy()
        arr.flags.writeable = False
    return arr


def as_array(value: "Tensor | np.ndarray | Number") -> np.ndarray:
    """Tensor/ndarray/스칼라를 float64 배열로 (복사 최소화)"""
    if isinstance(value, Tensor):
        return value.data
    return np.asarray(value, dtype=np.float64)
