import numpy as np
import pytest

from modules.autograd.exceptions import NonFiniteError, ShapeMismatchError
from modules.autograd.tensor import Tensor


def test_shape_and_size_match_data():
    t = Tensor(np.arange(12.0).reshape(3, 4))
    assert t.shape == (3, 4)
    assert t.size == 12
    assert t.data.dtype == np.float64


def test_tensor_is_immutable():
    """생성 후 내부 배열은 수정할 수 없다."""
    source = np.ones((2, 2))
    t = Tensor(source)
    source[0, 0] = 5.0
    assert t.data[0, 0] == 1.0
    with pytest.raises(ValueError):
        t.data[0, 0] = 3.0


def test_numpy_returns_writable_copy():
    t = Tensor([1.0, 2.0])
    arr = t.numpy()
    arr[0] = 9.0
    assert t.data[0] == 1.0


@pytest.mark.parametrize("bad", [np.nan, np.inf, -np.inf])
def test_non_finite_values_are_rejected(bad):
    """NaN/Inf 는 조용한 상태가 아니라 에러."""
    with pytest.raises(NonFiniteError):
        Tensor([0.0, bad])


def test_arithmetic_overflow_is_rejected():
    with pytest.raises(NonFiniteError):
        Tensor([1.0]) / 0.0


def test_arithmetic_shape_mismatch():
    with pytest.raises(ShapeMismatchError):
        Tensor(np.ones((2, 3))) + Tensor(np.ones((4,)))


def test_arithmetic_broadcasts_scalars():
    t = 2.0 * Tensor([1.0, 2.0]) - 1.0
    np.testing.assert_array_equal(t.data, [1.0, 3.0])
    np.testing.assert_array_equal((1.0 - t).data, [0.0, -2.0])


def test_item_requires_single_element():
    assert Tensor([[4.0]]).item() == 4.0
    with pytest.raises(ShapeMismatchError):
        Tensor([1.0, 2.0]).item()


def test_reshape_and_clip():
    t = Tensor(np.linspace(-1.0, 2.0, 6)).reshape((2, 3))
    assert t.shape == (2, 3)
    clipped = t.clip(0.0, 1.0)
    assert clipped.data.min() == 0.0
    assert clipped.data.max() == 1.0
    with pytest.raises(ShapeMismatchError):
        t.reshape((4, 2))
