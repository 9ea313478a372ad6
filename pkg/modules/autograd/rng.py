"""Counter 기반(Philox) 분할 가능 난수 스트림.

(seed, stream_id) 가 같으면 스레드/프로세스 스케줄과 무관하게 같은 수열을 낸다.
병렬 작업은 공유 스트림 대신 split() 으로 파생한 자식 스트림을 하나씩 쓴다.
"""

import numpy as np

from modules.autograd.tensor import Tensor

_UINT64_MAX = 2**64 - 1


class RngStream:
    def __init__(self, seed: int, stream_id: int = 0) -> None:
        if not 0 <= seed <= _UINT64_MAX:
            raise ValueError(f"seed must fit in 64 bits (got {seed})")
        if not 0 <= stream_id <= _UINT64_MAX:
            raise ValueError(
                f"stream_id must fit in 64 bits (got {stream_id})"
            )
        self.seed = int(seed)
        self.stream_id = int(stream_id)
        self.counter = 0
        self._generator = self._make_generator()

    def _make_generator(self) -> np.random.Generator:
        key = np.array([self.seed, self.stream_id], dtype=np.uint64)
        return np.random.Generator(np.random.Philox(key=key))

    def reset(self) -> None:
        """counter 를 0 으로 되돌린다 (같은 수열을 처음부터 다시)."""
        self.counter = 0
        self._generator = self._make_generator()

    def split(self, index: int) -> "RngStream":
        """index 로 식별되는 독립 자식 스트림. 부모 상태는 건드리지 않는다."""
        state = np.random.SeedSequence(
            [self.seed, self.stream_id, int(index)]
        ).generate_state(1, dtype=np.uint64)
        return RngStream(self.seed, int(state[0]))

    def standard_normal(self, shape: tuple[int, ...]) -> np.ndarray:
        self.counter += 1
        return self._generator.standard_normal(shape)

    def uniform(
        self, low: float, high: float, shape: tuple[int, ...] | None = None
    ) -> np.ndarray:
        self.counter += 1
        return self._generator.uniform(low, high, shape)

    def integers(
        self, low: int, high: int, shape: tuple[int, ...] | None = None
    ) -> np.ndarray:
        """[low, high) 정수"""
        self.counter += 1
        return self._generator.integers(low, high, shape)

    def permutation(self, n: int) -> np.ndarray:
        self.counter += 1
        return self._generator.permutation(n)

    def __getstate__(self) -> dict:
        return {
            "seed": self.seed,
            "stream_id": self.stream_id,
            "counter": self.counter,
            "state": self._generator.bit_generator.state,
        }

    def __setstate__(self, state: dict) -> None:
        self.seed = state["seed"]
        self.stream_id = state["stream_id"]
        self.counter = state["counter"]
        self._generator = self._make_generator()
        self._generator.bit_generator.state = state["state"]

    def __repr__(self) -> str:
        return (
            f"RngStream(seed={self.seed}, stream_id={self.stream_id}, "
            f"counter={self.counter})"
        )


def gaussian(rng: RngStream, shape: tuple[int, ...]) -> Tensor:
    """i.i.d. 표준정규 Tensor. rng counter 를 1 증가시킨다."""
    return Tensor._wrap(rng.standard_normal(tuple(shape)), where="gaussian")
