import numpy as np

from networks.schemas import TrainerConfig
from networks.unet import to_float32_grid


class Adam:
    """Adam (bias correction 포함). moment 는 float64 로 유지하고, 갱신된
    파라미터는 float32 격자로 반올림해 체크포인트와 bit 단위로 일치시킨다."""

    def __init__(self, cfg: TrainerConfig) -> None:
        self.lr = cfg.lr
        self.beta1 = cfg.beta1
        self.beta2 = cfg.beta2
        self.eps = cfg.eps
        self.step_count = 0
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}

    def step(
        self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]
    ) -> dict[str, np.ndarray]:
        self.step_count += 1
        t = self.step_count
        updated: dict[str, np.ndarray] = {}
        for name, value in params.items():
            grad = np.asarray(grads[name], dtype=np.float64)
            m = self.beta1 * self.m.get(name, 0.0) + (1 - self.beta1) * grad
            v = self.beta2 * self.v.get(name, 0.0) + (1 - self.beta2) * (
                grad * grad
            )
            self.m[name], self.v[name] = m, v
            m_hat = m / (1 - self.beta1**t)
            v_hat = v / (1 - self.beta2**t)
            updated[name] = to_float32_grid(
                value - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)
            )
        return updated
