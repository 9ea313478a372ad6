from dataclasses import dataclass, field

from common.models import SerializableMixin
from networks.exceptions import InvalidConfigError

INIT_SCHEMES = ("he_uniform", "dirac")


@dataclass(frozen=True)
class UNetConfig(SerializableMixin):
    levels: int = 3
    base_channels: int = 16
    growth: int = 2
    in_channels: int = 1
    out_channels: int = 1
    time_conditioned: bool = False
    time_embed_dim: int = 32
    # he_uniform: fan-in uniform, dirac: identity 에 가까운 초기값 (corrector)
    init: str = "he_uniform"

    def __post_init__(self) -> None:
        if self.levels < 1:
            raise InvalidConfigError(f"levels must be >= 1 ({self.levels})")
        if self.base_channels < 1 or self.growth < 1:
            raise InvalidConfigError("base_channels and growth must be >= 1")
        if self.in_channels < 1 or self.out_channels < 1:
            raise InvalidConfigError("channel counts must be >= 1")
        if self.time_conditioned and (
            self.time_embed_dim < 2 or self.time_embed_dim % 2
        ):
            raise InvalidConfigError(
                f"time_embed_dim must be even and >= 2 "
                f"(got {self.time_embed_dim})"
            )
        if self.init not in INIT_SCHEMES:
            raise InvalidConfigError(
                f"init must be one of {INIT_SCHEMES} (got {self.init})"
            )

    def channels(self, level: int) -> int:
        return self.base_channels * self.growth**level

    @property
    def divisor(self) -> int:
        """입력 H, W 가 나누어떨어져야 하는 값 (2^levels)"""
        return 2**self.levels


@dataclass(frozen=True)
class TrainerConfig(SerializableMixin):
    lr: float = 1e-3
    batch_size: int = 6
    max_epochs: int = 200
    patience: int = 10
    min_delta: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0

    def __post_init__(self) -> None:
        if self.lr <= 0 or self.batch_size < 1 or self.max_epochs < 1:
            raise InvalidConfigError(
                "lr must be > 0, batch_size and max_epochs >= 1"
            )
        if self.patience < 1 or self.min_delta < 0:
            raise InvalidConfigError("patience >= 1 and min_delta >= 0")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise InvalidConfigError("Adam betas must be in [0, 1)")


@dataclass
class TrainingProvenance(SerializableMixin):
    task: str = ""
    seed: int = 0
    init_seed: int = 0
    epochs: int = 0
    best_epoch: int = 0
    best_val_loss: float | None = None
    train_losses: list[float] = field(default_factory=list)
    val_losses: list[float] = field(default_factory=list)
    stopped_early: bool = False
    train_patients: list[str] = field(default_factory=list)
    val_patients: list[str] = field(default_factory=list)
