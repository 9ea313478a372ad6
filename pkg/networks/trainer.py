"""mini-batch 학습 루프 + validation 기반 early stopping.

학습 대상(loss 정의)은 TrainingTask 가, 최적화/조기 종료/체크포인트는 여기서
맡는다. 같은 seed 면 같은 체크포인트가 나온다.
"""

import logging
import math
from typing import Any, Protocol, Sequence

import numpy as np
from tqdm import tqdm

from diffusion.schemas import ScheduleConfig
from modules.autograd import RngStream
from modules.autograd.exceptions import NonFiniteError
from networks.checkpoint import ModelCheckpoint
from networks.exceptions import (
    DivergenceError,
    InvalidConfigError,
    PatientOverlapError,
)
from networks.optim import Adam
from networks.schemas import TrainerConfig, TrainingProvenance
from networks.unet import UNet

logger = logging.getLogger("training")

# 학습 셔플/노이즈 스트림 id
TRAIN_STREAM = 1


class TrainingTask(Protocol):
    name: str
    unet: UNet
    schedule: ScheduleConfig | None

    def loss_and_grads(
        self,
        params: dict[str, np.ndarray],
        batch: Sequence[Any],
        rng: RngStream,
    ) -> tuple[float, dict[str, np.ndarray]]: ...

    def validation_loss(
        self, params: dict[str, np.ndarray], items: Sequence[Any]
    ) -> float: ...


def patients_of(items: Sequence[Any]) -> set[str]:
    return {str(item.patient_id) for item in items}


class EarlyStopping:
    """validation loss 가 min_delta 이상 좋아지지 않은 epoch 가 patience 번
    이어지면 멈춘다."""

    def __init__(self, patience: int, min_delta: float) -> None:
        self.patience = patience
        self.min_delta = min_delta
        self.best = math.inf
        self.best_epoch = 0
        self.bad_epochs = 0

    def update(self, epoch: int, loss: float) -> bool:
        """개선됐으면 True"""
        if loss < self.best - self.min_delta:
            self.best = loss
            self.best_epoch = epoch
            self.bad_epochs = 0
            return True
        self.bad_epochs += 1
        return False

    @property
    def should_stop(self) -> bool:
        return self.bad_epochs >= self.patience


def _check_finite_grads(
    grads: dict[str, np.ndarray], epoch: int, step: int
) -> None:
    for name, grad in grads.items():
        if not np.all(np.isfinite(grad)):
            raise DivergenceError(
                f"non-finite gradient for {name}", epoch, step
            )


def train(
    task: TrainingTask,
    train_set: Sequence[Any],
    val_set: Sequence[Any],
    cfg: TrainerConfig,
    init_seed: int = 0,
    progress: bool = False,
    allow_patient_overlap: bool = False,
) -> ModelCheckpoint:
    """가장 좋은 validation loss 시점의 체크포인트를 돌려준다.

    allow_patient_overlap 은 학습 입력으로 그대로 validation 하는 설정 전용.
    """
    if not train_set or not val_set:
        raise InvalidConfigError("train and validation sets must be nonempty")
    train_patients = patients_of(train_set)
    val_patients = patients_of(val_set)
    overlap = train_patients & val_patients
    if overlap and not allow_patient_overlap:
        raise PatientOverlapError(
            f"patients in both train and validation: {sorted(overlap)}"
        )

    rng = RngStream(cfg.seed, TRAIN_STREAM)
    optimizer = Adam(cfg)
    stopper = EarlyStopping(cfg.patience, cfg.min_delta)
    params = {k: np.array(v) for k, v in task.unet.params.items()}
    best_params = params
    provenance = TrainingProvenance(
        task=task.name,
        seed=cfg.seed,
        init_seed=init_seed,
        train_patients=sorted(train_patients),
        val_patients=sorted(val_patients),
    )
    logger.info(
        "start training %s: %d train / %d val items, %d parameters",
        task.name,
        len(train_set),
        len(val_set),
        task.unet.param_count,
    )

    epochs = tqdm(
        range(1, cfg.max_epochs + 1), desc=task.name, disable=not progress
    )
    for epoch in epochs:
        order = rng.permutation(len(train_set))
        losses: list[float] = []
        for step, start in enumerate(range(0, len(order), cfg.batch_size)):
            indices = order[start : start + cfg.batch_size]
            batch = [train_set[i] for i in indices]
            try:
                loss, grads = task.loss_and_grads(params, batch, rng)
            except NonFiniteError as e:
                raise DivergenceError(str(e), epoch, step) from e
            if not math.isfinite(loss):
                raise DivergenceError("non-finite training loss", epoch, step)
            _check_finite_grads(grads, epoch, step)
            params = optimizer.step(params, grads)
            losses.append(loss)

        train_loss = math.fsum(losses) / len(losses)
        try:
            val_loss = task.validation_loss(params, val_set)
        except NonFiniteError as e:
            raise DivergenceError(str(e), epoch, -1) from e
        if not math.isfinite(val_loss):
            raise DivergenceError("non-finite validation loss", epoch, -1)

        if stopper.update(epoch, val_loss):
            best_params = params
        provenance.epochs = epoch
        provenance.train_losses.append(train_loss)
        provenance.val_losses.append(val_loss)
        logger.info(
            "%s epoch %d: train %.6f val %.6f best %.6f (epoch %d) "
            "patience %d/%d",
            task.name,
            epoch,
            train_loss,
            val_loss,
            stopper.best,
            stopper.best_epoch,
            stopper.bad_epochs,
            cfg.patience,
        )
        if stopper.should_stop:
            provenance.stopped_early = True
            logger.info("%s early stop at epoch %d", task.name, epoch)
            break

    provenance.best_epoch = stopper.best_epoch
    provenance.best_val_loss = stopper.best
    return ModelCheckpoint(
        config=task.unet.cfg,
        params=best_params,
        schedule=task.schedule,
        provenance=provenance,
    )
