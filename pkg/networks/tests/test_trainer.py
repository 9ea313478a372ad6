import math
from dataclasses import dataclass

import numpy as np
import pytest

from modules.autograd import RngStream
from modules.autograd.exceptions import NonFiniteError
from networks.checkpoint import save_checkpoint
from networks.exceptions import (
    DivergenceError,
    InvalidConfigError,
    PatientOverlapError,
)
from networks.schemas import TrainerConfig, UNetConfig
from networks.tasks import CorrectorTask
from networks.trainer import EarlyStopping, train
from networks.unet import build_unet


@dataclass
class Item:
    patient_id: str


class ScriptedTask:
    """validation loss 를 미리 정해 둔 순서대로 돌려주는 task"""

    name = "scripted"
    schedule = None

    def __init__(self, unet, val_losses, train_loss=1.0):
        self.unet = unet
        self.val_losses = list(val_losses)
        self.train_loss = train_loss
        self.seen: list[dict] = []

    def loss_and_grads(self, params, batch, rng):
        grads = {k: np.ones_like(v) for k, v in params.items()}
        return self.train_loss, grads

    def validation_loss(self, params, items):
        self.seen.append({k: v.copy() for k, v in params.items()})
        return self.val_losses[len(self.seen) - 1]


class ExplodingTask(ScriptedTask):
    def loss_and_grads(self, params, batch, rng):
        raise NonFiniteError("conv2d")


TRAIN = [Item("a"), Item("a"), Item("b")]
VAL = [Item("c")]


class TestEarlyStopping:
    def test_patience_counts_non_improving_epochs(self):
        stopper = EarlyStopping(patience=2, min_delta=0.1)
        assert stopper.update(1, 1.0)
        assert not stopper.update(2, 0.95)
        assert not stopper.should_stop
        assert not stopper.update(3, 0.99)
        assert stopper.should_stop
        assert (stopper.best, stopper.best_epoch) == (1.0, 1)

    def test_improvement_resets_counter(self):
        stopper = EarlyStopping(patience=2, min_delta=0.0)
        stopper.update(1, 1.0)
        stopper.update(2, 1.0)
        assert stopper.update(3, 0.5)
        assert stopper.bad_epochs == 0


class TestTrain:
    def test_worsening_validation_returns_earlier_checkpoint(self, tiny_cfg):
        unet = build_unet(tiny_cfg, RngStream(0))
        task = ScriptedTask(unet, [1.0, 0.5, 0.6, 0.7, 0.8, 0.9])
        cfg = TrainerConfig(patience=3, max_epochs=20, batch_size=2)
        ckpt = train(task, TRAIN, VAL, cfg)
        assert ckpt.provenance.epochs == 5
        assert ckpt.provenance.best_epoch == 2
        assert ckpt.provenance.best_val_loss == 0.5
        assert ckpt.provenance.stopped_early
        assert ckpt.provenance.val_losses == [1.0, 0.5, 0.6, 0.7, 0.8]
        for name, value in task.seen[1].items():
            np.testing.assert_array_equal(ckpt.params[name], value)
        assert not np.array_equal(
            ckpt.params["out.w"], task.seen[-1]["out.w"]
        )

    def test_provenance_records_patients(self, tiny_cfg):
        unet = build_unet(tiny_cfg, RngStream(0))
        task = ScriptedTask(unet, [1.0, 0.9])
        ckpt = train(task, TRAIN, VAL, TrainerConfig(max_epochs=2, seed=4))
        assert ckpt.provenance.train_patients == ["a", "b"]
        assert ckpt.provenance.val_patients == ["c"]
        assert ckpt.provenance.seed == 4
        assert not ckpt.provenance.stopped_early

    def test_patient_overlap_is_rejected(self, tiny_cfg):
        task = ScriptedTask(build_unet(tiny_cfg, RngStream(0)), [1.0])
        with pytest.raises(PatientOverlapError):
            train(task, TRAIN, [Item("b")], TrainerConfig())

    def test_empty_sets_are_rejected(self, tiny_cfg):
        task = ScriptedTask(build_unet(tiny_cfg, RngStream(0)), [1.0])
        with pytest.raises(InvalidConfigError):
            train(task, [], VAL, TrainerConfig())

    def test_non_finite_loss_aborts(self, tiny_cfg):
        unet = build_unet(tiny_cfg, RngStream(0))
        task = ScriptedTask(unet, [1.0], train_loss=math.nan)
        with pytest.raises(DivergenceError) as excinfo:
            train(task, TRAIN, VAL, TrainerConfig())
        assert (excinfo.value.epoch, excinfo.value.step) == (1, 0)

    def test_non_finite_forward_aborts(self, tiny_cfg):
        unet = build_unet(tiny_cfg, RngStream(0))
        task = ExplodingTask(unet, [1.0])
        with pytest.raises(DivergenceError):
            train(task, TRAIN, VAL, TrainerConfig())


class TestCorrectorTraining:
    def test_same_seed_gives_identical_checkpoints(
        self, corrector_cfg, identity_pairs, tmp_path
    ):
        train_set = identity_pairs(["p1", "p2"], 3, seed=1)
        val_set = identity_pairs(["p3"], 2, seed=2)
        cfg = TrainerConfig(max_epochs=2, seed=11)
        paths = []
        for run in range(2):
            task = CorrectorTask(build_unet(corrector_cfg, RngStream(0)))
            ckpt = train(task, train_set, val_set, cfg)
            paths.append(save_checkpoint(ckpt, tmp_path / f"{run}.ckpt"))
        assert paths[0].read_bytes() == paths[1].read_bytes()

    def test_training_loss_decreases(self, corrector_cfg, identity_pairs):
        train_set = identity_pairs(["p1", "p2"], 5, seed=3)
        val_set = identity_pairs(["p3"], 2, seed=4)
        task = CorrectorTask(build_unet(corrector_cfg, RngStream(1)))
        cfg = TrainerConfig(max_epochs=20, patience=20, seed=2)
        ckpt = train(task, train_set, val_set, cfg)
        losses = ckpt.provenance.train_losses
        assert losses[-1] < losses[0]

    def test_identity_is_learnable_from_random_init(self, identity_pairs):
        """He-uniform 초기값에서 (clean, clean) 학습 시 val loss 가 줄어든다."""
        train_set = identity_pairs([f"t{i}" for i in range(4)], 5, seed=5)
        val_set = identity_pairs(["v0", "v1"], 2, seed=6)
        unet_cfg = UNetConfig(levels=1, base_channels=4, init="he_uniform")
        task = CorrectorTask(build_unet(unet_cfg, RngStream(2)))
        initial = task.validation_loss(task.unet.params, val_set)
        cfg = TrainerConfig(max_epochs=50, patience=50, seed=3)
        ckpt = train(task, train_set, val_set, cfg)
        assert ckpt.provenance.best_val_loss < initial

    def test_identity_reaches_low_loss_from_dirac_init(
        self, corrector_cfg, identity_pairs
    ):
        """dirac 초기값에서 (clean, clean) 학습 시 val SSIM loss 가 0.01 미만"""
        train_set = identity_pairs([f"t{i}" for i in range(4)], 5, seed=5)
        val_set = identity_pairs(["v0", "v1"], 2, seed=6)
        task = CorrectorTask(build_unet(corrector_cfg, RngStream(2)))
        cfg = TrainerConfig(max_epochs=50, patience=50, seed=3)
        ckpt = train(task, train_set, val_set, cfg)
        assert ckpt.provenance.best_val_loss < 0.01
