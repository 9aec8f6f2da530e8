import logging
import os

import numpy as np
import pandas as pd
import pytest

from cdan_enhance.core.models.errors import NonFiniteError, NonFiniteLossError
from cdan_enhance.core.models.schema import CdanConfig, LossConfig, TrainConfig
from cdan_enhance.data.cdan_dataloader import ImagePair
from cdan_enhance.data.checkpoint import load_checkpoint
from cdan_enhance.modules.loss.feature_extractor import FeatureExtractor
from cdan_enhance.modules.loss.losses import CompositeLoss
from cdan_enhance.modules.model.model_module import ModelFactory
from cdan_enhance.modules.trainer.trainer import (
    ABORT_CHECKPOINT_NAME,
    FINAL_CHECKPOINT_NAME,
    LOSS_CSV_COLUMNS,
    LOSS_CSV_NAME,
    CdanTrainer,
    epoch_checkpoint_name,
)
from cdan_enhance.modules.trainer.trainer_module import TrainerModule

SMALL_MODEL = CdanConfig(
    encoder_channels=[3, 4, 4, 4, 4],
    decoder_channels=[4, 4, 4, 4, 4],
    dense_layers=1,
    growth_rate=2,
    cbam_reduction=2,
)


def _pairs(n=4, size=16, seed=0):
    rng = np.random.default_rng(seed)
    pairs = []
    for i in range(n):
        high = rng.random((3, size, size))
        pairs.append(ImagePair(id=f"{i:02d}", low=0.2 * high, high=high))
    return pairs


def _trainer(loss=None, model=SMALL_MODEL, **train):
    values = dict(epochs=2, batch_size=2, checkpoint_every=1, log_interval=1, seed=3)
    values.update(train)
    loss = loss or CompositeLoss(LossConfig(loss_type="l2"), None)
    return CdanTrainer(model, TrainConfig(**values), loss)


def test_training_writes_checkpoints_and_history(tmp_path):
    result = _trainer().train(_pairs(), str(tmp_path))
    assert result.summary.steps == 4
    assert not result.model.training
    for name in (epoch_checkpoint_name(1), epoch_checkpoint_name(2), FINAL_CHECKPOINT_NAME):
        assert (tmp_path / name).exists(), name

    frame = pd.read_csv(tmp_path / LOSS_CSV_NAME)
    assert list(frame.columns) == LOSS_CSV_COLUMNS
    assert frame["step"].tolist() == [1, 2, 3, 4]
    assert frame["epoch"].tolist() == [1, 1, 2, 2]
    assert (frame["perceptual"] == 0.0).all()
    assert result.summary.final_loss == pytest.approx(frame["composite"].iloc[-1])

    model, meta = load_checkpoint(result.summary.checkpoint)
    assert meta.step == 4 and meta.epoch == 2 and meta.seed == 3
    for name, value in result.model.state_dict().items():
        assert np.array_equal(model.state_dict()[name], value), name


def test_training_is_deterministic(tmp_path):
    first = _trainer(epochs=5).train(_pairs(), str(tmp_path / "a"))
    second = _trainer(epochs=5).train(_pairs(), str(tmp_path / "b"))
    assert [r.composite for r in first.history] == [r.composite for r in second.history]
    for name, value in first.model.state_dict().items():
        assert np.array_equal(second.model.state_dict()[name], value), name


def test_composite_loss_records_both_terms(tmp_path):
    extractor = FeatureExtractor(depth=4).initialize_random(7)
    loss = CompositeLoss(
        LossConfig(loss_type="composite", lambda_perceptual=0.25, feature_depth=4), extractor
    )
    result = _trainer(loss=loss, epochs=1).train(_pairs(), str(tmp_path))
    for record in result.history:
        assert record.perceptual > 0.0
        assert record.composite == pytest.approx(
            record.mse + 0.25 * record.perceptual, rel=1e-12
        )


def test_max_steps_stops_early(tmp_path):
    result = _trainer(epochs=5, max_steps=3, checkpoint_every=10).train(
        _pairs(), str(tmp_path)
    )
    assert result.summary.steps == 3
    _, meta = load_checkpoint(str(tmp_path / FINAL_CHECKPOINT_NAME))
    assert meta.step == 3 and meta.epoch == 2
    assert not (tmp_path / epoch_checkpoint_name(1)).exists()


class FailingLoss(CompositeLoss):
    def __init__(self, fail_at: int):
        super().__init__(LossConfig(loss_type="l2"), None)
        self.calls = 0
        self.fail_at = fail_at

    def __call__(self, pred, target):
        self.calls += 1
        if self.calls == self.fail_at:
            raise NonFiniteError("mse produced nan")
        return super().__call__(pred, target)


def test_non_finite_loss_aborts_with_last_finite_state(tmp_path, caplog):
    with caplog.at_level(logging.ERROR):
        with pytest.raises(NonFiniteLossError) as info:
            _trainer(loss=FailingLoss(fail_at=2)).train(_pairs(), str(tmp_path))
    assert info.value.step == 2
    assert "Non-finite values at step 2" in caplog.text

    aborted, meta = load_checkpoint(str(tmp_path / ABORT_CHECKPOINT_NAME))
    assert meta.step == 1
    assert len(pd.read_csv(tmp_path / LOSS_CSV_NAME)) == 1

    # parameters and batch-norm buffers both match a clean one-step run
    reference = _trainer(max_steps=1).train(_pairs(), str(tmp_path / "reference")).model
    expected = reference.state_dict()
    restored = aborted.state_dict()
    assert any(name.endswith("running_mean") for name in expected)
    mismatched = [n for n in expected if not np.array_equal(expected[n], restored[n])]
    assert mismatched == []


def test_trainer_module_builds_from_settings():
    loss = CompositeLoss(LossConfig(loss_type="l1"), None)
    trainer = TrainerModule().get_or_create(
        {
            "config": {"EPOCHS": 3, "lr": 0.01},
            "ModelModule": ModelFactory(SMALL_MODEL),
            "LossModule": loss,
        }
    )
    assert trainer.config.epochs == 3
    assert trainer.config.lr == 0.01
    assert trainer.model_config == SMALL_MODEL
    assert trainer.loss is loss


@pytest.mark.slow
def test_default_model_overfits_single_pair(tmp_path):
    yy, xx = np.mgrid[0:64, 0:64] / 63.0
    high = np.stack([0.2 + 0.6 * xx, 0.3 + 0.5 * yy, 0.5 + 0.3 * xx * yy])
    pair = ImagePair(id="smooth", low=0.15 * high, high=high)
    loss = CompositeLoss(LossConfig(loss_type="composite", lambda_perceptual=0.0), None)
    trainer = CdanTrainer(
        CdanConfig(),
        TrainConfig(epochs=200, batch_size=1, checkpoint_every=1000, log_interval=50, seed=0),
        loss,
    )
    result = trainer.train([pair], str(tmp_path))
    per_pixel = result.history[-1].mse / (3 * 64 * 64)
    assert per_pixel < 0.01
    assert result.history[-1].mse < result.history[0].mse
