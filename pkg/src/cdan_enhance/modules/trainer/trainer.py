import logging
import os
import time
from typing import Dict, List, NamedTuple, Optional

import numpy as np
import pandas as pd

from cdan_enhance.core.models.errors import NonFiniteError, NonFiniteLossError
from cdan_enhance.core.models.schema import (
    CdanConfig,
    CheckpointMeta,
    LossRecord,
    TrainConfig,
    TrainSummary,
)
from cdan_enhance.data.cdan_dataloader import ImagePair, PairedDataLoader
from cdan_enhance.data.checkpoint import CHECKPOINT_SUFFIX, save_checkpoint
from cdan_enhance.modules.loss.losses import CompositeLoss, LossTerms
from cdan_enhance.modules.model.cdan_model import CdanModel, build_model
from cdan_enhance.modules.trainer.adam import Adam

logger = logging.getLogger(__name__)

LOSS_CSV_NAME = "loss_history.csv"
LOSS_CSV_COLUMNS = ["step", "epoch", "mse", "perceptual", "composite"]
FINAL_CHECKPOINT_NAME = f"cdan_final{CHECKPOINT_SUFFIX}"
ABORT_CHECKPOINT_NAME = f"cdan_last_finite{CHECKPOINT_SUFFIX}"


def epoch_checkpoint_name(epoch: int) -> str:
    return f"cdan_epoch{epoch:03d}{CHECKPOINT_SUFFIX}"


class TrainResult(NamedTuple):
    model: CdanModel
    history: List[LossRecord]
    summary: TrainSummary


def write_loss_history(history: List[LossRecord], path: str):
    frame = pd.DataFrame([r.model_dump() for r in history], columns=LOSS_CSV_COLUMNS)
    frame.to_csv(path, index=False)


def snapshot_buffers(model: CdanModel) -> Dict[str, np.ndarray]:
    return {name: buf.copy() for name, buf in model.named_buffers()}


def restore_buffers(model: CdanModel, snapshot: Dict[str, np.ndarray]):
    for name, buf in model.named_buffers():
        buf[...] = snapshot[name]


def _terms_as_dict(terms: Optional[LossTerms]) -> dict:
    if terms is None:
        return {}
    return {name: float(t.item()) for name, t in terms._asdict().items()}


class CdanTrainer:
    """Owns one model and its optimizer for the length of a training run."""

    def __init__(
        self,
        model_config: CdanConfig,
        train_config: TrainConfig,
        loss: CompositeLoss,
    ):
        self.model_config = model_config
        self.config = train_config
        self.loss = loss

    def _meta(self, epoch: int, step: int) -> CheckpointMeta:
        return CheckpointMeta(
            config=self.model_config, seed=self.config.seed, epoch=epoch, step=step
        )

    def _abort(
        self,
        model: CdanModel,
        out_dir: str,
        epoch: int,
        step: int,
        terms: Optional[LossTerms],
        history: List[LossRecord],
        reason: str,
        buffers: Dict[str, np.ndarray],
    ):
        # parameters still hold the last finite step; the failed forward moved the BN buffers
        restore_buffers(model, buffers)
        last_step = step - 1
        save_checkpoint(
            model, self._meta(epoch, last_step), os.path.join(out_dir, ABORT_CHECKPOINT_NAME)
        )
        write_loss_history(history, os.path.join(out_dir, LOSS_CSV_NAME))
        values = _terms_as_dict(terms)
        logger.error(
            f"[Trainer] Non-finite values at step {step} (epoch {epoch}): {reason}; "
            f"loss terms {values}. Last finite state (step {last_step}) saved."
        )
        raise NonFiniteLossError(
            f"Training aborted at step {step}: {reason}", step=step, terms=values
        )

    def train(self, pairs: List[ImagePair], out_dir: str) -> TrainResult:
        cfg = self.config
        os.makedirs(out_dir, exist_ok=True)
        loader = PairedDataLoader(pairs, cfg.batch_size, cfg.seed)
        model = build_model(self.model_config, cfg.seed)
        optimizer = Adam(
            model.named_parameters(), cfg.lr, cfg.beta1, cfg.beta2, cfg.eps
        )
        model.train()

        logger.info(
            f"[Trainer] {len(pairs)} pairs, {len(loader)} steps/epoch, "
            f"{cfg.epochs} epochs, batch {cfg.batch_size}, lr {cfg.lr}, "
            f"loss {self.loss.config.loss_type} (lambda {self.loss.config.lambda_perceptual})."
        )
        history: List[LossRecord] = []
        step = 0
        epoch = 0
        start = time.time()
        finished = False
        for epoch in range(1, cfg.epochs + 1):
            for low, high, _ in loader.batches(epoch):
                step += 1
                terms = None
                buffers = snapshot_buffers(model)
                try:
                    pred = model(low)
                    terms = self.loss(pred, high)
                    terms.composite.backward()
                except NonFiniteError as ex:
                    self._abort(model, out_dir, epoch, step, terms, history, ex.msg, buffers)
                bad = [
                    name
                    for name, p in optimizer.params
                    if p.grad is not None and not np.isfinite(p.grad).all()
                ]
                if bad:
                    self._abort(
                        model, out_dir, epoch, step, terms, history,
                        f"non-finite gradient for '{bad[0]}'",
                        buffers,
                    )
                optimizer.step()

                record = LossRecord(step=step, epoch=epoch, **_terms_as_dict(terms))
                history.append(record)
                if step % cfg.log_interval == 0 or step == 1:
                    logger.info(
                        f"[Trainer] epoch {epoch} step {step}: mse {record.mse:.6f}, "
                        f"perceptual {record.perceptual:.6f}, composite {record.composite:.6f} "
                        f"({time.time() - start:.1f}s)."
                    )
                if cfg.max_steps is not None and step >= cfg.max_steps:
                    finished = True
                    break

            if epoch % cfg.checkpoint_every == 0:
                save_checkpoint(
                    model,
                    self._meta(epoch, step),
                    os.path.join(out_dir, epoch_checkpoint_name(epoch)),
                )
            if finished:
                logger.info(f"[Trainer] Reached max_steps {cfg.max_steps}.")
                break

        final_path = os.path.join(out_dir, FINAL_CHECKPOINT_NAME)
        save_checkpoint(model, self._meta(epoch, step), final_path)
        loss_csv = os.path.join(out_dir, LOSS_CSV_NAME)
        write_loss_history(history, loss_csv)
        model.eval()

        summary = TrainSummary(
            checkpoint=final_path,
            loss_csv=loss_csv,
            steps=step,
            final_loss=history[-1].composite if history else float("nan"),
        )
        logger.info(
            f"[Trainer] Finished {step} steps in {time.time() - start:.1f}s, "
            f"final loss {summary.final_loss:.6f}."
        )
        return TrainResult(model=model, history=history, summary=summary)
