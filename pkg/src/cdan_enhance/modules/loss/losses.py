"""Pixel, perceptual and composite losses.

All losses are batch means of per-sample sums:

    L_mse        = 1/N sum_i ||pred_i - target_i||_2^2
    L_perceptual = 1/N sum_i ||phi(pred_i) - phi(target_i)||_2^2
    L_composite  = L_mse + lambda * L_perceptual
"""

import logging
from typing import NamedTuple, Optional, Protocol

from cdan_enhance.core.models.errors import ExtractorNotInitializedError, ShapeError
from cdan_enhance.core.models.schema import LossConfig
from cdan_enhance.engine import functional as F
from cdan_enhance.engine.tensor import Tensor, no_grad

logger = logging.getLogger(__name__)


class Extractor(Protocol):
    initialized: bool

    def extract(self, x: Tensor) -> Tensor: ...


class LossTerms(NamedTuple):
    mse: Tensor
    perceptual: Tensor
    composite: Tensor


def _check_pair(pred: Tensor, target: Tensor, what: str):
    if pred.shape != target.shape:
        raise ShapeError(f"{what}: prediction {pred.shape} vs target {target.shape}")
    if pred.ndim < 1 or pred.shape[0] < 1:
        raise ShapeError(f"{what}: expected a batched tensor, got {pred.shape}")


def mse_loss(pred: Tensor, target: Tensor) -> Tensor:
    _check_pair(pred, target, "mse_loss")
    diff = F.sub(pred, target)
    return F.scale(F.sum_(F.square(diff)), 1.0 / pred.shape[0])


def l1_loss(pred: Tensor, target: Tensor) -> Tensor:
    _check_pair(pred, target, "l1_loss")
    diff = F.sub(pred, target)
    return F.scale(F.sum_(F.abs_(diff)), 1.0 / pred.shape[0])


def perceptual_loss(extractor: Optional[Extractor], pred: Tensor, target: Tensor) -> Tensor:
    _check_pair(pred, target, "perceptual_loss")
    if extractor is None or not extractor.initialized:
        raise ExtractorNotInitializedError(
            "perceptual_loss needs an initialized feature extractor"
        )
    with no_grad():
        target_features = extractor.extract(target.detach())
    pred_features = extractor.extract(pred)
    return mse_loss(pred_features, target_features)


def composite_loss(
    config: LossConfig,
    extractor: Optional[Extractor],
    pred: Tensor,
    target: Tensor,
) -> LossTerms:
    """Return the pixel term, the perceptual term and their weighted sum.

    The reported `mse` slot holds the pixel term of the configured loss type
    (L1 for `l1`). Terms that do not contribute are reported as 0 and not
    computed.
    """
    zero = Tensor(0.0)
    loss_type = config.loss_type
    if loss_type == "perceptual":
        pixel = zero
    elif loss_type == "l1":
        pixel = l1_loss(pred, target)
    else:
        pixel = mse_loss(pred, target)

    needs_perceptual = loss_type == "perceptual" or (
        loss_type == "composite" and config.lambda_perceptual > 0.0
    )
    if not needs_perceptual:
        return LossTerms(pixel, zero, pixel)

    perceptual = perceptual_loss(extractor, pred, target)
    if loss_type == "perceptual":
        return LossTerms(pixel, perceptual, perceptual)
    weighted = F.scale(perceptual, config.lambda_perceptual)
    return LossTerms(pixel, perceptual, F.add(pixel, weighted))


class CompositeLoss:
    """Loss callable bound to a config and a feature extractor."""

    def __init__(self, config: LossConfig, extractor: Optional[Extractor]):
        self.config = config
        self.extractor = extractor

    def __call__(self, pred: Tensor, target: Tensor) -> LossTerms:
        return composite_loss(self.config, self.extractor, pred, target)
