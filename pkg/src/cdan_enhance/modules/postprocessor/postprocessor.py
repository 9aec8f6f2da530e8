"""Interpolation/extrapolation enhancement of 8-bit RGB images.

Every enhancer blends the image with a degenerate version of itself:

    out = degenerate * (1 - alpha) + original * alpha

alpha = 1 returns the original, alpha = 0 the degenerate image, alpha > 1
pushes away from the degenerate image. Results are clamped to [0, 255] and
rounded half-up.
"""

import logging
from typing import Any, Dict, List

import numpy as np

from cdan_enhance.core.models.errors import ImageFormatError, ShapeError
from cdan_enhance.core.models.schema import EnhanceConfig
from cdan_enhance.modules.base.configurable_module import ConfigurableModule

logger = logging.getLogger(__name__)

LUMA_WEIGHTS = np.array([0.299, 0.587, 0.114])


def _check_rgb(img: np.ndarray, what: str):
    if img.ndim != 3 or img.shape[2] != 3:
        raise ImageFormatError(f"{what} expects an H x W x 3 RGB image, got {img.shape}")


def _round_half_up(values: np.ndarray) -> np.ndarray:
    return np.floor(np.clip(values, 0.0, 255.0) + 0.5).astype(np.uint8)


def luma(img: np.ndarray) -> np.ndarray:
    """Per-pixel BT.601 luma, rounded half-up, H x W uint8."""
    _check_rgb(img, "luma")
    return _round_half_up(img.astype(np.float64) @ LUMA_WEIGHTS)


def grayscale(img: np.ndarray) -> np.ndarray:
    y = luma(img)
    return np.repeat(y[..., None], 3, axis=2)


def blend(degenerate: np.ndarray, original: np.ndarray, alpha: float) -> np.ndarray:
    if degenerate.shape != original.shape:
        raise ShapeError(
            f"blend: degenerate {degenerate.shape} vs original {original.shape}"
        )
    mixed = degenerate.astype(np.float64) * (1.0 - alpha) + original.astype(
        np.float64
    ) * alpha
    return _round_half_up(mixed)


def enhance_color(img: np.ndarray, alpha: float) -> np.ndarray:
    return blend(grayscale(img), img, alpha)


def enhance_contrast(img: np.ndarray, alpha: float) -> np.ndarray:
    """Blend against a constant gray image at the mean luma of `img`."""
    mean_luma = int(luma(img).mean() + 0.5)
    degenerate = np.full_like(img, mean_luma, dtype=np.uint8)
    return blend(degenerate, img, alpha)


def postprocess_pipeline(img: np.ndarray, config: EnhanceConfig) -> np.ndarray:
    """Contrast first, then color."""
    out = enhance_contrast(img, config.alpha_contrast)
    return enhance_color(out, config.alpha_color)


class Postprocessor:
    def __init__(self, config: EnhanceConfig):
        self.config = config
        if config.enabled:
            logger.info(
                f"[PostProcessor] contrast alpha {config.alpha_contrast}, "
                f"color alpha {config.alpha_color}."
            )
        else:
            logger.info("[PostProcessor] No post-processing used.")

    def __call__(self, img: np.ndarray) -> np.ndarray:
        if not self.config.enabled:
            return img
        return postprocess_pipeline(img, self.config)


class PostprocessorModule(ConfigurableModule):
    config_model = EnhanceConfig

    @staticmethod
    def get_dependencies() -> List[str]:
        return []

    def _create_new_instance(self, new_params: Dict[str, Any]):
        return Postprocessor(self.parse_config(new_params))
