from typing import Any, Dict, List
import logging

from cdan_enhance.core.models.schema import LossConfig
from cdan_enhance.data.checkpoint import read_archive
from cdan_enhance.modules.base.configurable_module import ConfigurableModule
from cdan_enhance.modules.loss.feature_extractor import FeatureExtractor
from cdan_enhance.modules.loss.losses import CompositeLoss

logger = logging.getLogger(__name__)


def needs_extractor(config: LossConfig) -> bool:
    if config.loss_type == "perceptual":
        return True
    return config.loss_type == "composite" and config.lambda_perceptual > 0.0


def build_extractor(config: LossConfig) -> FeatureExtractor:
    extractor = FeatureExtractor(config.feature_depth, config.normalize_input)
    if config.vgg_weights:
        _, tensors = read_archive(config.vgg_weights)
        return extractor.load_weights(tensors)
    logger.warning(
        "[FeatureExtractor] No pretrained weights configured; using seeded random "
        "weights. Export VGG19 weights with `load_model` for faithful perceptual loss."
    )
    return extractor.initialize_random(config.extractor_seed)


class FeatureExtractorModule(ConfigurableModule):
    config_model = LossConfig

    @staticmethod
    def get_dependencies() -> List[str]:
        return []

    def _create_new_instance(self, new_params: Dict[str, Any]):
        config = self.parse_config(new_params)
        if not needs_extractor(config):
            logger.info(
                f"[FeatureExtractor] Not needed for loss '{config.loss_type}' "
                f"(lambda {config.lambda_perceptual})."
            )
            return None
        return build_extractor(config)


class LossModule(ConfigurableModule):
    config_model = LossConfig

    @staticmethod
    def get_dependencies() -> List[str]:
        return ["FeatureExtractorModule"]

    def _create_new_instance(self, new_params: Dict[str, Any]):
        config = self.parse_config(new_params)
        extractor = new_params["FeatureExtractorModule"]
        logger.info(
            f"[Loss] Using '{config.loss_type}' loss, lambda {config.lambda_perceptual}, "
            f"feature depth {config.feature_depth}."
        )
        return CompositeLoss(config, extractor)
