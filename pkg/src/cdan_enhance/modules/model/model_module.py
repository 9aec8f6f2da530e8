from typing import Any, Dict, List
import logging

from cdan_enhance.core.models.schema import CdanConfig
from cdan_enhance.modules.base.configurable_module import ConfigurableModule
from cdan_enhance.modules.model.cdan_model import CdanModel, build_model

logger = logging.getLogger(__name__)


class ModelFactory:
    """Validated architecture config; builds seeded model instances."""

    def __init__(self, config: CdanConfig):
        self.config = config

    def build(self, seed: int) -> CdanModel:
        return build_model(self.config, seed)


class ModelModule(ConfigurableModule):
    config_model = CdanConfig

    @staticmethod
    def get_dependencies() -> List[str]:
        return []

    def _create_new_instance(self, new_params: Dict[str, Any]):
        config = self.parse_config(new_params)
        variant = [
            name
            for name, on in (
                ("skips", config.use_skips),
                ("attention", config.use_attention),
                ("dense", config.use_dense),
            )
            if on
        ]
        logger.info(
            f"[Model] Architecture encoder {config.encoder_channels}, decoder "
            f"{config.decoder_channels}, components: {', '.join(variant) or 'plain autoencoder'}."
        )
        return ModelFactory(config)
