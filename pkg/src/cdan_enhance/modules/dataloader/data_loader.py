from typing import Any, Dict, List, Optional

from cdan_enhance.core.models.schema import DataConfig
from cdan_enhance.data.cdan_dataloader import ImagePair, load_paired_dataset
from cdan_enhance.modules.base.configurable_module import ConfigurableModule


class CdanDataLoader:
    """Loads paired datasets at the configured training resolution."""

    def __init__(self, config: DataConfig):
        self.config = config

    def load(self, root: str, split: Optional[str] = None) -> List[ImagePair]:
        return load_paired_dataset(
            root, split, self.config.train_size, self.config.prefetch_workers
        )


class DataLoaderModule(ConfigurableModule):
    config_model = DataConfig

    @staticmethod
    def get_dependencies() -> List[str]:
        return []

    def _create_new_instance(self, new_params: Dict[str, Any]):
        return CdanDataLoader(self.parse_config(new_params))
