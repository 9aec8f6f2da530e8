from typing import Any, Dict, List

from cdan_enhance.core.models.schema import TrainConfig
from cdan_enhance.modules.base.configurable_module import ConfigurableModule
from cdan_enhance.modules.trainer.trainer import CdanTrainer


class TrainerModule(ConfigurableModule):
    config_model = TrainConfig

    @staticmethod
    def get_dependencies() -> List[str]:
        return ["ModelModule", "LossModule"]

    def _create_new_instance(self, new_params: Dict[str, Any]):
        config = self.parse_config(new_params)
        model_factory = new_params["ModelModule"]
        loss = new_params["LossModule"]
        return CdanTrainer(model_factory.config, config, loss)
