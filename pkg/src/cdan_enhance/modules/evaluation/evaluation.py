from typing import Any, Dict, List

from cdan_enhance.core.models.schema import EvaluationConfig
from cdan_enhance.modules.base.configurable_module import ConfigurableModule
from cdan_enhance.modules.evaluation.evaluator import Evaluator


class EvaluationModule(ConfigurableModule):
    """Directory evaluator scoring predictions against references."""

    config_model = EvaluationConfig

    @staticmethod
    def get_dependencies() -> List[str]:
        return []

    def _create_new_instance(self, new_params: Dict[str, Any]):
        config = self.parse_config(new_params)
        return Evaluator(workers=config.workers)
