from abc import ABC, abstractmethod
from typing import Any, Dict, List, Optional, Type
import logging

from pydantic import BaseModel, ValidationError

from cdan_enhance.core.models.errors import UserInputError
from cdan_enhance.modules.base.module_constants import MODULE_PARAM_CONFIG

logger = logging.getLogger(__name__)


def _plain(value: Any) -> Any:
    # dynaconf boxes are dict/list subclasses; pydantic wants plain containers
    if hasattr(value, "to_dict"):
        return value.to_dict()
    if isinstance(value, dict):
        return {k: _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    return value


class ConfigurableModule(ABC):
    """Configurable Module

    Builds one component from its settings table and the instances of the
    modules it depends on. `config_model` validates the table.
    """

    config_model: Optional[Type[BaseModel]] = None

    @abstractmethod
    def _create_new_instance(self, new_params: Dict[str, Any]):
        raise NotImplementedError

    @staticmethod
    @abstractmethod
    def get_dependencies() -> List[str]:
        raise NotImplementedError

    def parse_config(self, new_params: Dict[str, Any]) -> BaseModel:
        raw = _plain(new_params.get(MODULE_PARAM_CONFIG) or {})
        try:
            return self.config_model(**{k.lower(): v for k, v in raw.items()})
        except ValidationError as ex:
            raise UserInputError(
                f"Invalid settings for {type(self).__name__}: {ex}"
            ) from ex

    def get_or_create(self, new_params: Dict[str, Any]):
        return self._create_new_instance(new_params)
