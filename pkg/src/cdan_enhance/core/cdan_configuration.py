from dynaconf import Dynaconf, loaders
from dynaconf.utils.boxing import DynaBox

import logging
import os

logger = logging.getLogger(__name__)

ENVVAR_PREFIX = "CDAN"
DEFAULT_SNAPSHOT_FILE = "localdata/settings.snapshot.toml"


def _deep_merge(base: dict, overrides: dict) -> dict:
    result = dict(base)
    for key, value in overrides.items():
        if isinstance(value, dict) and isinstance(result.get(key), dict):
            result[key] = _deep_merge(result[key], value)
        else:
            result[key] = value
    return result


class CdanConfiguration:
    def __init__(self, config):
        self.config = config

    @classmethod
    def from_file(cls, config_file, snapshot_file=None):
        try:
            settings_files = [config_file]
            if snapshot_file:
                settings_files.append(snapshot_file)
            # `envvar_prefix` = override values with `export CDAN_CDAN__TRAIN__EPOCHS=10`.
            # `settings_files` = Load these files in the order.
            config = Dynaconf(
                envvar_prefix=ENVVAR_PREFIX,
                settings_files=settings_files,
                merge=True,
            )
            return cls(config)
        except Exception as error:
            logger.critical(f"Read config file {config_file} failed.")
            raise error

    def get_value(self, key=None):
        key = key or "cdan"  # use cdan key as default config
        return self.config[key]

    def update(self, new_value: dict):
        """Merge overrides such as {"train": {"epochs": 5}} into the cdan table.

        Tables merge key by key; lists and scalars are replaced whole.
        """
        merged = _deep_merge(self.config.get("cdan").to_dict(), new_value)
        self.config.set("cdan", merged, merge=False)

    def persist(self, path=DEFAULT_SNAPSHOT_FILE):
        """Save configuration to file."""
        data = self.config.as_dict()
        directory = os.path.dirname(path)
        if directory:
            os.makedirs(directory, exist_ok=True)
        loaders.write(path, DynaBox(data).to_dict(), merge=True)
        logger.info(f"Configuration snapshot written to {path}.")
