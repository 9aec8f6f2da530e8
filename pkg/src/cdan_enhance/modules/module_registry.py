import hashlib
import json
from collections import OrderedDict
from typing import Any, Dict, Iterable, Optional, Set
from cdan_enhance.modules.base.module_constants import MODULE_PARAM_CONFIG
import cdan_enhance.modules as modules
import logging

MODULE_CONFIG_KEY_MAP = {
    "ModelModule": "model",
    "FeatureExtractorModule": "loss",
    "LossModule": "loss",
    "DataLoaderModule": "data",
    "TrainerModule": "train",
    "PostprocessorModule": "postprocess",
    "EvaluationModule": "evaluation",
}


# least recently used entries beyond these bounds are dropped
MAX_CACHED_CONFIGS = 8
MAX_CACHED_INSTANCES = 8


logger = logging.getLogger(__name__)


class ModuleRegistry:
    def __init__(self):
        self._cache_by_config: "OrderedDict[str, Dict[str, Any]]" = OrderedDict()
        self._mod_cls_map = {}
        self._mod_deps_map = {}
        self._mod_deps_map_inverted = {}

        self._mod_instance_map = {}

        for m_name in modules.ALL_MODULES:
            self._mod_instance_map[m_name] = OrderedDict()

            m_cls = getattr(modules, m_name)
            self._mod_cls_map[m_name] = m_cls()

            deps = m_cls.get_dependencies()
            self._mod_deps_map[m_name] = deps

            for dep in deps:
                self._mod_deps_map_inverted.setdefault(dep, []).append(m_name)

    def _get_param_hash(self, params: Dict[str, Any]):
        # dependency instances hash by identity, so a rebuilt dependency yields a new key
        repr_str = json.dumps(
            params, default=lambda o: f"{type(o).__name__}@{id(o)}", sort_keys=True
        ).encode("utf-8")
        return hashlib.sha256(repr_str).hexdigest()

    def _config_key(self, config) -> str:
        return json.dumps(_to_plain(config), default=repr, sort_keys=True)

    def _config_cache(self, key: str) -> Dict[str, Any]:
        if key in self._cache_by_config:
            self._cache_by_config.move_to_end(key)
            return self._cache_by_config[key]
        cached = self._cache_by_config[key] = {}
        while len(self._cache_by_config) > MAX_CACHED_CONFIGS:
            evicted, _ = self._cache_by_config.popitem(last=False)
            logger.debug(f"Evicted module cache for config {evicted[:64]}.")
        return cached

    def get_module_with_config(self, module_key, config):
        cached = self._config_cache(self._config_key(config))
        if module_key in cached:
            return cached[module_key]

        mod = self._create_mod_lazily(module_key, config)
        cached[module_key] = mod
        return mod

    def _with_dependencies(self, mod_names: Iterable[str]) -> Set[str]:
        wanted = set(mod_names)
        stack = list(wanted)
        while stack:
            for dep in self._mod_deps_map[stack.pop()]:
                if dep not in wanted:
                    wanted.add(dep)
                    stack.append(dep)
        return wanted

    def init_modules(self, config, mod_names: Optional[Iterable[str]] = None):
        """Build `mod_names` (default: every module) and their dependencies in order."""
        wanted = self._with_dependencies(
            modules.ALL_MODULES if mod_names is None else mod_names
        )
        cached = self._config_cache(self._config_key(config))

        mod_cache = {}
        mod_stack = []
        mod_ref_count = {}
        for mod in wanted:
            deps = self._mod_deps_map[mod]
            mod_ref_count[mod] = len(deps)
            if not deps:
                mod_stack.append(mod)

        while mod_stack:
            mod = mod_stack.pop()
            mod_obj = self._create_mod_lazily(mod, config, mod_cache)
            mod_cache[mod] = mod_obj
            cached[mod] = mod_obj

            for ref_mod in self._mod_deps_map_inverted.get(mod, []):
                if ref_mod not in wanted:
                    continue
                mod_ref_count[ref_mod] -= 1
                if mod_ref_count[ref_mod] == 0:
                    mod_stack.append(ref_mod)

        if len(mod_cache) != len(wanted):
            pending = sorted(m for m, count in mod_ref_count.items() if count > 0)
            raise ValueError(
                f"Circular dependency detected. Please check module dependency configuration. "
                f"Modules initialized: {sorted(mod_cache)}. Modules blocked: {pending}"
            )
        logger.debug(f"CDAN modules init successfully. {list(mod_cache.keys())}")

    def _create_mod_lazily(self, mod_name, config, mod_cache=None):
        if mod_cache and mod_name in mod_cache:
            return mod_cache[mod_name]

        logger.debug(f"Get module {mod_name}.")

        mod_config_key = MODULE_CONFIG_KEY_MAP[mod_name]
        mod_deps = self._mod_deps_map[mod_name]
        mod_cls = self._mod_cls_map[mod_name]

        params = {MODULE_PARAM_CONFIG: _to_plain(config.get(mod_config_key, None))}
        for dep in mod_deps:
            params[dep] = self._create_mod_lazily(dep, config, mod_cache)

        instance_key = self._get_param_hash(params)
        instances = self._mod_instance_map[mod_name]
        if instance_key in instances:
            instances.move_to_end(instance_key)
            return instances[instance_key]

        logger.debug(f"Creating new instance for module {mod_name} {instance_key}.")
        instance = instances[instance_key] = mod_cls.get_or_create(params)
        while len(instances) > MAX_CACHED_INSTANCES:
            instances.popitem(last=False)
        return instance

    def get_mod_instances(self, mod_name: str):
        return self._mod_instance_map[mod_name]

    def destroy_config_cache(self):
        self._cache_by_config = OrderedDict()


def _to_plain(value):
    if hasattr(value, "to_dict"):
        return value.to_dict()
    return value


module_registry = ModuleRegistry()
