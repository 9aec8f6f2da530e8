MODULE_PARAM_CONFIG = "config"
