"""Set of constants shared by the modules."""

import os

# exported weights land here unless CDAN_MODEL_DIR points elsewhere
DEFAULT_MODEL_DIR = os.environ.get("CDAN_MODEL_DIR", "./model_repository")

VGG19_WEIGHTS_FILE = "vgg19_features.cdan"
VGG19_EXPORT_DEPTH = 37
