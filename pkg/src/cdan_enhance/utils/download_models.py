"""Export ImageNet-pretrained VGG19 feature weights into a named-tensor archive.

Needs the optional `torch` extra (`poetry install -E torch`).
"""

from cdan_enhance.core.models.errors import ServiceError
from cdan_enhance.data.checkpoint import write_archive
from cdan_enhance.modules.loss.feature_extractor import vgg19_entries
from cdan_enhance.utils.constants import (
    DEFAULT_MODEL_DIR,
    VGG19_EXPORT_DEPTH,
    VGG19_WEIGHTS_FILE,
)
from collections import OrderedDict
from pathlib import Path
import os
import time
import logging
import click
import numpy as np

logger = logging.getLogger(__name__)


class VggWeightsExporter:
    def __init__(self, download_directory=DEFAULT_MODEL_DIR):
        self.download_directory_path = Path(download_directory)
        if not os.path.exists(self.download_directory_path):
            os.makedirs(self.download_directory_path)

    def _load_state(self):
        try:
            from torchvision.models import VGG19_Weights, vgg19
        except ImportError as ex:
            raise ServiceError(
                "torchvision is required to export VGG19 weights; "
                "install the optional extra with `poetry install -E torch`."
            ) from ex
        model = vgg19(weights=VGG19_Weights.IMAGENET1K_V1)
        return model.features.state_dict()

    def collect(self, state, depth: int = VGG19_EXPORT_DEPTH):
        tensors = OrderedDict()
        for idx, (kind, cin, cout) in enumerate(vgg19_entries()[:depth]):
            if kind != "conv":
                continue
            for suffix in ("weight", "bias"):
                name = f"{idx}.{suffix}"
                if name not in state:
                    raise ServiceError(f"VGG19 state lacks tensor '{name}'")
                array = state[name]
                if hasattr(array, "detach"):
                    array = array.detach().cpu().double().numpy()
                tensors[f"features.{name}"] = np.asarray(array, dtype=np.float64)
        return tensors

    def export(self, output=None, depth: int = VGG19_EXPORT_DEPTH) -> str:
        output = output or os.path.join(self.download_directory_path, VGG19_WEIGHTS_FILE)
        logger.info(f"start exporting VGG19 features up to depth {depth}.")
        start_time = time.time()
        tensors = self.collect(self._load_state(), depth)
        write_archive(output, tensors, {"source": "torchvision VGG19 IMAGENET1K_V1", "depth": depth})
        duration = time.time() - start_time
        logger.info(
            f"Finished exporting {len(tensors)} tensors to {output}, took {duration:.2f} seconds."
        )
        return output


@click.command()
@click.option(
    "-o",
    "--output",
    show_default=True,
    required=False,
    help=f"archive path. Default: {DEFAULT_MODEL_DIR}/{VGG19_WEIGHTS_FILE}",
    default=None,
)
@click.option(
    "-d",
    "--depth",
    show_default=True,
    type=click.IntRange(1, VGG19_EXPORT_DEPTH),
    help="number of feature entries to export",
    default=VGG19_EXPORT_DEPTH,
)
def load_models(output, depth):
    try:
        path = VggWeightsExporter().export(output, depth)
    except ServiceError as ex:
        raise click.ClickException(ex.msg)
    click.echo(path)
