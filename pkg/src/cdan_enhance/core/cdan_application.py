import logging
import os
from typing import Optional, Tuple

import numpy as np

from cdan_enhance.core.models.errors import DatasetError
from cdan_enhance.core.models.schema import EnhanceSummary, MetricReport, TrainSummary
from cdan_enhance.data.checkpoint import load_checkpoint
from cdan_enhance.data.image_codec import (
    list_images,
    read_image,
    resize_bilinear,
    to_float,
    to_uint8,
    write_image,
)
from cdan_enhance.engine.tensor import Tensor, no_grad
from cdan_enhance.modules.evaluation.evaluator import write_report
from cdan_enhance.modules.model.cdan_model import CdanModel
from cdan_enhance.modules.module_registry import module_registry

# modules every command can use; the trainer, loss and extractor are built on demand by `train`
EAGER_MODULES = ["DataLoaderModule", "PostprocessorModule", "EvaluationModule"]


def enhance_array(model: CdanModel, img: np.ndarray) -> np.ndarray:
    """Run one H x W x 3 uint8 image through the network, no graph recorded."""
    x = Tensor(to_float(img)[None])
    with no_grad():
        out = model(x)
    return to_uint8(out.data[0])


class CdanApplication:
    def __init__(self):
        self.name = "CdanApplication"
        self.logger = logging.getLogger(__name__)

    def initialize(self, config):
        self.config = config
        module_registry.init_modules(self.config, EAGER_MODULES)
        self.logger.info("CdanApplication initialized successfully.")

    def train(self, data_dir: str, out_dir: str, split: Optional[str] = None) -> TrainSummary:
        data_loader = module_registry.get_module_with_config(
            "DataLoaderModule", self.config
        )
        trainer = module_registry.get_module_with_config("TrainerModule", self.config)
        pairs = data_loader.load(data_dir, split)
        result = trainer.train(pairs, out_dir)
        return result.summary

    def enhance(
        self,
        checkpoint: str,
        in_dir: str,
        out_dir: str,
        resize: Optional[Tuple[int, int]] = None,
    ) -> EnhanceSummary:
        """Enhance every PNG in `in_dir`; `resize` is (height, width)."""
        postprocessor = module_registry.get_module_with_config(
            "PostprocessorModule", self.config
        )
        model, meta = load_checkpoint(checkpoint)
        filenames = list_images(in_dir)
        if not filenames:
            raise DatasetError(f"No PNG images found in {in_dir}")

        os.makedirs(out_dir, exist_ok=True)
        outputs = []
        for filename in filenames:
            img = read_image(os.path.join(in_dir, filename))
            if resize is not None:
                img = resize_bilinear(img, resize[0], resize[1])
            enhanced = postprocessor(enhance_array(model, img))
            out_path = os.path.join(out_dir, filename)
            write_image(out_path, enhanced)
            outputs.append(out_path)
            self.logger.debug(f"[Enhance] {filename} -> {out_path}")
        self.logger.info(
            f"[Enhance] Wrote {len(outputs)} image(s) to {out_dir} "
            f"(checkpoint epoch {meta.epoch}, step {meta.step})."
        )
        return EnhanceSummary(outputs=outputs)

    def evaluate(self, pred_dir: str, gt_dir: str, out_csv: str) -> MetricReport:
        evaluator = module_registry.get_module_with_config(
            "EvaluationModule", self.config
        )
        report = evaluator.evaluate_dir(pred_dir, gt_dir)
        write_report(report, out_csv)
        return report
