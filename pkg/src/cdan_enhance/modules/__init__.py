from cdan_enhance.modules.model.model_module import ModelModule
from cdan_enhance.modules.loss.loss_module import FeatureExtractorModule, LossModule
from cdan_enhance.modules.dataloader.data_loader import DataLoaderModule
from cdan_enhance.modules.trainer.trainer_module import TrainerModule
from cdan_enhance.modules.postprocessor.postprocessor import PostprocessorModule
from cdan_enhance.modules.evaluation.evaluation import EvaluationModule


ALL_MODULES = [
    "ModelModule",
    "FeatureExtractorModule",
    "LossModule",
    "DataLoaderModule",
    "TrainerModule",
    "PostprocessorModule",
    "EvaluationModule",
]

__all__ = ALL_MODULES + ["ALL_MODULES"]
