import click
import os
from pathlib import Path
from cdan_enhance.core.cdan_configuration import CdanConfiguration
from cdan_enhance.main import handle_errors, init_log
from cdan_enhance.modules.evaluation.evaluator import write_report
from cdan_enhance.modules.module_registry import module_registry

_BASE_DIR = Path(__file__).parent.parent
DEFAULT_APPLICATION_CONFIG_FILE = os.path.join(_BASE_DIR, "config/settings.toml")


class EvalDatasetPipeline:
    def __init__(self, evaluator):
        self.evaluator = evaluator

    def eval_directory(self, pred_dir: str, gt_dir: str, output: str):
        report = self.evaluator.evaluate_dir(pred_dir, gt_dir)
        write_report(report, output)
        return report


def __init_eval_pipeline(config_file):
    config = CdanConfiguration.from_file(config_file).get_value()
    evaluator = module_registry.get_module_with_config("EvaluationModule", config)
    return EvalDatasetPipeline(evaluator)


@click.command()
@click.option(
    "-c",
    "--config",
    show_default=True,
    help=f"Configuration file. Default: {DEFAULT_APPLICATION_CONFIG_FILE}",
    default=DEFAULT_APPLICATION_CONFIG_FILE,
)
@click.option(
    "-p",
    "--pred",
    required=True,
    help="Directory of enhanced PNG images.",
    type=click.Path(exists=True, file_okay=False),
)
@click.option(
    "-g",
    "--gt",
    required=True,
    help="Directory of reference PNG images.",
    type=click.Path(exists=True, file_okay=False),
)
@click.option(
    "-o",
    "--output",
    show_default=True,
    help="CSV report path.",
    default="localdata/eval_report.csv",
)
@handle_errors
def run(config, pred, gt, output):
    init_log()
    eval_pipeline = __init_eval_pipeline(config)
    report = eval_pipeline.eval_directory(pred, gt, output)
    click.echo(
        f"mean PSNR {report.mean_psnr:.3f} dB, mean SSIM {report.mean_ssim:.4f} "
        f"over {len(report.entries)} image(s)"
    )
