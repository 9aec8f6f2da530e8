import functools
import logging
import os
from logging.config import dictConfig
from pathlib import Path

import click

from cdan_enhance.core.cdan_application import CdanApplication
from cdan_enhance.core.cdan_configuration import CdanConfiguration
from cdan_enhance.core.models.errors import CdanError, ServiceError, UserInputError

logger = logging.getLogger(__name__)

_BASE_DIR = Path(__file__).parent
DEFAULT_APPLICATION_CONFIG_FILE = os.path.join(_BASE_DIR, "config/settings.toml")
VERSION = "0.1.0"


def init_log(level: str = "INFO"):
    log_config = {
        "version": 1,
        "disable_existing_loggers": False,
        "formatters": {
            "sample": {"format": "%(asctime)s %(levelname)s %(message)s"},
            "verbose": {
                "format": "%(asctime)s %(levelname)s %(name)s %(process)d %(thread)d %(message)s"
            },
        },
        "handlers": {
            "console": {
                "formatter": "verbose",
                "level": "DEBUG",
                "class": "logging.StreamHandler",
            },
        },
        "loggers": {
            "": {"level": level, "handlers": ["console"]},
        },
    }
    dictConfig(log_config)


def _drop_unset(overrides: dict) -> dict:
    result = {}
    for section, values in overrides.items():
        kept = {k: v for k, v in values.items() if v is not None}
        if kept:
            result[section] = kept
    return result


def init_application(config_file: str, overrides: dict) -> CdanApplication:
    configuration = CdanConfiguration.from_file(config_file)
    overrides = _drop_unset(overrides)
    if overrides:
        configuration.update(overrides)
    app = CdanApplication()
    app.initialize(configuration.get_value())
    return app


def handle_errors(command):
    """Map domain failures to exit code 1 and bad input to exit code 2."""

    @functools.wraps(command)
    def wrapper(*args, **kwargs):
        try:
            return command(*args, **kwargs)
        except UserInputError as ex:
            raise click.UsageError(ex.msg)
        except (CdanError, ServiceError) as ex:
            logger.error(f"{type(ex).__name__}: {ex.msg}")
            raise click.ClickException(ex.msg)

    return wrapper


def parse_resize(ctx, param, value):
    if value is None:
        return None
    try:
        width, height = (int(v) for v in value.lower().split("x"))
    except ValueError:
        raise click.BadParameter(f"expected WIDTHxHEIGHT, got '{value}'")
    if width < 1 or height < 1:
        raise click.BadParameter(f"resize target must be positive, got '{value}'")
    return height, width


config_option = click.option(
    "-c",
    "--config-file",
    show_default=True,
    help=f"Configuration file. Default: {DEFAULT_APPLICATION_CONFIG_FILE}",
    default=DEFAULT_APPLICATION_CONFIG_FILE,
    type=click.Path(exists=True, dir_okay=False),
)


@click.group(invoke_without_command=True)
@click.pass_context
@click.option("-V", "--version", is_flag=True, help="Show version and exit.")
@click.option("-v", "--verbose", is_flag=True, help="Log debug messages.")
def main(ctx, version, verbose):
    init_log("DEBUG" if verbose else "INFO")
    if version:
        click.echo(VERSION)
    elif ctx.invoked_subcommand is None:
        click.echo(ctx.get_help())


@main.command()
@click.option(
    "--data",
    "data_dir",
    required=True,
    help="Dataset root holding low/ and high/ (or <split>/low, <split>/high).",
    type=click.Path(exists=True, file_okay=False),
)
@click.option(
    "--out",
    "out_dir",
    required=True,
    help="Output directory for checkpoints and the loss history.",
    type=click.Path(file_okay=False),
)
@click.option("--split", default=None, help="Dataset split sub-directory, e.g. our485.")
@click.option("--epochs", type=int, default=None, help="Epochs. Default from config: 80")
@click.option("--batch", type=int, default=None, help="Batch size. Default from config: 16")
@click.option("--lr", type=float, default=None, help="Learning rate. Default from config: 0.001")
@click.option(
    "--lambda",
    "lambda_perceptual",
    type=float,
    default=None,
    help="Perceptual loss weight. Default from config: 0.25",
)
@click.option(
    "--loss-type",
    type=click.Choice(["l1", "l2", "perceptual", "composite"]),
    default=None,
    help="Loss variant. Default from config: composite",
)
@click.option("--seed", type=int, default=None, help="Random seed. Default from config: 42")
@click.option("--max-steps", type=int, default=None, help="Stop after this many steps.")
@click.option(
    "--vgg-weights",
    default=None,
    help="VGG19 feature weights archive exported by `load_model`.",
    type=click.Path(exists=True, dir_okay=False),
)
@config_option
@handle_errors
def train(
    data_dir,
    out_dir,
    split,
    epochs,
    batch,
    lr,
    lambda_perceptual,
    loss_type,
    seed,
    max_steps,
    vgg_weights,
    config_file,
):
    app = init_application(
        config_file,
        {
            "train": {
                "epochs": epochs,
                "batch_size": batch,
                "lr": lr,
                "seed": seed,
                "max_steps": max_steps,
            },
            "loss": {
                "lambda_perceptual": lambda_perceptual,
                "loss_type": loss_type,
                "vgg_weights": vgg_weights,
            },
        },
    )
    summary = app.train(data_dir, out_dir, split)
    click.echo(
        f"Trained {summary.steps} steps, final loss {summary.final_loss:.6f}. "
        f"Checkpoint: {summary.checkpoint}"
    )


@main.command()
@click.option(
    "--ckpt",
    "checkpoint",
    required=True,
    help="Checkpoint file (.cdan).",
    type=click.Path(exists=True, dir_okay=False),
)
@click.option(
    "--in",
    "in_dir",
    required=True,
    help="Directory of low-light PNG images.",
    type=click.Path(exists=True, file_okay=False),
)
@click.option(
    "--out", "out_dir", required=True, help="Output directory.", type=click.Path(file_okay=False)
)
@click.option("--alpha-color", type=float, default=None, help="Default from config: 1.35")
@click.option("--alpha-contrast", type=float, default=None, help="Default from config: 1.12")
@click.option(
    "--no-postprocess", is_flag=True, default=False, help="Write raw network outputs."
)
@click.option(
    "--resize",
    default=None,
    callback=parse_resize,
    help="Resize inputs to WIDTHxHEIGHT before enhancement, e.g. 600x400.",
)
@config_option
@handle_errors
def enhance(
    checkpoint,
    in_dir,
    out_dir,
    alpha_color,
    alpha_contrast,
    no_postprocess,
    resize,
    config_file,
):
    app = init_application(
        config_file,
        {
            "postprocess": {
                "alpha_color": alpha_color,
                "alpha_contrast": alpha_contrast,
                "enabled": False if no_postprocess else None,
            }
        },
    )
    summary = app.enhance(checkpoint, in_dir, out_dir, resize)
    click.echo(f"Enhanced {len(summary.outputs)} image(s) into {out_dir}.")


@main.command(name="eval")
@click.option(
    "--pred",
    "pred_dir",
    required=True,
    help="Directory of enhanced PNG images.",
    type=click.Path(exists=True, file_okay=False),
)
@click.option(
    "--gt",
    "gt_dir",
    required=True,
    help="Directory of reference PNG images with matching names.",
    type=click.Path(exists=True, file_okay=False),
)
@click.option(
    "--out", "out_csv", required=True, help="CSV report path.", type=click.Path(dir_okay=False)
)
@config_option
@handle_errors
def evaluate(pred_dir, gt_dir, out_csv, config_file):
    app = init_application(config_file, {})
    report = app.evaluate(pred_dir, gt_dir, out_csv)
    click.echo(
        f"{len(report.entries)} image(s): PSNR {report.mean_psnr:.3f} dB, "
        f"SSIM {report.mean_ssim:.4f}. Report: {out_csv}"
    )
