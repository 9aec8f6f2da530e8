import os
from pathlib import Path

import numpy as np
import pandas as pd
from click.testing import CliRunner

from cdan_enhance.data.image_codec import write_image
from cdan_enhance.evaluation.eval_pipeline import run

BASE_DIR = Path(__file__).parent.parent.parent
CONFIG_FILE = os.path.join(BASE_DIR, "src/cdan_enhance/config/settings.toml")


def test_eval_pipeline_writes_report(tmp_path):
    rng = np.random.default_rng(0)
    for name in ("a.png", "b.png"):
        img = rng.integers(0, 256, (12, 12, 3), dtype=np.uint8)
        write_image(str(tmp_path / "gt" / name), img)
        write_image(str(tmp_path / "pred" / name), np.clip(img.astype(int) + 3, 0, 255).astype(np.uint8))

    output = str(tmp_path / "report.csv")
    result = CliRunner().invoke(
        run,
        ["-c", CONFIG_FILE, "-p", str(tmp_path / "pred"), "-g", str(tmp_path / "gt"), "-o", output],
    )
    assert result.exit_code == 0, result.output
    assert "over 2 image(s)" in result.output
    assert pd.read_csv(output)["filename"].tolist() == ["a.png", "b.png", "mean"]


def test_eval_pipeline_unmatched_files(tmp_path):
    write_image(str(tmp_path / "gt" / "a.png"), np.zeros((12, 12, 3), np.uint8))
    write_image(str(tmp_path / "pred" / "b.png"), np.zeros((12, 12, 3), np.uint8))
    result = CliRunner().invoke(
        run, ["-c", CONFIG_FILE, "-p", str(tmp_path / "pred"), "-g", str(tmp_path / "gt")]
    )
    assert result.exit_code == 1
