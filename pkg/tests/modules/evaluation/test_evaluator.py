import math
import os

import numpy as np
import pandas as pd
import pytest

from cdan_enhance.core.models.errors import DatasetError
from cdan_enhance.core.models.schema import ImageMetric
from cdan_enhance.data.image_codec import write_image
from cdan_enhance.modules.evaluation.evaluation import EvaluationModule
from cdan_enhance.modules.evaluation.evaluator import Evaluator, build_report, write_report


def _write_dir(root, names, seed):
    rng = np.random.default_rng(seed)
    os.makedirs(root, exist_ok=True)
    for name in names:
        write_image(os.path.join(root, name), rng.integers(0, 256, (16, 16, 3), dtype=np.uint8))


def test_identical_directories_score_perfectly(tmp_path):
    pred = str(tmp_path / "pred")
    _write_dir(pred, ["b.png", "a.png"], seed=0)
    report = Evaluator(workers=2).evaluate_dir(pred, pred)
    assert [e.filename for e in report.entries] == ["a.png", "b.png"]
    assert report.mean_ssim == pytest.approx(1.0, abs=1e-12)
    assert report.infinite_psnr == 2
    assert report.mean_psnr == math.inf


def test_report_matches_per_image_metrics(tmp_path):
    pred, gt = str(tmp_path / "pred"), str(tmp_path / "gt")
    _write_dir(pred, ["x.png", "y.png"], seed=1)
    _write_dir(gt, ["x.png", "y.png"], seed=2)
    report = Evaluator().evaluate_dir(pred, gt)
    assert report.mean_psnr == pytest.approx(np.mean([e.psnr_db for e in report.entries]))
    assert report.mean_ssim == pytest.approx(np.mean([e.ssim for e in report.entries]))


def test_unmatched_files_raise(tmp_path):
    pred, gt = str(tmp_path / "pred"), str(tmp_path / "gt")
    _write_dir(pred, ["x.png", "extra.png"], seed=1)
    _write_dir(gt, ["x.png"], seed=2)
    with pytest.raises(DatasetError, match="extra.png"):
        Evaluator().evaluate_dir(pred, gt)


def test_empty_directories_raise(tmp_path):
    os.makedirs(tmp_path / "pred")
    os.makedirs(tmp_path / "gt")
    with pytest.raises(DatasetError):
        Evaluator().evaluate_dir(str(tmp_path / "pred"), str(tmp_path / "gt"))


def test_infinite_psnr_excluded_from_mean():
    report = build_report(
        [
            ImageMetric(filename="a.png", psnr_db=math.inf, ssim=1.0),
            ImageMetric(filename="b.png", psnr_db=20.0, ssim=0.5),
        ]
    )
    assert report.mean_psnr == 20.0
    assert report.mean_ssim == 0.75
    assert report.infinite_psnr == 1


def test_write_report_csv(tmp_path):
    report = build_report(
        [
            ImageMetric(filename="a.png", psnr_db=30.0, ssim=0.9),
            ImageMetric(filename="b.png", psnr_db=20.0, ssim=0.7),
        ]
    )
    path = str(tmp_path / "out" / "report.csv")
    write_report(report, path)
    frame = pd.read_csv(path)
    assert list(frame.columns) == ["filename", "psnr_db", "ssim"]
    assert list(frame["filename"]) == ["a.png", "b.png", "mean"]
    assert frame["psnr_db"].iloc[-1] == pytest.approx(25.0)


def test_evaluation_module_uses_worker_setting():
    evaluator = EvaluationModule().get_or_create({"config": {"workers": 3}})
    assert evaluator.workers == 3
