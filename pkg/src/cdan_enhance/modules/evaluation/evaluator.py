import concurrent.futures
import logging
import math
import os
from typing import List

import pandas as pd

from cdan_enhance.core.models.errors import DatasetError
from cdan_enhance.core.models.schema import ImageMetric, MetricReport
from cdan_enhance.data.image_codec import list_images, read_image
from cdan_enhance.modules.evaluation.metrics import psnr, ssim

logger = logging.getLogger(__name__)

REPORT_COLUMNS = ["filename", "psnr_db", "ssim"]


def build_report(entries: List[ImageMetric]) -> MetricReport:
    """Average per-image metrics; infinite PSNR values are left out of the mean."""
    finite = [e.psnr_db for e in entries if math.isfinite(e.psnr_db)]
    infinite = len(entries) - len(finite)
    if infinite:
        logger.warning(
            f"[Evaluation] {infinite} image(s) identical to ground truth, PSNR infinite; "
            "excluded from the PSNR average."
        )
    if finite:
        mean_psnr = sum(finite) / len(finite)
    else:
        mean_psnr = math.inf if entries else math.nan
    mean_ssim = sum(e.ssim for e in entries) / len(entries) if entries else math.nan
    return MetricReport(
        entries=entries,
        mean_psnr=mean_psnr,
        mean_ssim=mean_ssim,
        infinite_psnr=infinite,
    )


class Evaluator:
    def __init__(self, workers: int = 4):
        self.workers = workers

    def _score(self, pred_path: str, gt_path: str) -> ImageMetric:
        pred = read_image(pred_path)
        gt = read_image(gt_path)
        return ImageMetric(
            filename=os.path.basename(pred_path),
            psnr_db=psnr(pred, gt),
            ssim=ssim(pred, gt),
        )

    def evaluate_dir(self, pred_dir: str, gt_dir: str) -> MetricReport:
        pred_files = list_images(pred_dir)
        gt_files = list_images(gt_dir)
        missing_gt = sorted(set(pred_files) - set(gt_files))
        missing_pred = sorted(set(gt_files) - set(pred_files))
        if missing_gt or missing_pred:
            raise DatasetError(
                f"Unmatched files: no ground truth for {missing_gt}, "
                f"no prediction for {missing_pred}"
            )
        if not pred_files:
            raise DatasetError(f"No PNG images found in {pred_dir}")

        # map() keeps submission order, so the report order is lexicographic
        with concurrent.futures.ThreadPoolExecutor(max_workers=self.workers) as executor:
            entries = list(
                executor.map(
                    self._score,
                    [os.path.join(pred_dir, f) for f in pred_files],
                    [os.path.join(gt_dir, f) for f in pred_files],
                )
            )
        report = build_report(entries)
        logger.info(
            f"[Evaluation] {len(entries)} images: mean PSNR {report.mean_psnr:.3f} dB, "
            f"mean SSIM {report.mean_ssim:.4f}."
        )
        return report


def report_to_frame(report: MetricReport) -> pd.DataFrame:
    rows = [[e.filename, e.psnr_db, e.ssim] for e in report.entries]
    rows.append(["mean", report.mean_psnr, report.mean_ssim])
    return pd.DataFrame(rows, columns=REPORT_COLUMNS)


def write_report(report: MetricReport, path: str):
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    report_to_frame(report).to_csv(path, index=False)
    logger.info(f"[Evaluation] Report written to {path}.")
