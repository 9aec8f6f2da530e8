"""Full-reference image quality metrics on 8-bit RGB images (H x W x 3)."""

import math

import numpy as np
from scipy.ndimage import correlate1d

from cdan_enhance.core.models.errors import ShapeError

MAX_PIXEL = 255.0
SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03


def _check_images(x: np.ndarray, y: np.ndarray, what: str):
    if x.shape != y.shape:
        raise ShapeError(f"{what}: image shapes differ, {x.shape} vs {y.shape}")
    if x.ndim not in (2, 3):
        raise ShapeError(f"{what}: expected H x W or H x W x C image, got {x.shape}")


def psnr(x: np.ndarray, y: np.ndarray) -> float:
    """10 log10(255^2 / MSE); identical images give math.inf."""
    _check_images(x, y, "psnr")
    diff = x.astype(np.float64) - y.astype(np.float64)
    mse = float(np.mean(diff * diff))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(MAX_PIXEL * MAX_PIXEL / mse)


def gaussian_window(size: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA) -> np.ndarray:
    """Normalized 1-D Gaussian; the 2-D window is its outer product."""
    offsets = np.arange(size, dtype=np.float64) - (size - 1) / 2.0
    g = np.exp(-(offsets * offsets) / (2.0 * sigma * sigma))
    return g / g.sum()


def _filter_valid(img: np.ndarray, g: np.ndarray) -> np.ndarray:
    half = len(g) // 2
    out = correlate1d(img, g, axis=0, mode="constant")
    out = correlate1d(out, g, axis=1, mode="constant")
    return out[half : img.shape[0] - half, half : img.shape[1] - half]


def _ssim_map(x: np.ndarray, y: np.ndarray, g: np.ndarray) -> np.ndarray:
    c1 = SSIM_K1 * SSIM_K1
    c2 = SSIM_K2 * SSIM_K2
    mu_x = _filter_valid(x, g)
    mu_y = _filter_valid(y, g)
    sigma_x = _filter_valid(x * x, g) - mu_x * mu_x
    sigma_y = _filter_valid(y * y, g) - mu_y * mu_y
    sigma_xy = _filter_valid(x * y, g) - mu_x * mu_y
    numerator = (2.0 * mu_x * mu_y + c1) * (2.0 * sigma_xy + c2)
    denominator = (mu_x * mu_x + mu_y * mu_y + c1) * (sigma_x + sigma_y + c2)
    return numerator / denominator


def to_unit_float(img: np.ndarray) -> np.ndarray:
    if img.dtype == np.uint8:
        return img.astype(np.float64) / MAX_PIXEL
    return img.astype(np.float64)


def ssim(x: np.ndarray, y: np.ndarray) -> float:
    """Mean SSIM over valid window positions and channels, on [0, 1] floats.

    uint8 inputs are scaled by 1/255; float inputs are taken as already in [0, 1].
    """
    _check_images(x, y, "ssim")
    if min(x.shape[0], x.shape[1]) < SSIM_WINDOW:
        raise ShapeError(
            f"ssim needs images of at least {SSIM_WINDOW}x{SSIM_WINDOW}, got {x.shape}"
        )
    xf = to_unit_float(x)
    yf = to_unit_float(y)
    if xf.ndim == 2:
        xf, yf = xf[..., None], yf[..., None]
    g = gaussian_window()
    maps = [_ssim_map(xf[..., c], yf[..., c], g) for c in range(xf.shape[2])]
    return float(np.mean(maps))
