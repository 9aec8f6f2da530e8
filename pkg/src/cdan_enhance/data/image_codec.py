"""8-bit RGB PNG codec, resizing and u8 <-> [0, 1] conversions."""

import os
from typing import List

import cv2
import numpy as np

from cdan_enhance.core.models.errors import ImageFormatError, ShapeError

PNG_SIGNATURE = b"\x89PNG\r\n\x1a\n"
IMAGE_SUFFIX = ".png"
# IHDR follows the signature: length, type, width, height, bit depth, color type
IHDR_END = 26
RGB_COLOR_TYPE = 2
PNG_COLOR_TYPES = {0: "grayscale", 2: "RGB", 3: "palette", 4: "grayscale+alpha", 6: "RGBA"}


def decode_image(data: bytes) -> np.ndarray:
    """PNG bytes -> H x W x 3 uint8 RGB.

    Only 8-bit truecolor PNGs are accepted. Other color types, palette
    included, are rejected from the IHDR header before decoding.
    """
    if not data.startswith(PNG_SIGNATURE):
        raise ImageFormatError("Unsupported image format: only PNG is accepted")
    if len(data) < IHDR_END or data[12:16] != b"IHDR":
        raise ImageFormatError("Corrupt PNG stream")
    bit_depth, color_type = data[24], data[25]
    if bit_depth != 8:
        raise ImageFormatError(f"Unsupported PNG bit depth: {bit_depth}-bit, expected 8-bit")
    if color_type != RGB_COLOR_TYPE:
        kind = PNG_COLOR_TYPES.get(color_type, f"unknown ({color_type})")
        raise ImageFormatError(f"Unsupported PNG color type {kind}, expected RGB")
    img = cv2.imdecode(np.frombuffer(data, dtype=np.uint8), cv2.IMREAD_UNCHANGED)
    if img is None or img.ndim != 3 or img.shape[2] != 3:
        raise ImageFormatError("Corrupt PNG stream")
    return cv2.cvtColor(img, cv2.COLOR_BGR2RGB)


def _check_rgb8(img: np.ndarray, what: str):
    if img.dtype != np.uint8 or img.ndim != 3 or img.shape[2] != 3:
        raise ImageFormatError(
            f"{what} expects an H x W x 3 uint8 image, got {img.dtype} {img.shape}"
        )


def encode_image(img: np.ndarray) -> bytes:
    _check_rgb8(img, "encode_image")
    ok, buf = cv2.imencode(IMAGE_SUFFIX, cv2.cvtColor(img, cv2.COLOR_RGB2BGR))
    if not ok:
        raise ImageFormatError("PNG encoding failed")
    return buf.tobytes()


def read_image(path: str) -> np.ndarray:
    with open(path, "rb") as f:
        data = f.read()
    try:
        return decode_image(data)
    except ImageFormatError as ex:
        raise ImageFormatError(f"{path}: {ex.msg}") from ex


def write_image(path: str, img: np.ndarray):
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, "wb") as f:
        f.write(encode_image(img))


def list_images(directory: str) -> List[str]:
    """PNG file names in `directory`, sorted lexicographically."""
    return sorted(
        name
        for name in os.listdir(directory)
        if name.lower().endswith(IMAGE_SUFFIX)
        and os.path.isfile(os.path.join(directory, name))
    )


def resize_bilinear(img: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Bilinear resize with half-pixel-centre alignment."""
    if out_h < 1 or out_w < 1:
        raise ShapeError(f"resize target must be at least 1x1, got {out_h}x{out_w}")
    if img.shape[0] == out_h and img.shape[1] == out_w:
        return img.copy()
    return cv2.resize(img, (out_w, out_h), interpolation=cv2.INTER_LINEAR)


def to_float(img: np.ndarray) -> np.ndarray:
    """H x W x 3 uint8 -> 3 x H x W float64 in [0, 1]."""
    _check_rgb8(img, "to_float")
    return img.transpose(2, 0, 1).astype(np.float64) / 255.0


def to_uint8(chw: np.ndarray) -> np.ndarray:
    """3 x H x W float in [0, 1] -> H x W x 3 uint8, clamped then rounded half-up."""
    scaled = np.clip(chw, 0.0, 1.0) * 255.0
    return np.floor(scaled + 0.5).astype(np.uint8).transpose(1, 2, 0).copy()
