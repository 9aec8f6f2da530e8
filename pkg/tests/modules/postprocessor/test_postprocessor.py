import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from cdan_enhance.core.models.errors import ShapeError, UserInputError
from cdan_enhance.core.models.schema import EnhanceConfig
from cdan_enhance.modules.postprocessor.postprocessor import (
    PostprocessorModule,
    blend,
    enhance_color,
    enhance_contrast,
    grayscale,
    luma,
    postprocess_pipeline,
)

images = arrays(np.uint8, (4, 5, 3), elements=st.integers(0, 255))


def _mid_range(seed, shape=(16, 12, 3)):
    return np.random.default_rng(seed).integers(90, 161, shape, dtype=np.uint8)


def test_blend_endpoints():
    a = _mid_range(0)
    b = _mid_range(1)
    assert np.array_equal(blend(a, b, 0.0), a)
    assert np.array_equal(blend(a, b, 1.0), b)


def test_blend_rounds_half_up():
    black = np.zeros((1, 1, 3), dtype=np.uint8)
    white = np.full((1, 1, 3), 255, dtype=np.uint8)
    assert blend(black, white, 0.5)[0, 0].tolist() == [128, 128, 128]


def test_blend_clamps_extrapolation():
    gray = np.full((1, 1, 3), 100, dtype=np.uint8)
    img = np.array([[[10, 100, 250]]], dtype=np.uint8)
    assert blend(gray, img, 3.0)[0, 0].tolist() == [0, 100, 255]


def test_blend_rejects_shape_mismatch():
    with pytest.raises(ShapeError):
        blend(np.zeros((2, 2, 3), np.uint8), np.zeros((2, 3, 3), np.uint8), 0.5)


def test_grayscale_of_pure_red():
    img = np.array([[[255, 0, 0]]], dtype=np.uint8)
    assert grayscale(img)[0, 0].tolist() == [76, 76, 76]
    assert luma(img)[0, 0] == 76


def test_unit_alpha_is_identity():
    img = _mid_range(2)
    assert np.array_equal(enhance_color(img, 1.0), img)
    assert np.array_equal(enhance_contrast(img, 1.0), img)


@pytest.mark.parametrize("alpha", [0.5, 1.12, 2.0])
@pytest.mark.parametrize("seed", range(5))
def test_contrast_keeps_mean_luma(alpha, seed):
    img = _mid_range(seed)
    out = enhance_contrast(img, alpha)
    before = img.astype(float) @ np.array([0.299, 0.587, 0.114])
    after = out.astype(float) @ np.array([0.299, 0.587, 0.114])
    assert abs(after.mean() - before.mean()) <= 1.0


def test_contrast_zero_alpha_is_flat_gray():
    img = _mid_range(3)
    out = enhance_contrast(img, 0.0)
    assert len(np.unique(out)) == 1
    assert out[0, 0, 0] == int(luma(img).mean() + 0.5)


def test_color_enhancement_increases_saturation():
    img = _mid_range(4)
    out = enhance_color(img, 1.35)
    spread_before = np.abs(img.astype(float) - grayscale(img)).mean()
    spread_after = np.abs(out.astype(float) - grayscale(out)).mean()
    assert spread_after > spread_before


def test_pipeline_is_contrast_then_color():
    img = _mid_range(5)
    config = EnhanceConfig(alpha_color=1.35, alpha_contrast=1.12)
    expected = enhance_color(enhance_contrast(img, 1.12), 1.35)
    assert np.array_equal(postprocess_pipeline(img, config), expected)


def test_postprocessor_module_respects_enabled_flag():
    img = _mid_range(6)
    enabled = PostprocessorModule().get_or_create({"config": {"alpha_color": 1.35}})
    disabled = PostprocessorModule().get_or_create({"config": {"enabled": False}})
    assert np.array_equal(enabled(img), postprocess_pipeline(img, EnhanceConfig()))
    assert disabled(img) is img


def test_postprocessor_module_rejects_non_finite_alpha():
    with pytest.raises(UserInputError):
        PostprocessorModule().get_or_create({"config": {"alpha_color": float("inf")}})


@settings(max_examples=50, deadline=None)
@given(degenerate=images, original=images)
def test_blend_endpoints_property(degenerate, original):
    assert np.array_equal(blend(degenerate, original, 0.0), degenerate)
    assert np.array_equal(blend(degenerate, original, 1.0), original)
