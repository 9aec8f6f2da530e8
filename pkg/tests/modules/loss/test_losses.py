import numpy as np
import pytest

from cdan_enhance.core.models.errors import (
    ExtractorNotInitializedError,
    ShapeError,
    UnknownTensorError,
)
from cdan_enhance.core.models.schema import LossConfig
from cdan_enhance.data.checkpoint import read_archive, write_archive
from cdan_enhance.engine.gradcheck import check_gradients
from cdan_enhance.engine.tensor import Tensor
from cdan_enhance.modules.loss.feature_extractor import FeatureExtractor, vgg19_entries
from cdan_enhance.modules.loss.loss_module import FeatureExtractorModule, LossModule
from cdan_enhance.modules.loss.losses import (
    CompositeLoss,
    composite_loss,
    l1_loss,
    mse_loss,
    perceptual_loss,
)


def _pair(shape=(2, 3, 8, 8), seed=0):
    rng = np.random.default_rng(seed)
    return Tensor(rng.random(shape), requires_grad=True), Tensor(rng.random(shape))


def test_mse_is_batch_mean_of_per_sample_sums():
    pred, target = _pair()
    expected = np.mean([np.sum((pred.data[i] - target.data[i]) ** 2) for i in range(2)])
    assert mse_loss(pred, target).item() == pytest.approx(expected, rel=1e-12)


def test_l1_is_batch_mean_of_per_sample_sums():
    pred, target = _pair()
    expected = np.sum(np.abs(pred.data - target.data)) / 2
    assert l1_loss(pred, target).item() == pytest.approx(expected, rel=1e-12)


def test_mse_zero_for_identical_inputs():
    pred, _ = _pair()
    assert mse_loss(pred, pred.detach()).item() == 0.0


def test_losses_reject_shape_mismatch():
    with pytest.raises(ShapeError):
        mse_loss(Tensor(np.zeros((1, 3, 4, 4))), Tensor(np.zeros((1, 3, 4, 5))))


def test_mse_gradient():
    pred, target = _pair()
    mse_loss(pred, target).backward()
    np.testing.assert_allclose(pred.grad, (pred.data - target.data), rtol=1e-12)


def test_perceptual_needs_initialized_extractor():
    pred, target = _pair()
    with pytest.raises(ExtractorNotInitializedError):
        perceptual_loss(FeatureExtractor(depth=4), pred, target)
    with pytest.raises(ExtractorNotInitializedError):
        perceptual_loss(None, pred, target)


def test_composite_without_perceptual_weight_skips_extractor():
    pred, target = _pair()
    terms = composite_loss(LossConfig(lambda_perceptual=0.0), None, pred, target)
    assert terms.perceptual.item() == 0.0
    assert terms.composite.item() == terms.mse.item()


def test_composite_weighted_sum():
    pred, target = _pair(seed=1)
    extractor = FeatureExtractor(depth=4).initialize_random(3)
    terms = composite_loss(LossConfig(lambda_perceptual=0.25), extractor, pred, target)
    assert terms.perceptual.item() > 0.0
    assert terms.composite.item() == terms.mse.item() + 0.25 * terms.perceptual.item()


def test_composite_non_decreasing_in_perceptual_weight():
    pred, target = _pair(seed=5)
    extractor = FeatureExtractor(depth=4).initialize_random(3)
    values = [
        composite_loss(LossConfig(lambda_perceptual=lam), extractor, pred, target).composite.item()
        for lam in (0.0, 0.01, 0.1, 0.25, 1.0, 4.0)
    ]
    assert all(a <= b for a, b in zip(values, values[1:]))
    assert values[-1] > values[0]


@pytest.mark.parametrize("loss_type", ["l1", "l2", "perceptual", "composite"])
def test_loss_variants(loss_type):
    pred, target = _pair(seed=2)
    extractor = FeatureExtractor(depth=4).initialize_random(3)
    loss = CompositeLoss(LossConfig(loss_type=loss_type), extractor)
    terms = loss(pred, target)
    if loss_type == "l1":
        assert terms.composite.item() == l1_loss(pred, target).item()
    elif loss_type == "l2":
        assert terms.composite.item() == mse_loss(pred, target).item()
    elif loss_type == "perceptual":
        assert terms.composite.item() == perceptual_loss(extractor, pred, target).item()
    terms.composite.backward()
    assert pred.grad is not None and np.abs(pred.grad).sum() > 0


def test_perceptual_gradient_reaches_prediction_only():
    pred, target = _pair(shape=(1, 3, 8, 8), seed=3)
    target.requires_grad = True
    extractor = FeatureExtractor(depth=4).initialize_random(5)
    perceptual_loss(extractor, pred, target).backward()
    assert pred.grad is not None
    assert target.grad is None
    for weight, bias in filter(None, extractor.weights):
        assert weight.grad is None and bias.grad is None


def test_perceptual_gradient_check():
    pred, target = _pair(shape=(1, 3, 6, 6), seed=4)
    extractor = FeatureExtractor(depth=4).initialize_random(6)
    err = check_gradients(
        lambda: perceptual_loss(extractor, pred, target),
        [("pred", pred)],
        samples_per_tensor=20,
        steps=(1e-5, 1e-6),
    )
    assert err <= 1e-4


def test_feature_extractor_depth_twenty():
    extractor = FeatureExtractor().initialize_random(0)
    assert extractor.entries[-1][0] == "conv"
    assert len(extractor.tensor_names()) == 18
    out = extractor.extract(Tensor(np.random.default_rng(0).random((1, 3, 16, 16))))
    assert out.shape == (1, 512, 2, 2)


def test_vgg19_column_has_thirty_seven_entries():
    entries = vgg19_entries()
    assert len(entries) == 37
    assert sum(kind == "conv" for kind, _, _ in entries) == 16
    assert sum(kind == "pool" for kind, _, _ in entries) == 5


def test_extractor_loads_archived_weights(tmp_path):
    source = FeatureExtractor(depth=4).initialize_random(7)
    tensors = {}
    for idx, pair in enumerate(source.weights):
        if pair is not None:
            tensors[f"features.{idx}.weight"] = pair[0].data
            tensors[f"features.{idx}.bias"] = pair[1].data
    path = str(tmp_path / "vgg.cdan")
    write_archive(path, tensors, {"depth": 4})
    _, loaded = read_archive(path)

    extractor = FeatureExtractor(depth=4).load_weights(loaded)
    x = Tensor(np.random.default_rng(8).random((1, 3, 8, 8)))
    np.testing.assert_array_equal(extractor.extract(x).data, source.extract(x).data)

    del loaded["features.2.bias"]
    with pytest.raises(UnknownTensorError):
        FeatureExtractor(depth=4).load_weights(loaded)


def test_extractor_depth_bounds():
    with pytest.raises(ValueError):
        FeatureExtractor(depth=0)
    with pytest.raises(ValueError):
        FeatureExtractor(depth=38)


def test_loss_modules_build_from_settings():
    extractor_module = FeatureExtractorModule()
    assert extractor_module.get_or_create({"config": {"lambda_perceptual": 0.0}}) is None
    extractor = extractor_module.get_or_create(
        {"config": {"feature_depth": 4, "extractor_seed": 1}}
    )
    assert extractor.initialized and extractor.depth == 4

    loss = LossModule().get_or_create(
        {"config": {"loss_type": "l2"}, "FeatureExtractorModule": None}
    )
    pred, target = _pair()
    assert loss(pred, target).composite.item() == mse_loss(pred, target).item()
