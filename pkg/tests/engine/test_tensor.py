import numpy as np
import pytest

from cdan_enhance.core.models.errors import GraphError, NonFiniteError
from cdan_enhance.engine import functional as F
from cdan_enhance.engine.tensor import Tensor, backward, is_grad_enabled, no_grad


def test_backward_populates_leaf_grads():
    a = Tensor([1.0, 2.0, 3.0], requires_grad=True)
    b = Tensor([4.0, 5.0, 6.0], requires_grad=True)
    loss = F.sum_(F.mul(a, b))
    backward(loss)
    np.testing.assert_array_equal(a.grad, b.data)
    np.testing.assert_array_equal(b.grad, a.data)


def test_shared_input_accumulates_both_paths():
    x = Tensor([3.0], requires_grad=True)
    loss = F.sum_(F.add(F.mul(x, x), x))
    loss.backward()
    assert x.grad[0] == 7.0


def test_grads_accumulate_across_backward_calls():
    x = Tensor([2.0], requires_grad=True)
    F.sum_(F.scale(x, 3.0)).backward()
    F.sum_(F.scale(x, 3.0)).backward()
    assert x.grad[0] == 6.0
    x.zero_grad()
    assert x.grad[0] == 0.0


def test_consumed_graph_cannot_be_reused():
    x = Tensor([1.0, -1.0], requires_grad=True)
    loss = F.sum_(F.square(x))
    loss.backward()
    with pytest.raises(GraphError):
        loss.backward()


def test_backward_rejects_non_scalar():
    x = Tensor(np.ones((2, 2)), requires_grad=True)
    with pytest.raises(GraphError):
        F.square(x).backward()


def test_backward_rejects_untracked_loss():
    x = Tensor([1.0])
    with pytest.raises(GraphError):
        F.sum_(x).backward()


def test_no_grad_records_nothing():
    x = Tensor([1.0, 2.0], requires_grad=True)
    assert is_grad_enabled()
    with no_grad():
        assert not is_grad_enabled()
        y = F.sum_(F.square(x))
    assert is_grad_enabled()
    assert not y.requires_grad
    assert y.is_leaf


def test_non_finite_output_raises():
    x = Tensor([1e200], requires_grad=True)
    with pytest.raises(NonFiniteError):
        F.square(x)


def test_detach_shares_values_without_graph():
    x = Tensor([1.0, 2.0], requires_grad=True)
    y = F.scale(x, 2.0).detach()
    assert not y.requires_grad
    np.testing.assert_array_equal(y.data, [2.0, 4.0])


def test_operator_sugar_matches_functional():
    a = Tensor([1.0, 2.0], requires_grad=True)
    b = Tensor([3.0, 5.0])
    np.testing.assert_array_equal((a * b + a - b).data, [1.0, 7.0])


def test_item_requires_single_element():
    assert Tensor(2.5).item() == 2.5
    with pytest.raises(GraphError):
        Tensor([1.0, 2.0]).item()
