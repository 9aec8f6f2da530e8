"""Central finite-difference gradient checks for the autodiff engine."""

import logging
from typing import Callable, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from cdan_enhance.engine.tensor import Tensor

logger = logging.getLogger(__name__)

DEFAULT_STEP = 1e-5
DEFAULT_FLOOR = 1e-7


def relative_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = DEFAULT_FLOOR):
    """`|a - n| / max(|a|, |n|, floor)`, elementwise."""
    analytic = np.asarray(analytic)
    numeric = np.asarray(numeric)
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return np.abs(analytic - numeric) / denom


def numerical_grad(
    fn: Callable[[], Tensor],
    tensor: Tensor,
    indices: Optional[Iterable[Tuple[int, ...]]] = None,
    step: float = DEFAULT_STEP,
) -> Tuple[List[Tuple[int, ...]], np.ndarray]:
    """Central differences of scalar `fn()` w.r.t. selected entries of `tensor`.

    `tensor.data` is perturbed in place and restored afterwards.
    """
    if indices is None:
        indices = list(np.ndindex(tensor.shape))
    else:
        indices = list(indices)
    values = np.empty(len(indices))
    for k, idx in enumerate(indices):
        original = tensor.data[idx]
        tensor.data[idx] = original + step
        plus = fn().item()
        tensor.data[idx] = original - step
        minus = fn().item()
        tensor.data[idx] = original
        values[k] = (plus - minus) / (2.0 * step)
    return indices, values


def sample_indices(
    shape: Tuple[int, ...], count: int, rng: np.random.Generator
) -> List[Tuple[int, ...]]:
    size = int(np.prod(shape))
    if size <= count:
        return list(np.ndindex(shape))
    flat = rng.choice(size, size=count, replace=False)
    return [tuple(int(i) for i in np.unravel_index(f, shape)) for f in sorted(flat)]


def check_gradients(
    fn: Callable[[], Tensor],
    tensors: Iterable[Tuple[str, Tensor]],
    samples_per_tensor: Optional[int] = None,
    seed: int = 0,
    step: float = DEFAULT_STEP,
    floor: float = DEFAULT_FLOOR,
    steps: Optional[Sequence[float]] = None,
) -> float:
    """Return the worst relative error between backward() and finite differences.

    `fn` must rebuild the graph on every call and be deterministic. With
    several `steps`, each entry keeps its best agreement across step sizes;
    a step that straddles a ReLU or max switch then does not fail the check.
    """
    steps = list(steps) if steps else [step]
    tensors = list(tensors)
    for _, t in tensors:
        t.grad = None
    loss = fn()
    loss.backward()
    analytic = {
        name: t.grad.copy() if t.grad is not None else np.zeros_like(t.data)
        for name, t in tensors
    }

    rng = np.random.default_rng(seed)
    worst = 0.0
    for name, t in tensors:
        indices = (
            sample_indices(t.shape, samples_per_tensor, rng)
            if samples_per_tensor
            else None
        )
        if indices is None:
            indices = list(np.ndindex(t.shape))
        got = np.array([analytic[name][idx] for idx in indices])
        errors = [
            relative_error(got, numerical_grad(fn, t, indices, h)[1], floor) for h in steps
        ]
        err = float(np.min(errors, axis=0).max(initial=0.0))
        logger.debug(f"[GradCheck] {name}: max relative error {err:.3e}")
        worst = max(worst, err)
    return worst
