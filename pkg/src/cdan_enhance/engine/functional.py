"""Differentiable ops needed by the CDAN forward pass.

Images use the N x C x H x W layout. Convolutions go through an im2col
matrix per sample followed by a single BLAS matmul; the column matrix is
rebuilt in the backward pass instead of being saved, which keeps peak
memory at one sample's worth of columns.
"""

from typing import Optional, Sequence, Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.special import expit

from cdan_enhance.core.models.errors import ShapeError
from cdan_enhance.engine.tensor import DTYPE, Tensor, make_result, unbroadcast

BN_EPS = 1e-5
BN_MOMENTUM = 0.1


class RunningStats:
    """Batch-norm running mean/variance buffers (not learnable)."""

    def __init__(self, num_channels: int, momentum: float = BN_MOMENTUM):
        self.mean = np.zeros(num_channels, dtype=DTYPE)
        self.var = np.ones(num_channels, dtype=DTYPE)
        self.momentum = momentum

    def update(self, batch_mean: np.ndarray, batch_var_unbiased: np.ndarray):
        m = self.momentum
        self.mean *= 1.0 - m
        self.mean += m * batch_mean
        self.var *= 1.0 - m
        self.var += m * batch_var_unbiased


def _check_4d(x: Tensor, what: str):
    if x.ndim != 4:
        raise ShapeError(f"{what} expects an N x C x H x W tensor, got shape {x.shape}")


def _im2col(
    x: np.ndarray, kh: int, kw: int, stride: int, out_h: int, out_w: int
) -> np.ndarray:
    """(C, Hp, Wp) -> (out_h * out_w, C * kh * kw) patch matrix."""
    windows = sliding_window_view(x, (kh, kw), axis=(1, 2))
    windows = windows[:, : stride * (out_h - 1) + 1 : stride, : stride * (out_w - 1) + 1 : stride]
    c = x.shape[0]
    return np.ascontiguousarray(windows.transpose(1, 2, 0, 3, 4)).reshape(
        out_h * out_w, c * kh * kw
    )


def _col2im(
    cols: np.ndarray,
    channels: int,
    height: int,
    width: int,
    kh: int,
    kw: int,
    stride: int,
    out_h: int,
    out_w: int,
) -> np.ndarray:
    """Scatter-add the inverse of `_im2col` into a (C, height, width) array."""
    img = np.zeros((channels, height, width), dtype=DTYPE)
    patches = cols.reshape(out_h, out_w, channels, kh, kw).transpose(2, 3, 4, 0, 1)
    h_end = stride * (out_h - 1) + 1
    w_end = stride * (out_w - 1) + 1
    for i in range(kh):
        for j in range(kw):
            img[:, i : i + h_end : stride, j : j + w_end : stride] += patches[:, i, j]
    return img


def conv2d(
    x: Tensor,
    weight: Tensor,
    bias: Optional[Tensor] = None,
    stride: int = 1,
    padding: int = 0,
) -> Tensor:
    _check_4d(x, "conv2d")
    if weight.ndim != 4:
        raise ShapeError(f"conv2d weight must be OutC x InC x kH x kW, got {weight.shape}")
    n, c, h, w = x.shape
    out_c, in_c, kh, kw = weight.shape
    if c != in_c:
        raise ShapeError(
            f"conv2d channel mismatch: input {x.shape} vs weight {weight.shape}"
        )
    if bias is not None and bias.shape != (out_c,):
        raise ShapeError(f"conv2d bias {bias.shape} does not match weight {weight.shape}")
    if stride < 1 or padding < 0:
        raise ValueError(f"conv2d needs stride >= 1 and padding >= 0, got {stride}, {padding}")
    hp, wp = h + 2 * padding, w + 2 * padding
    if hp < kh or wp < kw:
        raise ShapeError(
            f"conv2d input {x.shape} with padding {padding} is smaller than kernel {weight.shape}"
        )
    out_h = (hp - kh) // stride + 1
    out_w = (wp - kw) // stride + 1

    xp = np.pad(x.data, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    w2 = weight.data.reshape(out_c, -1)
    out = np.empty((n, out_c, out_h, out_w), dtype=DTYPE)
    for i in range(n):
        cols = _im2col(xp[i], kh, kw, stride, out_h, out_w)
        out[i] = (cols @ w2.T).T.reshape(out_c, out_h, out_w)
    if bias is not None:
        out += bias.data.reshape(1, out_c, 1, 1)

    def backward_fn(g: np.ndarray):
        dx = np.empty_like(xp) if x.requires_grad else None
        dw = np.zeros_like(w2) if weight.requires_grad else None
        for i in range(n):
            g2 = g[i].reshape(out_c, out_h * out_w)
            if dw is not None:
                dw += g2 @ _im2col(xp[i], kh, kw, stride, out_h, out_w)
            if dx is not None:
                dcols = g2.T @ w2
                dx[i] = _col2im(dcols, c, hp, wp, kh, kw, stride, out_h, out_w)
        if dx is not None:
            dx = dx[:, :, padding : padding + h, padding : padding + w]
        db = g.sum(axis=(0, 2, 3)) if bias is not None and bias.requires_grad else None
        return (
            dx,
            dw.reshape(weight.shape) if dw is not None else None,
            db,
        )

    inputs = (x, weight) if bias is None else (x, weight, bias)
    return make_result("conv2d", out, inputs, backward_fn)


def conv_transpose2d(
    x: Tensor,
    weight: Tensor,
    bias: Optional[Tensor] = None,
    stride: int = 1,
    padding: int = 0,
) -> Tensor:
    """Adjoint of `conv2d` w.r.t. its input; weight is InC x OutC x kH x kW."""
    _check_4d(x, "conv_transpose2d")
    if weight.ndim != 4:
        raise ShapeError(
            f"conv_transpose2d weight must be InC x OutC x kH x kW, got {weight.shape}"
        )
    n, c, h, w = x.shape
    in_c, out_c, kh, kw = weight.shape
    if c != in_c:
        raise ShapeError(
            f"conv_transpose2d channel mismatch: input {x.shape} vs weight {weight.shape}"
        )
    if bias is not None and bias.shape != (out_c,):
        raise ShapeError(
            f"conv_transpose2d bias {bias.shape} does not match weight {weight.shape}"
        )
    if stride < 1 or padding < 0:
        raise ValueError(
            f"conv_transpose2d needs stride >= 1 and padding >= 0, got {stride}, {padding}"
        )
    full_h = (h - 1) * stride + kh
    full_w = (w - 1) * stride + kw
    out_h = full_h - 2 * padding
    out_w = full_w - 2 * padding
    if out_h < 1 or out_w < 1:
        raise ShapeError(
            f"conv_transpose2d padding {padding} leaves no output for input {x.shape} "
            f"and weight {weight.shape}"
        )

    w2 = weight.data.reshape(in_c, -1)
    out = np.empty((n, out_c, out_h, out_w), dtype=DTYPE)
    for i in range(n):
        cols = x.data[i].reshape(in_c, h * w).T @ w2
        full = _col2im(cols, out_c, full_h, full_w, kh, kw, stride, h, w)
        out[i] = full[:, padding : padding + out_h, padding : padding + out_w]
    if bias is not None:
        out += bias.data.reshape(1, out_c, 1, 1)

    def backward_fn(g: np.ndarray):
        dx = np.empty_like(x.data) if x.requires_grad else None
        dw = np.zeros_like(w2) if weight.requires_grad else None
        g_full = np.zeros((out_c, full_h, full_w), dtype=DTYPE)
        for i in range(n):
            g_full[:, padding : padding + out_h, padding : padding + out_w] = g[i]
            cols = _im2col(g_full, kh, kw, stride, h, w)
            if dw is not None:
                dw += x.data[i].reshape(in_c, h * w) @ cols
            if dx is not None:
                dx[i] = (cols @ w2.T).T.reshape(in_c, h, w)
        db = g.sum(axis=(0, 2, 3)) if bias is not None and bias.requires_grad else None
        return dx, dw.reshape(weight.shape) if dw is not None else None, db

    inputs = (x, weight) if bias is None else (x, weight, bias)
    return make_result("conv_transpose2d", out, inputs, backward_fn)


def batch_norm(
    x: Tensor,
    gamma: Tensor,
    beta: Tensor,
    running: RunningStats,
    training: bool,
    eps: float = BN_EPS,
) -> Tensor:
    _check_4d(x, "batch_norm")
    n, c, h, w = x.shape
    if gamma.shape != (c,) or beta.shape != (c,):
        raise ShapeError(
            f"batch_norm gamma {gamma.shape} / beta {beta.shape} do not match input {x.shape}"
        )
    shape = (1, c, 1, 1)
    count = n * h * w
    if training:
        if count < 2:
            raise ShapeError(
                f"batch_norm in train mode needs at least 2 values per channel, got input {x.shape}"
            )
        mean = x.data.mean(axis=(0, 2, 3))
        centered = x.data - mean.reshape(shape)
        var = (centered * centered).mean(axis=(0, 2, 3))
        running.update(mean, var * count / (count - 1))
    else:
        mean = running.mean
        centered = x.data - mean.reshape(shape)
        var = running.var
    inv_std = 1.0 / np.sqrt(var + eps)
    x_hat = centered * inv_std.reshape(shape)
    out = x_hat * gamma.data.reshape(shape) + beta.data.reshape(shape)

    def backward_fn(g: np.ndarray):
        dgamma = (g * x_hat).sum(axis=(0, 2, 3)) if gamma.requires_grad else None
        dbeta = g.sum(axis=(0, 2, 3)) if beta.requires_grad else None
        dx = None
        if x.requires_grad:
            dx_hat = g * gamma.data.reshape(shape)
            if training:
                sum_dx_hat = dx_hat.sum(axis=(0, 2, 3)).reshape(shape)
                sum_dx_hat_xhat = (dx_hat * x_hat).sum(axis=(0, 2, 3)).reshape(shape)
                dx = (inv_std.reshape(shape) / count) * (
                    count * dx_hat - sum_dx_hat - x_hat * sum_dx_hat_xhat
                )
            else:
                dx = dx_hat * inv_std.reshape(shape)
        return dx, dgamma, dbeta

    return make_result("batch_norm", out, (x, gamma, beta), backward_fn)


def relu(x: Tensor) -> Tensor:
    mask = x.data > 0
    out = np.where(mask, x.data, 0.0)
    return make_result("relu", out, (x,), lambda g: (g * mask,))


def sigmoid(x: Tensor) -> Tensor:
    s = expit(x.data)
    return make_result("sigmoid", s, (x,), lambda g: (g * s * (1.0 - s),))


def max_pool2d(x: Tensor, kernel_size: int = 2, stride: int = 2) -> Tensor:
    """Non-overlapping max pooling; ties send the gradient to the first element."""
    _check_4d(x, "max_pool2d")
    if kernel_size != stride:
        raise ValueError(
            f"max_pool2d supports non-overlapping windows only, got k={kernel_size}, s={stride}"
        )
    k = kernel_size
    n, c, h, w = x.shape
    if h % k or w % k:
        raise ShapeError(f"max_pool2d needs spatial dims divisible by {k}, got {x.shape}")
    oh, ow = h // k, w // k
    windows = x.data.reshape(n, c, oh, k, ow, k).transpose(0, 1, 2, 4, 3, 5).reshape(
        n, c, oh, ow, k * k
    )
    idx = windows.argmax(axis=-1)
    out = np.take_along_axis(windows, idx[..., None], axis=-1)[..., 0]

    def backward_fn(g: np.ndarray):
        dwin = np.zeros((n, c, oh, ow, k * k), dtype=DTYPE)
        np.put_along_axis(dwin, idx[..., None], g[..., None], axis=-1)
        dx = dwin.reshape(n, c, oh, ow, k, k).transpose(0, 1, 2, 4, 3, 5).reshape(n, c, h, w)
        return (dx,)

    return make_result("max_pool2d", out, (x,), backward_fn)


def dropout(x: Tensor, p: float, training: bool, rng: np.random.Generator) -> Tensor:
    if not 0.0 <= p < 1.0:
        raise ValueError(f"dropout probability must be in [0, 1), got {p}")
    if not training or p == 0.0:
        return x
    scale = 1.0 / (1.0 - p)
    mask = (rng.random(x.shape) >= p) * scale
    return make_result("dropout", x.data * mask, (x,), lambda g: (g * mask,))


def concat_channels(*tensors: Tensor) -> Tensor:
    if len(tensors) < 2:
        raise ShapeError("concat_channels needs at least two tensors")
    for t in tensors:
        _check_4d(t, "concat_channels")
    ref = tensors[0].shape
    for t in tensors[1:]:
        if t.shape[0] != ref[0] or t.shape[2:] != ref[2:]:
            raise ShapeError(f"concat_channels shape mismatch: {ref} vs {t.shape}")
    out = np.concatenate([t.data for t in tensors], axis=1)
    bounds = np.cumsum([t.shape[1] for t in tensors])[:-1]

    def backward_fn(g: np.ndarray):
        return tuple(np.split(g, bounds, axis=1))

    return make_result("concat_channels", out, tensors, backward_fn)


def _broadcast_shape(a: Tensor, b: Tensor, op: str) -> Tuple[int, ...]:
    try:
        return np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(f"{op} shape mismatch: {a.shape} vs {b.shape}") from None


def add(a: Tensor, b: Tensor) -> Tensor:
    _broadcast_shape(a, b, "add")
    return make_result(
        "add",
        a.data + b.data,
        (a, b),
        lambda g: (unbroadcast(g, a.shape), unbroadcast(g, b.shape)),
    )


def sub(a: Tensor, b: Tensor) -> Tensor:
    _broadcast_shape(a, b, "sub")
    return make_result(
        "sub",
        a.data - b.data,
        (a, b),
        lambda g: (unbroadcast(g, a.shape), unbroadcast(-g, b.shape)),
    )


def mul(a: Tensor, b: Tensor) -> Tensor:
    _broadcast_shape(a, b, "mul")
    return make_result(
        "mul",
        a.data * b.data,
        (a, b),
        lambda g: (unbroadcast(g * b.data, a.shape), unbroadcast(g * a.data, b.shape)),
    )


def broadcast_mul(x: Tensor, attn: Tensor) -> Tensor:
    """Scale N x C x H x W features by an N x C x 1 x 1 or N x 1 x H x W map."""
    _check_4d(x, "broadcast_mul")
    _check_4d(attn, "broadcast_mul")
    n, c, h, w = x.shape
    if attn.shape not in ((n, c, 1, 1), (n, 1, h, w)):
        raise ShapeError(
            f"broadcast_mul attention {attn.shape} must be {(n, c, 1, 1)} or {(n, 1, h, w)} "
            f"for features {x.shape}"
        )
    return mul(x, attn)


def global_avg_pool(x: Tensor) -> Tensor:
    _check_4d(x, "global_avg_pool")
    n, c, h, w = x.shape
    out = x.data.mean(axis=(2, 3), keepdims=True)
    return make_result(
        "global_avg_pool",
        out,
        (x,),
        lambda g: (np.broadcast_to(g / (h * w), x.shape).copy(),),
    )


def _first_argmax_reduce(x: Tensor, axes: Tuple[int, ...], op: str) -> Tensor:
    # move reduced axes last and flatten them so argmax picks the first row-major maximum
    keep = [i for i in range(x.ndim) if i not in axes]
    perm = keep + list(axes)
    moved = x.data.transpose(perm)
    kept_shape = moved.shape[: len(keep)]
    flat = moved.reshape(kept_shape + (-1,))
    idx = flat.argmax(axis=-1)
    values = np.take_along_axis(flat, idx[..., None], axis=-1)[..., 0]
    out_shape = tuple(1 if i in axes else s for i, s in enumerate(x.shape))
    out = values.reshape(out_shape)

    def backward_fn(g: np.ndarray):
        dflat = np.zeros_like(flat)
        np.put_along_axis(dflat, idx[..., None], g.reshape(kept_shape)[..., None], axis=-1)
        dmoved = dflat.reshape(moved.shape)
        return (dmoved.transpose(np.argsort(perm)),)

    return make_result(op, out, (x,), backward_fn)


def global_max_pool(x: Tensor) -> Tensor:
    _check_4d(x, "global_max_pool")
    return _first_argmax_reduce(x, (2, 3), "global_max_pool")


def channel_mean(x: Tensor) -> Tensor:
    _check_4d(x, "channel_mean")
    c = x.shape[1]
    out = x.data.mean(axis=1, keepdims=True)
    return make_result(
        "channel_mean",
        out,
        (x,),
        lambda g: (np.broadcast_to(g / c, x.shape).copy(),),
    )


def channel_max(x: Tensor) -> Tensor:
    _check_4d(x, "channel_max")
    return _first_argmax_reduce(x, (1,), "channel_max")


def square(x: Tensor) -> Tensor:
    return make_result("square", x.data * x.data, (x,), lambda g: (2.0 * g * x.data,))


def abs_(x: Tensor) -> Tensor:
    return make_result("abs", np.abs(x.data), (x,), lambda g: (g * np.sign(x.data),))


def sum_(x: Tensor) -> Tensor:
    out = np.asarray(x.data.sum())
    return make_result(
        "sum", out, (x,), lambda g: (np.broadcast_to(g, x.shape).copy(),)
    )


def scale(x: Tensor, factor: float) -> Tensor:
    return make_result("scale", x.data * factor, (x,), lambda g: (g * factor,))


def normalize_channels(x: Tensor, mean: Sequence[float], std: Sequence[float]) -> Tensor:
    _check_4d(x, "normalize_channels")
    m = np.asarray(mean, dtype=DTYPE).reshape(1, -1, 1, 1)
    s = np.asarray(std, dtype=DTYPE).reshape(1, -1, 1, 1)
    if m.shape[1] != x.shape[1] or s.shape[1] != x.shape[1]:
        raise ShapeError(f"normalize_channels stats do not match input {x.shape}")
    return make_result("normalize_channels", (x.data - m) / s, (x,), lambda g: (g / s,))


def pad_reflect(x: Tensor, pad_bottom: int, pad_right: int) -> Tensor:
    """Reflect-pad on the bottom and right edges (edge pixel not repeated)."""
    _check_4d(x, "pad_reflect")
    n, c, h, w = x.shape
    if pad_bottom == 0 and pad_right == 0:
        return x
    if pad_bottom > h - 1 or pad_right > w - 1:
        raise ShapeError(
            f"pad_reflect of ({pad_bottom}, {pad_right}) is too large for input {x.shape}"
        )
    rows = np.concatenate([np.arange(h), h - 2 - np.arange(pad_bottom)])
    cols = np.concatenate([np.arange(w), w - 2 - np.arange(pad_right)])
    out = x.data[:, :, rows][:, :, :, cols]

    def backward_fn(g: np.ndarray):
        tmp = np.zeros((n, c, h, g.shape[3]), dtype=DTYPE)
        np.add.at(tmp, (slice(None), slice(None), rows), g)
        dx = np.zeros((n, c, h, w), dtype=DTYPE)
        np.add.at(dx, (slice(None), slice(None), slice(None), cols), tmp)
        return (dx,)

    return make_result("pad_reflect", out, (x,), backward_fn)


def crop(x: Tensor, height: int, width: int) -> Tensor:
    """Keep the top-left height x width window."""
    _check_4d(x, "crop")
    n, c, h, w = x.shape
    if height > h or width > w or height < 1 or width < 1:
        raise ShapeError(f"crop to {(height, width)} is invalid for input {x.shape}")
    if height == h and width == w:
        return x
    out = x.data[:, :, :height, :width].copy()

    def backward_fn(g: np.ndarray):
        dx = np.zeros(x.shape, dtype=DTYPE)
        dx[:, :, :height, :width] = g
        return (dx,)

    return make_result("crop", out, (x,), backward_fn)
