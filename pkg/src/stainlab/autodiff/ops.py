"""Differentiable ops used by the translation networks.

Convolutions run as im2col views (`as_strided`) feeding BLAS matmuls; their
backward passes reuse the same machinery.  All reductions (losses, norm
statistics) accumulate in float64 regardless of the working dtype.
"""

from __future__ import annotations

import numpy as np

from ..errors import InvalidArgumentError, ShapeError
from .tensor import Tensor, make_node


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _check_nchw(x: Tensor, who: str):
    if x.ndim != 4:
        raise ShapeError(f"{who} expects NCHW input, got shape {x.shape}")


def _pad_hw(arr: np.ndarray, p: int) -> np.ndarray:
    if p == 0:
        return arr
    return np.pad(arr, ((0, 0), (0, 0), (p, p), (p, p)))


def _im2col(arr: np.ndarray, kh: int, kw: int, stride: int) -> np.ndarray:
    """View of shape (N, C, Ho, Wo, kh, kw) over a padded NCHW array."""
    n, c, h, w = arr.shape
    ho = (h - kh) // stride + 1
    wo = (w - kw) // stride + 1
    s0, s1, s2, s3 = arr.strides
    return np.lib.stride_tricks.as_strided(
        arr,
        shape=(n, c, ho, wo, kh, kw),
        strides=(s0, s1, s2 * stride, s3 * stride, s2, s3),
        writeable=False,
    )


def _conv_forward(xp: np.ndarray, w: np.ndarray, stride: int) -> tuple[np.ndarray, np.ndarray]:
    co, ci, kh, kw = w.shape
    cols = _im2col(xp, kh, kw, stride)
    n, _, ho, wo = cols.shape[0], cols.shape[1], cols.shape[2], cols.shape[3]
    flat = np.ascontiguousarray(cols.transpose(0, 2, 3, 1, 4, 5)).reshape(
        n * ho * wo, ci * kh * kw
    )
    out = flat @ w.reshape(co, -1).T
    return out.reshape(n, ho, wo, co).transpose(0, 3, 1, 2), flat


def _scatter_cols(tmp: np.ndarray, out_shape: tuple, stride: int) -> np.ndarray:
    """Adjoint of _im2col: tmp is (N, Ho, Wo, C, kh, kw), scatter-add into
    an array of out_shape (N, C, H, W)."""
    n, ho, wo, c, kh, kw = tmp.shape
    dest = np.zeros(out_shape, dtype=tmp.dtype)
    for i in range(kh):
        for j in range(kw):
            dest[:, :, i : i + stride * ho : stride, j : j + stride * wo : stride] += (
                tmp[:, :, :, :, i, j].transpose(0, 3, 1, 2)
            )
    return dest


def conv2d(x, w, b=None, stride: int = 1, padding: int = 0) -> Tensor:
    """2-D cross correlation, NCHW input, weight (Cout, Cin, kh, kw).

    Output spatial size: floor((H + 2*padding - kh) / stride) + 1.
    """
    x, w = _as_tensor(x), _as_tensor(w)
    _check_nchw(x, "conv2d")
    if w.ndim != 4:
        raise ShapeError(f"conv2d weight must be 4-D, got {w.shape}")
    if x.shape[1] != w.shape[1]:
        raise ShapeError(f"channel mismatch: input {x.shape[1]}, weight {w.shape[1]}")
    if stride < 1 or padding < 0:
        raise InvalidArgumentError("conv2d needs stride >= 1 and padding >= 0")
    co, ci, kh, kw = w.shape
    if x.shape[2] + 2 * padding < kh or x.shape[3] + 2 * padding < kw:
        raise ShapeError(f"kernel {kh}x{kw} larger than padded input {x.shape}")

    xp = _pad_hw(x.data, padding)
    out, flat = _conv_forward(xp, w.data, stride)
    if b is not None:
        b = _as_tensor(b)
        if b.shape != (co,):
            raise ShapeError(f"bias shape {b.shape} != ({co},)")
        out = out + b.data[None, :, None, None]

    parents = (x, w) if b is None else (x, w, b)

    def backward(g):
        n, _, ho, wo = g.shape
        g2 = g.transpose(0, 2, 3, 1).reshape(n * ho * wo, co)
        if w.requires_grad:
            w.accumulate_grad((g2.T @ flat).reshape(w.shape))
        if x.requires_grad:
            tmp = np.tensordot(g, w.data, axes=([1], [0]))  # (N,Ho,Wo,Ci,kh,kw)
            dxp = _scatter_cols(tmp, xp.shape, stride)
            if padding:
                dxp = dxp[:, :, padding:-padding or None, padding:-padding or None]
            x.accumulate_grad(dxp)
        if b is not None and b.requires_grad:
            b.accumulate_grad(g.sum(axis=(0, 2, 3), dtype=np.float64).astype(g.dtype))

    return make_node(out, parents, backward)


def conv_transpose2d(
    x, w, b=None, stride: int = 1, padding: int = 0, output_padding: int = 0
) -> Tensor:
    """Transposed convolution, weight (Cin, Cout, kh, kw).

    Output spatial size: (H - 1)*stride - 2*padding + kh + output_padding.
    The forward pass is exactly the input-gradient of conv2d, so upsampling
    layers mirror their downsampling counterparts.
    """
    x, w = _as_tensor(x), _as_tensor(w)
    _check_nchw(x, "conv_transpose2d")
    if w.ndim != 4:
        raise ShapeError(f"conv_transpose2d weight must be 4-D, got {w.shape}")
    if x.shape[1] != w.shape[0]:
        raise ShapeError(f"channel mismatch: input {x.shape[1]}, weight {w.shape[0]}")
    if stride < 1 or padding < 0:
        raise InvalidArgumentError("conv_transpose2d needs stride >= 1 and padding >= 0")
    if not 0 <= output_padding < stride:
        raise InvalidArgumentError("output_padding must satisfy 0 <= op < stride")
    ci, co, kh, kw = w.shape
    n, _, h, win = x.shape
    ho = (h - 1) * stride - 2 * padding + kh + output_padding
    wo = (win - 1) * stride - 2 * padding + kw + output_padding
    if ho < 1 or wo < 1:
        raise ShapeError(f"conv_transpose2d output collapses to {ho}x{wo}")

    tmp = np.tensordot(x.data, w.data, axes=([1], [0]))  # (N,H,W,Cout,kh,kw)
    full_h = (h - 1) * stride + kh + output_padding
    full_w = (win - 1) * stride + kw + output_padding
    full = _scatter_cols(tmp, (n, co, full_h, full_w), stride)
    out = full[:, :, padding : full_h - padding, padding : full_w - padding]
    if b is not None:
        b = _as_tensor(b)
        if b.shape != (co,):
            raise ShapeError(f"bias shape {b.shape} != ({co},)")
        out = out + b.data[None, :, None, None]
    else:
        out = out.copy()

    parents = (x, w) if b is None else (x, w, b)

    def backward(g):
        # Zero-pad g back to the pre-crop canvas so strided views line up.
        gp = np.zeros((n, co, full_h, full_w), dtype=g.dtype)
        gp[:, :, padding : full_h - padding, padding : full_w - padding] = g
        if x.requires_grad:
            # _conv_forward wants (O, C, kh, kw) = (Cin, Cout, kh, kw): w already is.
            dx, _ = _conv_forward(gp, w.data, stride)
            x.accumulate_grad(dx)
        if w.requires_grad:
            cols = _im2col(gp, kh, kw, stride)  # (N, Cout, H, W, kh, kw)
            dw = np.tensordot(x.data, cols, axes=([0, 2, 3], [0, 2, 3]))
            w.accumulate_grad(dw)
        if b is not None and b.requires_grad:
            b.accumulate_grad(g.sum(axis=(0, 2, 3), dtype=np.float64).astype(g.dtype))

    return make_node(out, parents, backward)


def instance_norm(x, eps: float = 1e-5) -> Tensor:
    """Per-sample, per-channel normalization over the spatial axes (no
    learned affine).  Statistics accumulate in float64."""
    x = _as_tensor(x)
    _check_nchw(x, "instance_norm")
    if x.shape[2] * x.shape[3] < 2:
        raise ShapeError("instance_norm needs at least 2 spatial elements")
    data64 = x.data.astype(np.float64)
    mu = data64.mean(axis=(2, 3), keepdims=True)
    var = data64.var(axis=(2, 3), keepdims=True)
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = (data64 - mu) * inv_std
    out = xhat.astype(x.dtype)

    def backward(g):
        g64 = g.astype(np.float64)
        gm = g64.mean(axis=(2, 3), keepdims=True)
        gx = (g64 * xhat).mean(axis=(2, 3), keepdims=True)
        dx = inv_std * (g64 - gm - xhat * gx)
        x.accumulate_grad(dx.astype(x.dtype))

    return make_node(out, (x,), backward)


def relu(x) -> Tensor:
    x = _as_tensor(x)
    mask = x.data > 0
    out = np.where(mask, x.data, 0)

    def backward(g):
        x.accumulate_grad(g * mask)

    return make_node(out, (x,), backward)


def leaky_relu(x, negative_slope: float = 0.2) -> Tensor:
    x = _as_tensor(x)
    mask = x.data > 0
    out = np.where(mask, x.data, negative_slope * x.data)

    def backward(g):
        x.accumulate_grad(g * np.where(mask, 1.0, negative_slope).astype(g.dtype))

    return make_node(out, (x,), backward)


def tanh(x) -> Tensor:
    x = _as_tensor(x)
    out = np.tanh(x.data)

    def backward(g):
        x.accumulate_grad(g * (1.0 - out * out))

    return make_node(out, (x,), backward)


def sigmoid(x) -> Tensor:
    x = _as_tensor(x)
    out = 1.0 / (1.0 + np.exp(-x.data))

    def backward(g):
        x.accumulate_grad(g * out * (1.0 - out))

    return make_node(out, (x,), backward)


def add(a, b) -> Tensor:
    """Elementwise sum of two same-shape tensors (residual connections)."""
    a, b = _as_tensor(a), _as_tensor(b)
    if a.shape != b.shape:
        raise ShapeError(f"add shape mismatch: {a.shape} vs {b.shape}")
    out = a.data + b.data

    def backward(g):
        if a.requires_grad:
            a.accumulate_grad(g)
        if b.requires_grad:
            b.accumulate_grad(g)

    return make_node(out, (a, b), backward)


def affine(x, gain: float = 1.0, bias: float = 0.0) -> Tensor:
    """y = gain * x + bias with scalar constants (range remapping)."""
    x = _as_tensor(x)
    out = gain * x.data + bias

    def backward(g):
        x.accumulate_grad(gain * g)

    return make_node(out, (x,), backward)


def scale(x, k: float) -> Tensor:
    return affine(x, gain=k, bias=0.0)


def _loss_pair(a, b) -> tuple[Tensor, Tensor]:
    a, b = _as_tensor(a), _as_tensor(b)
    if a.shape != b.shape:
        raise ShapeError(f"loss shape mismatch: {a.shape} vs {b.shape}")
    if a.data.size == 0:
        raise InvalidArgumentError("loss over empty tensors is undefined")
    return a, b


def l1_loss(a, b) -> Tensor:
    """Mean absolute error as a scalar tensor.  The subgradient at exact
    ties is taken as 0."""
    a, b = _loss_pair(a, b)
    diff = a.data - b.data
    val = np.mean(np.abs(diff), dtype=np.float64)
    out = np.asarray(val, dtype=a.dtype)

    def backward(g):
        gd = (np.sign(diff) / diff.size) * g
        if a.requires_grad:
            a.accumulate_grad(gd.astype(a.dtype))
        if b.requires_grad:
            b.accumulate_grad(-gd.astype(b.dtype))

    return make_node(out, (a, b), backward)


def mse_loss(a, b) -> Tensor:
    """Mean squared error as a scalar tensor."""
    a, b = _loss_pair(a, b)
    diff = a.data - b.data
    val = np.mean(diff.astype(np.float64) ** 2)
    out = np.asarray(val, dtype=a.dtype)

    def backward(g):
        gd = (2.0 * diff / diff.size) * g
        if a.requires_grad:
            a.accumulate_grad(gd.astype(a.dtype))
        if b.requires_grad:
            b.accumulate_grad(-gd.astype(b.dtype))

    return make_node(out, (a, b), backward)


def conv2d_output_shape(h: int, w: int, kernel: int, stride: int, padding: int) -> tuple[int, int]:
    """Spatial output size of conv2d for the given geometry."""
    return (
        (h + 2 * padding - kernel) // stride + 1,
        (w + 2 * padding - kernel) // stride + 1,
    )
