"""Dense NHWC layer primitives on numpy arrays.

Tensors are plain ``numpy.ndarray`` values. Parameters and activations are
float32; products and sums are accumulated in float64 and rounded back to
the operands' dtype, so float64 inputs (used by gradient checks) stay
float64 end to end.

Forward matmuls go through ``einsum`` without path optimisation rather
than BLAS: BLAS picks different kernels depending on the row count, which
makes a row's result depend on how many other rows share the call.  With
``einsum`` every output row is reduced the same way regardless of batch
size, so inference is batch-invariant bit for bit.
"""
from __future__ import annotations

import math

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import DimensionError, NonFiniteError

PADDINGS = ("same", "valid")


def as_tensor(x, name: str = "tensor", dtype=np.float32) -> np.ndarray:
    """Validate external input and return a contiguous float array.

    Raises NonFiniteError on NaN/Inf and DimensionError on zero-sized axes.
    """
    arr = np.ascontiguousarray(np.asarray(x, dtype=dtype))
    if any(d <= 0 for d in arr.shape):
        raise DimensionError(f"{name}: every dimension must be positive, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise NonFiniteError(f"{name}: contains NaN or Inf")
    return arr


def as_matrix(x, name: str = "matrix") -> np.ndarray:
    arr = np.asarray(x)
    if arr.ndim != 2:
        raise DimensionError(f"{name}: expected a rank-2 array, got shape {arr.shape}")
    return arr


def _out_dtype(*arrays):
    dt = np.result_type(*arrays)
    return dt if np.issubdtype(dt, np.floating) else np.dtype(np.float32)


def rowwise_matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """float64 product whose rows do not depend on the other rows of ``a``."""
    a = np.ascontiguousarray(a, dtype=np.float64)
    b = np.ascontiguousarray(b, dtype=np.float64)
    return np.einsum("mk,kc->mc", a, b)


def _require_rank(x, rank, name):
    if x.ndim != rank:
        raise DimensionError(f"{name}: expected rank {rank}, got shape {x.shape}")


def conv_geometry(size: int, k: int, stride: int, padding: str):
    """Return (pad_before, pad_after, out_size) along one spatial axis."""
    if stride < 1:
        raise DimensionError(f"stride must be positive, got {stride}")
    if padding == "same":
        out = math.ceil(size / stride)
        total = max((out - 1) * stride + k - size, 0)
        return total // 2, total - total // 2, out
    if padding == "valid":
        if size < k:
            raise DimensionError(f"kernel extent {k} exceeds input extent {size} with valid padding")
        return 0, 0, (size - k) // stride + 1
    raise ValueError(f"padding must be one of {PADDINGS}, got {padding!r}")


def _im2col(x, kh, kw, stride, padding):
    n, h, w, c = x.shape
    pt, pb, ho = conv_geometry(h, kh, stride, padding)
    pl, pr, wo = conv_geometry(w, kw, stride, padding)
    xp = np.pad(x, ((0, 0), (pt, pb), (pl, pr), (0, 0))) if (pt or pb or pl or pr) else x
    win = sliding_window_view(xp, (kh, kw), axis=(1, 2))[:, ::stride, ::stride][:, :ho, :wo]
    # (N, Ho, Wo, C, kh, kw) -> rows ordered like kernel[kh, kw, Cin]
    cols = win.transpose(0, 1, 2, 4, 5, 3).reshape(n * ho * wo, kh * kw * c)
    return cols, (pt, pb, pl, pr), ho, wo


def conv2d_forward(x, kernel, bias, stride: int = 1, padding: str = "same") -> np.ndarray:
    """2-D cross-correlation, NHWC input and HWIO kernel."""
    _require_rank(x, 4, "conv2d input")
    _require_rank(kernel, 4, "conv2d kernel")
    kh, kw, cin, cout = kernel.shape
    if x.shape[3] != cin:
        raise DimensionError(
            f"conv2d: input channels (axis 3 of input) = {x.shape[3]} "
            f"but kernel input channels (axis 2 of kernel) = {cin}"
        )
    if np.shape(bias) != (cout,):
        raise DimensionError(f"conv2d: bias shape {np.shape(bias)} does not match kernel out-channels {cout}")
    cols, _, ho, wo = _im2col(x, kh, kw, stride, padding)
    out = rowwise_matmul(cols, kernel.reshape(-1, cout)) + np.asarray(bias, dtype=np.float64)
    return out.reshape(x.shape[0], ho, wo, cout).astype(_out_dtype(x, kernel, bias))


def conv2d_backward(x, kernel, stride, padding, grad_out):
    """Return (d_kernel, d_bias, d_input) for ``conv2d_forward``."""
    kh, kw, cin, cout = kernel.shape
    n, h, w, _ = x.shape
    cols, (pt, pb, pl, pr), ho, wo = _im2col(x, kh, kw, stride, padding)
    g = np.asarray(grad_out, dtype=np.float64).reshape(-1, cout)
    dt = _out_dtype(x, kernel)
    dk = (cols.astype(np.float64).T @ g).reshape(kernel.shape)
    db = g.sum(axis=0)
    dcols = (g @ kernel.reshape(-1, cout).astype(np.float64).T).reshape(n, ho, wo, kh, kw, cin)
    dxp = np.zeros((n, h + pt + pb, w + pl + pr, cin))
    for i in range(kh):
        for j in range(kw):
            dxp[:, i:i + stride * ho:stride, j:j + stride * wo:stride, :] += dcols[:, :, :, i, j, :]
    dx = dxp[:, pt:pt + h, pl:pl + w, :]
    return dk.astype(dt), db.astype(dt), dx.astype(dt)


def maxpool2d(x, window: int, stride: int) -> np.ndarray:
    _require_rank(x, 4, "maxpool input")
    n, h, w, c = x.shape
    if window > h or window > w:
        raise DimensionError(f"maxpool: window {window} larger than spatial dims {h}x{w}")
    if window < 1 or stride < 1:
        raise DimensionError("maxpool: window and stride must be positive")
    win = sliding_window_view(x, (window, window), axis=(1, 2))[:, ::stride, ::stride]
    return win.max(axis=(4, 5))


def maxpool2d_backward(x, window, stride, grad_out):
    n, h, w, c = x.shape
    win = sliding_window_view(x, (window, window), axis=(1, 2))[:, ::stride, ::stride]
    ho, wo = win.shape[1], win.shape[2]
    arg = win.reshape(n, ho, wo, c, window * window).argmax(axis=-1)
    g = np.asarray(grad_out, dtype=np.float64)
    dx = np.zeros(x.shape)
    for i in range(window):
        for j in range(window):
            hit = arg == i * window + j
            dx[:, i:i + stride * ho:stride, j:j + stride * wo:stride, :] += g * hit
    return dx.astype(_out_dtype(x))


def dense_forward(x, weights, bias) -> np.ndarray:
    _require_rank(x, 2, "dense input")
    _require_rank(weights, 2, "dense weights")
    if x.shape[1] != weights.shape[0]:
        raise DimensionError(
            f"dense: input features {x.shape[1]} != weight rows {weights.shape[0]}"
        )
    if np.shape(bias) != (weights.shape[1],):
        raise DimensionError(f"dense: bias shape {np.shape(bias)} does not match {weights.shape[1]} units")
    out = rowwise_matmul(x, weights) + np.asarray(bias, dtype=np.float64)
    return out.astype(_out_dtype(x, weights, bias))


def dense_backward(x, weights, grad_out):
    """Return (d_weights, d_bias, d_input)."""
    g = np.asarray(grad_out, dtype=np.float64)
    dt = _out_dtype(x, weights)
    dw = np.asarray(x, dtype=np.float64).T @ g
    dx = g @ np.asarray(weights, dtype=np.float64).T
    return dw.astype(dt), g.sum(axis=0).astype(dt), dx.astype(dt)


def relu(t) -> np.ndarray:
    return np.maximum(t, 0).astype(_out_dtype(t))


def relu_backward(x, grad_out):
    return np.where(np.asarray(x) > 0, grad_out, 0).astype(_out_dtype(x))


def softmax(t) -> np.ndarray:
    _require_rank(t, 2, "softmax input")
    z = np.asarray(t, dtype=np.float64)
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return (e / e.sum(axis=1, keepdims=True)).astype(_out_dtype(t))


def softmax_backward(y, grad_out):
    """Vector-Jacobian product given the softmax *output* ``y``."""
    y64 = np.asarray(y, dtype=np.float64)
    g = np.asarray(grad_out, dtype=np.float64)
    return (y64 * (g - (g * y64).sum(axis=1, keepdims=True))).astype(_out_dtype(y))


def batchnorm_forward(t, gamma, beta, mean, var, eps: float = 1e-3) -> np.ndarray:
    """Per-channel (last axis) normalisation with frozen statistics."""
    c = t.shape[-1]
    for name, p in (("gamma", gamma), ("beta", beta), ("mean", mean), ("var", var)):
        if np.shape(p) != (c,):
            raise DimensionError(f"batchnorm: {name} shape {np.shape(p)} does not match {c} channels")
    x = np.asarray(t, dtype=np.float64)
    inv = 1.0 / np.sqrt(np.asarray(var, dtype=np.float64) + eps)
    y = (x - np.asarray(mean, dtype=np.float64)) * inv * np.asarray(gamma, dtype=np.float64)
    y = y + np.asarray(beta, dtype=np.float64)
    return y.astype(_out_dtype(t, gamma, beta))


def batchnorm_backward(t, gamma, mean, var, eps, grad_out):
    """Return (d_gamma, d_beta, d_input); statistics are not trained."""
    x = np.asarray(t, dtype=np.float64)
    g = np.asarray(grad_out, dtype=np.float64)
    inv = 1.0 / np.sqrt(np.asarray(var, dtype=np.float64) + eps)
    xhat = (x - np.asarray(mean, dtype=np.float64)) * inv
    axes = tuple(range(x.ndim - 1))
    dt = _out_dtype(t, gamma)
    dgamma = (g * xhat).sum(axis=axes)
    dbeta = g.sum(axis=axes)
    dx = g * np.asarray(gamma, dtype=np.float64) * inv
    return dgamma.astype(dt), dbeta.astype(dt), dx.astype(dt)
