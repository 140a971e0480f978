"""Dense-algebra building blocks: 3x3/1x1 convolution (as patch-matrix GEMM),
ReLU, global average pooling, the affine head, and a stable softmax.

Everything is float64 and batch-independent: no layer mixes information
across the batch axis, and reductions use numpy's fixed summation order, so
outputs are bit-reproducible for identical inputs.

Each forward returns (output, cache); the matching backward consumes the
cache and the upstream gradient and returns input/parameter gradients.
"""

from __future__ import annotations

import numpy as np

from ..errors import ShapeError


def _patch_matrix(xp: np.ndarray, kh: int, kw: int, stride: int, oh: int, ow: int) -> np.ndarray:
    """(B, C, H, W) padded input -> (B, C, kh, kw, oh, ow) view stack."""
    cols = np.empty(xp.shape[:2] + (kh, kw, oh, ow), dtype=xp.dtype)
    for i in range(kh):
        for j in range(kw):
            cols[:, :, i, j] = xp[:, :, i : i + stride * oh : stride, j : j + stride * ow : stride]
    return cols


def conv2d(x: np.ndarray, w: np.ndarray, b: np.ndarray, stride: int = 1, pad: int = 1):
    """Cross-correlation of NCHW input with (K, C, kh, kw) filters.

    Output spatial size is (H + 2*pad - kh)//stride + 1; the caller picks
    pad=1 for 3x3 filters (size-preserving at stride 1) and pad=0 for 1x1
    projections.
    """
    if x.ndim != 4 or w.ndim != 4:
        raise ShapeError(f"conv2d wants 4-d input and weights, got {x.shape} and {w.shape}")
    B, C, H, W = x.shape
    K, Cw, kh, kw = w.shape
    if Cw != C:
        raise ShapeError(f"filter channels {Cw} do not match input channels {C}")
    if b.shape != (K,):
        raise ShapeError(f"bias shape {b.shape} does not match {K} filters")
    oh = (H + 2 * pad - kh) // stride + 1
    ow = (W + 2 * pad - kw) // stride + 1
    if oh < 1 or ow < 1:
        raise ShapeError(f"kernel {kh}x{kw} does not fit input {H}x{W} with pad {pad}")
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad))) if pad else x
    cols = _patch_matrix(xp, kh, kw, stride, oh, ow)
    out = np.tensordot(w, cols, axes=([1, 2, 3], [1, 2, 3]))  # (K, B, oh, ow)
    out = out.transpose(1, 0, 2, 3) + b[None, :, None, None]
    cache = (x.shape, cols, w, stride, pad)
    return out, cache


def conv2d_backward(dout: np.ndarray, cache):
    x_shape, cols, w, stride, pad = cache
    B, C, H, W = x_shape
    K, _, kh, kw = w.shape
    oh, ow = dout.shape[2], dout.shape[3]
    dw = np.tensordot(dout, cols, axes=([0, 2, 3], [0, 4, 5]))  # (K, C, kh, kw)
    db = dout.sum(axis=(0, 2, 3))
    dcols = np.tensordot(w, dout, axes=(0, 1))  # (C, kh, kw, B, oh, ow)
    dcols = dcols.transpose(3, 0, 1, 2, 4, 5)
    dxp = np.zeros((B, C, H + 2 * pad, W + 2 * pad))
    for i in range(kh):
        for j in range(kw):
            dxp[:, :, i : i + stride * oh : stride, j : j + stride * ow : stride] += dcols[:, :, i, j]
    dx = dxp[:, :, pad : pad + H, pad : pad + W] if pad else dxp
    return dx, dw, db


def relu(x: np.ndarray):
    out = np.maximum(x, 0.0)
    return out, (x > 0.0)


def relu_backward(dout: np.ndarray, mask: np.ndarray) -> np.ndarray:
    return dout * mask


def global_avg_pool(x: np.ndarray):
    """(B, C, H, W) -> (B, C) spatial mean."""
    if x.ndim != 4:
        raise ShapeError(f"pooling wants a 4-d input, got {x.shape}")
    return x.mean(axis=(2, 3)), x.shape


def global_avg_pool_backward(dout: np.ndarray, x_shape) -> np.ndarray:
    B, C, H, W = x_shape
    return np.broadcast_to(dout[:, :, None, None], x_shape) / (H * W)


def affine(x: np.ndarray, w: np.ndarray, b: np.ndarray):
    """(B, C) @ (m, C)^T + (m,) -> (B, m)."""
    if x.ndim != 2 or w.ndim != 2 or x.shape[1] != w.shape[1]:
        raise ShapeError(f"affine shapes do not agree: {x.shape} vs {w.shape}")
    return x @ w.T + b, (x, w)


def affine_backward(dout: np.ndarray, cache):
    x, w = cache
    return dout @ w, dout.T @ x, dout.sum(axis=0)


def softmax(logits: np.ndarray) -> np.ndarray:
    """Row-wise softmax, stabilized by the row max; never overflows."""
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)
