"""Convolution and dense kernels.

Three families live here:
  * conv2d_ref — direct sliding-window convolution, the correctness oracle
    every optimized path must match.
  * f32/f64 im2col + BLAS matmul paths used by forward/backward.
  * int8 kernels (numba-jitted) that accumulate in int32 and requantize with
    a double-precision multiplier; bias and the activation zero-point offset
    are folded into a per-channel int32 term before the GEMM.
"""

from __future__ import annotations

import numpy as np
from numba import njit

from medrt.errors import DimensionError, GeometryError
from medrt.nn.tensor import Tensor


def out_size(size: int, k: int, stride: int, pad: int) -> int:
    span = size + 2 * pad - k
    if span < 0:
        raise GeometryError(f"kernel {k} larger than padded input {size + 2 * pad}")
    if span % stride != 0:
        raise GeometryError(
            f"geometry ({size} + 2*{pad} - {k}) not divisible by stride {stride}")
    return span // stride + 1


def conv2d_ref(inp: Tensor, kernel: Tensor, bias, stride: int = 1, pad: int = 0) -> Tensor:
    """Naive direct convolution (cross-correlation), NCHW.

    This is the oracle: quadruple loop over output positions, explicit
    window sum. Slow on purpose; only tests and tiny cases should call it.
    """
    x, w = inp.data, kernel.data
    if x.ndim != 4 or w.ndim != 4:
        raise DimensionError(f"expected 4-d input/kernel, got {x.shape} and {w.shape}")
    n, cin, h, ww = x.shape
    cout, kcin, kh, kw = w.shape
    if kcin != cin:
        raise DimensionError(f"kernel expects {kcin} input channels, input has {cin}")
    b = np.zeros(cout, dtype=x.dtype) if bias is None else np.asarray(bias, dtype=x.dtype)
    if b.shape != (cout,):
        raise DimensionError(f"bias shape {b.shape} != ({cout},)")
    ho = out_size(h, kh, stride, pad)
    wo = out_size(ww, kw, stride, pad)
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    out = np.empty((n, cout, ho, wo), dtype=x.dtype)
    for bi in range(n):
        for co in range(cout):
            for y in range(ho):
                for xo in range(wo):
                    window = xp[bi, :, y * stride:y * stride + kh, xo * stride:xo * stride + kw]
                    out[bi, co, y, xo] = np.sum(window * w[co]) + b[co]
    return Tensor(out)


# ---------------------------------------------------------------------------
# f32/f64 optimized path: im2col + BLAS
# ---------------------------------------------------------------------------

def im2col(x: np.ndarray, kh: int, kw: int, stride: int, pad: int):
    """(N, C, H, W) -> (N, C*kh*kw, Ho*Wo) column matrix."""
    n, c, h, w = x.shape
    ho = out_size(h, kh, stride, pad)
    wo = out_size(w, kw, stride, pad)
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad))) if pad else x
    cols = np.empty((n, c, kh, kw, ho, wo), dtype=x.dtype)
    for i in range(kh):
        for j in range(kw):
            cols[:, :, i, j] = xp[:, :, i:i + stride * ho:stride, j:j + stride * wo:stride]
    return cols.reshape(n, c * kh * kw, ho * wo), ho, wo


def col2im(cols: np.ndarray, x_shape, kh: int, kw: int, stride: int, pad: int) -> np.ndarray:
    """Scatter-add inverse of im2col; used by conv backward."""
    n, c, h, w = x_shape
    ho = out_size(h, kh, stride, pad)
    wo = out_size(w, kw, stride, pad)
    xp = np.zeros((n, c, h + 2 * pad, w + 2 * pad), dtype=cols.dtype)
    cols6 = cols.reshape(n, c, kh, kw, ho, wo)
    for i in range(kh):
        for j in range(kw):
            xp[:, :, i:i + stride * ho:stride, j:j + stride * wo:stride] += cols6[:, :, i, j]
    if pad:
        return xp[:, :, pad:-pad, pad:-pad]
    return xp


def conv2d(x: np.ndarray, w: np.ndarray, b: np.ndarray, stride: int, pad: int) -> np.ndarray:
    n, cin, h, _ = x.shape
    cout, kcin, kh, kw = w.shape
    if kcin != cin:
        raise DimensionError(f"kernel expects {kcin} input channels, input has {cin}")
    cols, ho, wo = im2col(x, kh, kw, stride, pad)
    out = np.matmul(w.reshape(cout, -1), cols)
    if b is not None:
        out += b[:, None]
    return out.reshape(n, cout, ho, wo)


def conv2d_backward(x: np.ndarray, w: np.ndarray, stride: int, pad: int, dout: np.ndarray):
    """Returns (dx, dw, db) for y = conv2d(x, w, b)."""
    n, cin, h, ww = x.shape
    cout, _, kh, kw = w.shape
    dout2 = dout.reshape(n, cout, -1)
    cols, _, _ = im2col(x, kh, kw, stride, pad)
    # dW[co, k] = sum_n dout[n, co, :] . cols[n, k, :]
    dw = np.einsum("nop,nkp->ok", dout2, cols, optimize=True).reshape(w.shape)
    db = dout2.sum(axis=(0, 2))
    dcols = np.matmul(w.reshape(cout, -1).T, dout2)
    dx = col2im(dcols, x.shape, kh, kw, stride, pad)
    return dx, dw, db


# ---------------------------------------------------------------------------
# int8 kernels: int32 accumulation, double-precision requantization
# ---------------------------------------------------------------------------
#
# Quantized conv computes, per output channel co:
#   acc = sum_k q_x[k] * q_w[co, k] + offset[co]
#   q_y = clamp(rint(mult[co] * acc) + z_y, -128, 127)
# where offset folds the activation zero-point term (-z_x * sum(q_w)) and the
# real bias (rint(b / (s_x * s_w[co]))), and mult[co] = s_x * s_w[co] / s_y.
# Padding pixels are written as z_x so they represent real zeros.

@njit(cache=True)
def _im2col_i8(qxp: np.ndarray, kh: int, kw: int, stride: int, cols: np.ndarray):
    cin, hp, wp = qxp.shape
    ho = (hp - kh) // stride + 1
    wo = (wp - kw) // stride + 1
    idx = 0
    for ci in range(cin):
        for ky in range(kh):
            for kx in range(kw):
                for y in range(ho):
                    row = qxp[ci, y * stride + ky]
                    dst = cols[idx, y * wo:(y + 1) * wo]
                    for x in range(wo):
                        dst[x] = row[x * stride + kx]
                idx += 1
    return cols


@njit(cache=True)
def _qgemm(cols: np.ndarray, qw: np.ndarray, offset: np.ndarray,
           mult: np.ndarray, zy: int, out: np.ndarray):
    """out[co, p] = requant(sum_k qw[co, k] * cols[k, p] + offset[co])."""
    kdim, ndim = cols.shape
    cout = qw.shape[0]
    acc = np.empty(ndim, dtype=np.int32)
    for co in range(cout):
        acc[:] = offset[co]
        for k in range(kdim):
            wv = np.int32(qw[co, k])
            row = cols[k]
            for p in range(ndim):
                acc[p] += wv * np.int32(row[p])
        m = mult[co]
        for p in range(ndim):
            v = np.int64(np.rint(m * acc[p])) + zy
            if v < -128:
                v = -128
            elif v > 127:
                v = 127
            out[co, p] = np.int8(v)
    return out


@njit(cache=True)
def _relu_i8(q: np.ndarray, zp: np.int8, out: np.ndarray):
    flat = q.ravel()
    dst = out.ravel()
    for i in range(flat.size):
        v = flat[i]
        dst[i] = v if v > zp else zp
    return out


@njit(cache=True)
def _maxpool2_i8(q: np.ndarray, out: np.ndarray):
    n, c, h, w = q.shape
    for b in range(n):
        for ci in range(c):
            for y in range(0, h - 1, 2):
                for x in range(0, w - 1, 2):
                    m = q[b, ci, y, x]
                    if q[b, ci, y, x + 1] > m:
                        m = q[b, ci, y, x + 1]
                    if q[b, ci, y + 1, x] > m:
                        m = q[b, ci, y + 1, x]
                    if q[b, ci, y + 1, x + 1] > m:
                        m = q[b, ci, y + 1, x + 1]
                    out[b, ci, y // 2, x // 2] = m
    return out


def qconv2d(qx: np.ndarray, zx: int, qw: np.ndarray, offset: np.ndarray,
            mult: np.ndarray, zy: int, stride: int, pad: int) -> np.ndarray:
    """int8 conv: returns int8 activations under the output scheme."""
    n, cin, h, w = qx.shape
    cout, _, kh, kw = qw.shape
    ho = out_size(h, kh, stride, pad)
    wo = out_size(w, kw, stride, pad)
    out = np.empty((n, cout, ho, wo), dtype=np.int8)
    qw2 = np.ascontiguousarray(qw.reshape(cout, -1))
    for b in range(n):
        if pad:
            qxp = np.full((cin, h + 2 * pad, w + 2 * pad), zx, dtype=np.int8)
            qxp[:, pad:-pad, pad:-pad] = qx[b]
        else:
            qxp = np.ascontiguousarray(qx[b])
        cols = np.empty((cin * kh * kw, ho * wo), dtype=np.int8)
        _im2col_i8(qxp, kh, kw, stride, cols)
        _qgemm(cols, qw2, offset, mult, zy, out[b].reshape(cout, -1))
    return out


def qdense(qx: np.ndarray, qw: np.ndarray, offset: np.ndarray,
           mult: np.ndarray, zy: int) -> np.ndarray:
    """int8 dense: qx (N, In) int8, qw (Out, In) int8 -> (N, Out) int8."""
    n = qx.shape[0]
    out = np.empty((qw.shape[0], n), dtype=np.int8)
    _qgemm(np.ascontiguousarray(qx.T), qw, offset, mult, zy, out)
    return np.ascontiguousarray(out.T)


def qrelu(qx: np.ndarray, zp: int) -> np.ndarray:
    out = np.empty_like(qx)
    return _relu_i8(qx, np.int8(zp), out)


def qmaxpool2(qx: np.ndarray) -> np.ndarray:
    n, c, h, w = qx.shape
    out = np.empty((n, c, h // 2, w // 2), dtype=np.int8)
    return _maxpool2_i8(qx, out)


def warm_kernels():
    """Trigger JIT compilation of the int8 kernels on tiny inputs."""
    qx = np.zeros((1, 1, 4, 4), dtype=np.int8)
    qw = np.zeros((2, 1, 3, 3), dtype=np.int8)
    qconv2d(qx, 0, qw, np.zeros(2, np.int32), np.full(2, 0.5), 0, 1, 1)
    qdense(np.zeros((1, 4), np.int8), np.zeros((2, 4), np.int8),
           np.zeros(2, np.int32), np.full(2, 0.5), 0)
    qrelu(qx, 0)
    qmaxpool2(qx)
