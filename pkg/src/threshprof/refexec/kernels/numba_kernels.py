"""numba kernels.

Every output element accumulates in the same (c_in, kh, kw) order as the
numpy kernels. fastmath stays off so LLVM may neither reassociate the
accumulations nor contract multiply-add pairs into FMAs.
"""

import numpy as np
from numba import njit

F32 = np.float32
_jit = njit(cache=True, fastmath=False, nogil=True)


@_jit
def _conv2d(xpad, w, stride, out_h, out_w):
    n = xpad.shape[0]
    c_out, c_in, k_h, k_w = w.shape
    out = np.zeros((n, c_out, out_h, out_w), dtype=np.float32)
    mults = 0
    for b in range(n):
        for co in range(c_out):
            plane = out[b, co]
            # The innermost loop runs across output columns, so the adds it
            # performs are independent and vectorise without reordering any
            # single element's sum.
            for ci in range(c_in):
                for kh in range(k_h):
                    for kw in range(k_w):
                        wv = w[co, ci, kh, kw]
                        for oh in range(out_h):
                            row = xpad[b, ci, oh * stride + kh]
                            for ow in range(out_w):
                                plane[oh, ow] += wv * row[ow * stride + kw]
                            mults += out_w
    return out, mults


def conv2d(xpad, w, bias, stride, out_h, out_w):
    out, mults = _conv2d(xpad, w, stride, out_h, out_w)
    if bias is not None:
        out += bias[None, :, None, None]
    return out, int(mults)


@_jit
def _batchnorm(x, gamma, beta, mean, var, eps):
    n, c, h, w = x.shape
    y = np.empty_like(x)
    for ch in range(c):
        denom = np.sqrt(var[ch] + eps)
        for b in range(n):
            for i in range(h):
                for j in range(w):
                    t = (x[b, ch, i, j] - mean[ch]) / denom
                    t = t * gamma[ch]
                    y[b, ch, i, j] = t + beta[ch]
    return y


def batchnorm(x, gamma, beta, mean, var, eps):
    return _batchnorm(x, gamma, beta, mean, var, F32(eps)), x.size


@_jit
def _relu(x):
    y = np.empty_like(x)
    flat_x = x.ravel()
    flat_y = y.ravel()
    for i in range(flat_x.size):
        v = flat_x[i]
        flat_y[i] = v if v > 0 else np.float32(0.0)
    return y


def relu(x):
    return _relu(np.ascontiguousarray(x))


@_jit
def _pool(xpad, k, stride, out_h, out_w, is_max):
    n, c = xpad.shape[0], xpad.shape[1]
    out = np.empty((n, c, out_h, out_w), dtype=np.float32)
    div = np.float32(k * k)
    for b in range(n):
        for ch in range(c):
            for oh in range(out_h):
                for ow in range(out_w):
                    if is_max:
                        acc = np.float32(-np.inf)
                        for kh in range(k):
                            for kw in range(k):
                                v = xpad[b, ch, oh * stride + kh, ow * stride + kw]
                                if v > acc:
                                    acc = v
                        out[b, ch, oh, ow] = acc
                    else:
                        acc = np.float32(0.0)
                        for kh in range(k):
                            for kw in range(k):
                                acc += xpad[b, ch, oh * stride + kh, ow * stride + kw]
                        out[b, ch, oh, ow] = acc / div
    return out


def avgpool(xpad, k, stride, out_h, out_w):
    return _pool(xpad, k, stride, out_h, out_w, False)


def maxpool(xpad, k, stride, out_h, out_w):
    return _pool(xpad, k, stride, out_h, out_w, True)


@_jit
def _global_avgpool(x):
    n, c, h, w = x.shape
    out = np.empty((n, c, 1, 1), dtype=np.float32)
    div = np.float32(h * w)
    for b in range(n):
        for ch in range(c):
            acc = np.float32(0.0)
            for i in range(h):
                for j in range(w):
                    acc += x[b, ch, i, j]
            out[b, ch, 0, 0] = acc / div
    return out


def global_avgpool(x):
    return _global_avgpool(x)


@_jit
def _linear(x, weight):
    n, f_in = x.shape
    f_out = weight.shape[0]
    out = np.empty((n, f_out), dtype=np.float32)
    mults = 0
    for b in range(n):
        for o in range(f_out):
            acc = np.float32(0.0)
            for i in range(f_in):
                acc += x[b, i] * weight[o, i]
                mults += 1
            out[b, o] = acc
    return out, mults


def linear(x, weight, bias):
    out, mults = _linear(np.ascontiguousarray(x), weight)
    if bias is not None:
        out += bias[None, :]
    return out, int(mults)
