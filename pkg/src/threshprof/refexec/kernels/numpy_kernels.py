"""Pure-numpy kernels.

Vectorised over output elements only; every output element accumulates
in the same order as the numba kernels (c_in, kh, kw), one rounding per
multiply and per add, so both backends agree bit for bit.
"""

import numpy as np

F32 = np.float32


def conv2d(xpad, w, bias, stride, out_h, out_w):
    n = xpad.shape[0]
    c_out, c_in, kh_, kw_ = w.shape
    out = np.zeros((n, c_out, out_h, out_w), dtype=F32)
    span_h = stride * (out_h - 1) + 1
    span_w = stride * (out_w - 1) + 1
    mults = 0
    for ci in range(c_in):
        for kh in range(kh_):
            for kw in range(kw_):
                patch = xpad[:, ci, kh : kh + span_h : stride, kw : kw + span_w : stride]
                out += w[None, :, ci, kh, kw, None, None] * patch[:, None]
                mults += out.size
    if bias is not None:
        out += bias[None, :, None, None]
    return out, mults


def batchnorm(x, gamma, beta, mean, var, eps):
    denom = np.sqrt(var + F32(eps))
    y = (x - mean[None, :, None, None]) / denom[None, :, None, None]
    y = y * gamma[None, :, None, None]
    y = y + beta[None, :, None, None]
    return y, x.size


def relu(x):
    return np.where(x > F32(0), x, F32(0))


def avgpool(xpad, k, stride, out_h, out_w):
    n, c = xpad.shape[:2]
    acc = np.zeros((n, c, out_h, out_w), dtype=F32)
    span_h = stride * (out_h - 1) + 1
    span_w = stride * (out_w - 1) + 1
    for kh in range(k):
        for kw in range(k):
            acc += xpad[:, :, kh : kh + span_h : stride, kw : kw + span_w : stride]
    return acc / F32(k * k)


def maxpool(xpad, k, stride, out_h, out_w):
    n, c = xpad.shape[:2]
    acc = np.full((n, c, out_h, out_w), -np.inf, dtype=F32)
    span_h = stride * (out_h - 1) + 1
    span_w = stride * (out_w - 1) + 1
    for kh in range(k):
        for kw in range(k):
            v = xpad[:, :, kh : kh + span_h : stride, kw : kw + span_w : stride]
            acc = np.where(v > acc, v, acc)
    return acc


def global_avgpool(x):
    n, c, h, w = x.shape
    acc = np.zeros((n, c), dtype=F32)
    for i in range(h):
        for j in range(w):
            acc += x[:, :, i, j]
    return (acc / F32(h * w)).reshape(n, c, 1, 1)


def linear(x, weight, bias):
    n, f_in = x.shape
    acc = np.zeros((n, weight.shape[0]), dtype=F32)
    mults = 0
    for i in range(f_in):
        acc += x[:, i, None] * weight[None, :, i]
        mults += acc.size
    if bias is not None:
        acc += bias[None, :]
    return acc, mults
