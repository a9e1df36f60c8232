"""Tensor primitives with hand-written backward passes.

Public tensors are float64 arrays laid out ``(batch, channel, angular,
spatial)``.  Weights are ``(out_ch, in_ch, k_a, k_w)`` for both convolution
and transposed convolution.  The network itself runs on the channels-last
kernels (``*_nhwc``), which keep the channel axis contiguous for the im2col
copies and the scatter-adds.  Each ``*_forward`` returns ``(out, cache)``
and the matching ``*_backward`` consumes the cache.
"""

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..errors import ShapeError


def _pair(v):
    return (int(v), int(v)) if np.isscalar(v) else tuple(int(s) for s in v)


def _check_odd(k):
    if k[0] % 2 == 0 or k[1] % 2 == 0:
        raise ShapeError(f"kernel sizes must be odd, got {tuple(k)}")


def _im2col(xp, kernel, stride):
    """(N, Hp, Wp, C) -> (N*Ho*Wo, kh*kw*C) patch matrix."""
    kh, kw = kernel
    sh, sw = stride
    win = sliding_window_view(xp, (kh, kw), axis=(1, 2))[:, ::sh, ::sw]
    n, ho, wo = win.shape[:3]
    cols = win.transpose(0, 1, 2, 4, 5, 3).reshape(n * ho * wo, kh * kw * xp.shape[3])
    return cols, (n, ho, wo)


def _col2im(dcols, shape, kernel, stride):
    """Scatter-add (N, Ho, Wo, kh, kw, C) patches into an (N, Hp, Wp, C) array."""
    n, ho, wo, kh, kw, c = dcols.shape
    sh, sw = stride
    out = np.zeros(shape)
    for a in range(kh):
        for b in range(kw):
            out[:, a:a + sh * (ho - 1) + 1:sh, b:b + sw * (wo - 1) + 1:sw] += dcols[:, :, :, a, b]
    return out


def _wmat(w):
    """(O, C, kh, kw) -> (kh*kw*C, O)."""
    return w.transpose(2, 3, 1, 0).reshape(-1, w.shape[0])


def conv_nhwc_forward(x, w, b=None, stride=(1, 1), padding=None):
    n, h, wd, c = x.shape
    o, c2, kh, kw = w.shape
    if c != c2:
        raise ShapeError(f"conv2d: input has {c} channels, weights expect {c2}")
    _check_odd((kh, kw))
    stride = _pair(stride)
    ph, pw = ((kh - 1) // 2, (kw - 1) // 2) if padding is None else _pair(padding)
    xp = np.pad(x, ((0, 0), (ph, ph), (pw, pw), (0, 0))) if (ph or pw) else x
    if kh == kw == 1 and stride == (1, 1):
        cols, (n, ho, wo) = xp.reshape(-1, c), (n, h, wd)
    else:
        cols, (n, ho, wo) = _im2col(xp, (kh, kw), stride)
    out = cols @ _wmat(w)
    if b is not None:
        out += b
    return out.reshape(n, ho, wo, o), (xp.shape, (ph, pw), stride, cols, w, (n, ho, wo))


def conv_nhwc_backward(dout, cache, need_dx=True):
    xp_shape, (ph, pw), stride, cols, w, (n, ho, wo) = cache
    o, c, kh, kw = w.shape
    d2 = dout.reshape(n * ho * wo, o)
    dw = (cols.T @ d2).reshape(kh, kw, c, o).transpose(3, 2, 0, 1)
    db = d2.sum(axis=0)
    dx = None
    if need_dx:
        dcols = d2 @ _wmat(w).T
        if kh == kw == 1 and stride == (1, 1):
            dxp = dcols.reshape(xp_shape)
        else:
            dxp = _col2im(dcols.reshape(n, ho, wo, kh, kw, c), xp_shape, (kh, kw), stride)
        dx = dxp[:, ph:xp_shape[1] - ph, pw:xp_shape[2] - pw]
    return dx, np.ascontiguousarray(dw), db


def deconv_output_size(n, s):
    """Transposed-convolution length after the symmetric ``(k-1)/2`` crop."""
    return s * (n - 1) + 1


def deconv_nhwc_forward(x, w, b=None, stride=(1, 1)):
    n, h, wd, c = x.shape
    o, c2, ka, kw = w.shape
    if c != c2:
        raise ShapeError(f"deconv2d: input has {c} channels, weights expect {c2}")
    _check_odd((ka, kw))
    sa, sw = _pair(stride)
    x2 = x.reshape(n * h * wd, c)
    # rows of the weight matrix: input channel; columns: (a, b, out channel)
    cols = (x2 @ w.transpose(1, 2, 3, 0).reshape(c, ka * kw * o)).reshape(n, h, wd, ka, kw, o)
    full = _col2im(cols, (n, sa * (h - 1) + ka, sw * (wd - 1) + kw, o), (ka, kw), (sa, sw))
    pa, pw = (ka - 1) // 2, (kw - 1) // 2
    out = full[:, pa:pa + sa * (h - 1) + 1, pw:pw + sw * (wd - 1) + 1]
    if b is not None:
        out = out + b
    return np.ascontiguousarray(out), (x2, w, (sa, sw), (n, h, wd))


def deconv_nhwc_backward(dout, cache, need_dx=True):
    x2, w, (sa, sw), (n, h, wd) = cache
    o, c, ka, kw = w.shape
    pa, pw = (ka - 1) // 2, (kw - 1) // 2
    dfull = np.pad(dout, ((0, 0), (pa, pa), (pw, pw), (0, 0)))
    cols, _ = _im2col(dfull, (ka, kw), (sa, sw))  # (N*h*wd, ka*kw*o)
    dw = (x2.T @ cols).reshape(c, ka, kw, o).transpose(3, 0, 1, 2)
    db = dout.sum(axis=(0, 1, 2))
    dx = None
    if need_dx:
        dx = (cols @ w.transpose(2, 3, 0, 1).reshape(ka * kw * o, c)).reshape(n, h, wd, c)
    return dx, np.ascontiguousarray(dw), db


def prelu_nhwc_forward(x, slope):
    slope = np.asarray(slope, dtype=np.float64)
    if slope.shape != (x.shape[-1],):
        raise ShapeError(f"prelu: need {x.shape[-1]} slopes, got shape {slope.shape}")
    neg = x < 0
    factor = np.where(neg, slope, 1.0)
    return x * factor, (x, neg, factor)


def prelu_nhwc_backward(dout, cache):
    x, neg, factor = cache
    dslope = (dout * x * neg).reshape(-1, x.shape[-1]).sum(axis=0)
    return dout * factor, dslope


def pad_right_edge(x, n, axis=2):
    """Replicate the last sample along ``axis`` ``n`` more times."""
    if n == 0:
        return x
    last = np.take(x, [-1], axis=axis)
    return np.concatenate([x, np.repeat(last, n, axis=axis)], axis=axis)


def pad_right_edge_backward(dout, n, axis=2):
    if n == 0:
        return dout
    w = dout.shape[axis] - n
    dx = np.take(dout, np.arange(w), axis=axis)
    tail = np.take(dout, np.arange(w, w + n), axis=axis).sum(axis=axis)
    idx = [slice(None)] * dout.ndim
    idx[axis] = w - 1
    dx[tuple(idx)] += tail
    return dx


# --- public (batch, channel, angular, spatial) interface ------------------

def _to_nhwc(x):
    return np.ascontiguousarray(np.asarray(x, dtype=np.float64).transpose(0, 2, 3, 1))


def _to_nchw(x):
    return np.ascontiguousarray(x.transpose(0, 3, 1, 2))


def conv2d_forward(x, w, b=None, stride=1, padding=None):
    """Cross-correlation with zero padding (``(k-1)/2`` per axis by default)."""
    out, cache = conv_nhwc_forward(_to_nhwc(x), np.asarray(w, dtype=np.float64), b, stride, padding)
    return _to_nchw(out), cache


def conv2d_backward(dout, cache, need_dx=True):
    dx, dw, db = conv_nhwc_backward(_to_nhwc(dout), cache, need_dx)
    return (None if dx is None else _to_nchw(dx)), dw, db


def conv2d(x, w, b=None, stride=1, padding=None):
    return conv2d_forward(x, w, b, stride, padding)[0]


def deconv2d_forward(x, w, b=None, stride=1):
    """Transposed convolution: full output ``s(n-1)+k``, cropped by ``(k-1)/2`` each side.

    The result has ``s(n-1)+1`` samples per axis; with stride 1 this is a
    "same" convolution.  It is the adjoint of :func:`conv2d` with the same
    stride and the weights' channel axes swapped.
    """
    out, cache = deconv_nhwc_forward(_to_nhwc(x), np.asarray(w, dtype=np.float64), b, stride)
    return _to_nchw(out), cache


def deconv2d_backward(dout, cache, need_dx=True):
    dx, dw, db = deconv_nhwc_backward(_to_nhwc(dout), cache, need_dx)
    return (None if dx is None else _to_nchw(dx)), dw, db


def deconv2d(x, w, b=None, stride=1):
    return deconv2d_forward(x, w, b, stride)[0]


def prelu_forward(x, slope):
    out, cache = prelu_nhwc_forward(_to_nhwc(x), slope)
    return _to_nchw(out), cache


def prelu_backward(dout, cache):
    dx, dslope = prelu_nhwc_backward(_to_nhwc(dout), cache)
    return _to_nchw(dx), dslope


def prelu(x, slope):
    return prelu_forward(x, slope)[0]
