"""Differentiable ops used by the encoder-decoder network.

Convolutions go through an explicit im2col matrix so both the forward pass and
the kernel gradient are single GEMMs; the input gradient is a strided
scatter-add (col2im).
"""

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .tensor import Tensor, make_node


def _as_tensor(x, like=None):
    if isinstance(x, Tensor):
        return x
    dtype = like.dtype if like is not None else None
    return Tensor(np.asarray(x, dtype=dtype))


def _unbroadcast(g, shape):
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


def _pair(v):
    if isinstance(v, (tuple, list)):
        return int(v[0]), int(v[1])
    return int(v), int(v)


# elementwise -----------------------------------------------------------------

def add(a, b):
    a = _as_tensor(a, b if isinstance(b, Tensor) else None)
    b = _as_tensor(b, a)
    np.broadcast_shapes(a.shape, b.shape)
    sa, sb = a.shape, b.shape

    def backward(g):
        return _unbroadcast(g, sa), _unbroadcast(g, sb)

    return make_node(a.data + b.data, (a, b), backward, "add")


def sub(a, b):
    a = _as_tensor(a, b if isinstance(b, Tensor) else None)
    b = _as_tensor(b, a)
    np.broadcast_shapes(a.shape, b.shape)
    sa, sb = a.shape, b.shape

    def backward(g):
        return _unbroadcast(g, sa), _unbroadcast(-g, sb)

    return make_node(a.data - b.data, (a, b), backward, "sub")


def mul(a, b):
    """Elementwise product with numpy broadcasting (e.g. N,1,H,W against N,C,H,W)."""
    a = _as_tensor(a, b if isinstance(b, Tensor) else None)
    b = _as_tensor(b, a)
    np.broadcast_shapes(a.shape, b.shape)
    ad, bd = a.data, b.data

    def backward(g):
        ga = _unbroadcast(g * bd, ad.shape) if a.requires_grad else None
        gb = _unbroadcast(g * ad, bd.shape) if b.requires_grad else None
        return ga, gb

    return make_node(ad * bd, (a, b), backward, "mul")


elementwise_mul = mul


def square(x):
    xd = x.data

    def backward(g):
        return (2.0 * g * xd,)

    return make_node(xd * xd, (x,), backward, "square")


def sum(x):
    shape = x.shape

    def backward(g):
        return (np.broadcast_to(g, shape).copy(),)

    return make_node(np.asarray(x.data.sum(dtype=x.dtype)), (x,), backward, "sum")


def mean(x):
    shape, n = x.shape, x.size

    def backward(g):
        return (np.full(shape, g / n, dtype=x.dtype),)

    return make_node(np.asarray(x.data.mean(dtype=x.dtype)), (x,), backward, "mean")


def relu(x):
    pos = x.data > 0

    def backward(g):
        return (g * pos,)

    return make_node(np.where(pos, x.data, 0).astype(x.dtype, copy=False), (x,), backward, "relu")


def dropout(x, p, training, rng):
    """Inverted dropout: survivors are scaled by 1/(1-p); identity in eval mode."""
    if not 0.0 <= p < 1.0:
        raise ValueError(f"dropout rate must be in [0, 1), got {p}")
    if not training or p == 0.0:
        return x
    mask = (rng.random(x.shape) >= p).astype(x.dtype) / x.dtype.type(1.0 - p)

    def backward(g):
        return (g * mask,)

    return make_node(x.data * mask, (x,), backward, "dropout")


def concat_channels(*tensors):
    if len(tensors) == 1 and isinstance(tensors[0], (list, tuple)):
        tensors = tuple(tensors[0])
    ref = tensors[0].shape
    for t in tensors[1:]:
        if t.ndim != len(ref) or t.shape[:1] + t.shape[2:] != ref[:1] + ref[2:]:
            raise ValueError(f"concat shape mismatch: {ref} vs {t.shape}")
    bounds = np.cumsum([0] + [t.shape[1] for t in tensors])

    def backward(g):
        return tuple(g[:, bounds[i]:bounds[i + 1]] for i in range(len(tensors)))

    return make_node(np.concatenate([t.data for t in tensors], axis=1), tensors, backward, "concat")


# convolutions ------------------------------------------------------------------

def _im2col(xp, k, stride, ho, wo):
    """Rows are output pixels (n, y, x); columns are (c, ky, kx)."""
    n, c = xp.shape[:2]
    win = sliding_window_view(xp, (k, k), axis=(2, 3))[:, :, ::stride, ::stride][:, :, :ho, :wo]
    return win.transpose(0, 2, 3, 1, 4, 5).reshape(n * ho * wo, c * k * k)


def _col2im(cols, shape, k, stride, ho, wo):
    """Adjoint of :func:`_im2col`: scatter-add the columns back into an image."""
    n, c = shape[:2]
    cols = np.ascontiguousarray(cols.reshape(n, ho, wo, c, k, k).transpose(0, 3, 4, 5, 1, 2))
    out = np.zeros(shape, dtype=cols.dtype)
    for i in range(k):
        for j in range(k):
            out[:, :, i:i + stride * ho:stride, j:j + stride * wo:stride] += cols[:, :, i, j]
    return out


def _nchw(mat, n, h, w):
    return np.ascontiguousarray(mat.reshape(n, h, w, -1).transpose(0, 3, 1, 2))


def _nhwc_rows(a):
    n, c = a.shape[:2]
    return a.transpose(0, 2, 3, 1).reshape(-1, c)


def conv2d(x, kernel, bias=None, stride=1, padding=0):
    """Cross-correlation with zero padding; kernel is (F, C, k, k)."""
    n, c, h, w = x.shape
    f, ck, k, k2 = kernel.shape
    if ck != c:
        raise ValueError(f"input has {c} channels but kernel expects {ck}")
    if k != k2 or k < 1 or stride < 1 or padding < 0:
        raise ValueError("need a square kernel, stride >= 1 and padding >= 0")
    ho = (h + 2 * padding - k) // stride + 1
    wo = (w + 2 * padding - k) // stride + 1
    if ho <= 0 or wo <= 0:
        raise ValueError(f"non-positive output extent ({ho}, {wo})")
    xd = x.data
    pointwise = k == 1 and stride == 1 and padding == 0
    if pointwise:
        cols = _nhwc_rows(xd)
    else:
        xp = np.pad(xd, ((0, 0), (0, 0), (padding, padding), (padding, padding))) if padding else xd
        cols = _im2col(xp, k, stride, ho, wo)
    wmat = kernel.data.reshape(f, -1)
    out = cols @ wmat.T
    if bias is not None:
        out += bias.data
    out = _nchw(out, n, ho, wo)
    parents = (x, kernel) if bias is None else (x, kernel, bias)

    def backward(g):
        gmat = _nhwc_rows(g)
        gx = gk = gb = None
        if kernel.requires_grad:
            gk = (gmat.T @ cols).reshape(kernel.shape)
        if x.requires_grad:
            dcols = gmat @ wmat
            if pointwise:
                gx = _nchw(dcols, n, h, w)
            else:
                hp, wp = h + 2 * padding, w + 2 * padding
                gx = _col2im(dcols, (n, c, hp, wp), k, stride, ho, wo)
                if padding:
                    gx = gx[:, :, padding:padding + h, padding:padding + w]
        if bias is not None and bias.requires_grad:
            gb = g.sum(axis=(0, 2, 3))
        return (gx, gk) if bias is None else (gx, gk, gb)

    return make_node(out, parents, backward, "conv2d")


def conv_transpose2d(x, kernel, bias=None, stride=1, padding=0, output_padding=0):
    """Adjoint of :func:`conv2d` with respect to its input; kernel is (C, F, k, k)."""
    n, c, h, w = x.shape
    ck, f, k, k2 = kernel.shape
    if ck != c:
        raise ValueError(f"input has {c} channels but kernel expects {ck}")
    if k != k2 or k < 1 or stride < 1 or padding < 0:
        raise ValueError("need a square kernel, stride >= 1 and padding >= 0")
    oph, opw = _pair(output_padding)
    if not (0 <= oph < stride and 0 <= opw < stride):
        raise ValueError(f"output_padding {output_padding} must be in [0, stride={stride})")
    ho = (h - 1) * stride - 2 * padding + k + oph
    wo = (w - 1) * stride - 2 * padding + k + opw
    if ho <= 0 or wo <= 0:
        raise ValueError(f"non-positive output extent ({ho}, {wo})")
    hp, wp = ho + 2 * padding, wo + 2 * padding
    xmat = _nhwc_rows(x.data)
    wmat = kernel.data.reshape(c, f * k * k)
    out = _col2im(xmat @ wmat, (n, f, hp, wp), k, stride, h, w)
    if padding:
        out = np.ascontiguousarray(out[:, :, padding:padding + ho, padding:padding + wo])
    if bias is not None:
        out += bias.data[None, :, None, None]
    parents = (x, kernel) if bias is None else (x, kernel, bias)

    def backward(g):
        gp = np.pad(g, ((0, 0), (0, 0), (padding, padding), (padding, padding))) if padding else g
        gcols = _im2col(gp, k, stride, h, w)
        gx = _nchw(gcols @ wmat.T, n, h, w) if x.requires_grad else None
        gk = (xmat.T @ gcols).reshape(kernel.shape) if kernel.requires_grad else None
        if bias is None:
            return gx, gk
        gb = g.sum(axis=(0, 2, 3)) if bias.requires_grad else None
        return gx, gk, gb

    return make_node(out, parents, backward, "conv_transpose2d")


# normalization ---------------------------------------------------------------------

def batch_norm(x, scale, shift, running_mean, running_var, training, eps=1e-5, momentum=0.1):
    """Per-channel normalization over (N, H, W).

    In training mode the running statistics (plain arrays or tensors) are
    updated in place with weight ``momentum`` on the new batch statistic; the
    running variance uses the unbiased batch estimate.
    """
    c = x.shape[1]
    for t in (scale, shift, running_mean, running_var):
        if t.shape != (c,):
            raise ValueError(f"batch-norm parameter of shape {t.shape} does not match {c} channels")
    axes = (0, 2, 3)
    xd = x.data
    rm = running_mean.data if isinstance(running_mean, Tensor) else running_mean
    rv = running_var.data if isinstance(running_var, Tensor) else running_var
    if training:
        mu = xd.mean(axis=axes)
        var = xd.var(axis=axes)
        if eps == 0 and np.any(var == 0):
            raise FloatingPointError("batch variance is exactly zero and eps = 0")
        m = xd.size // c
        unbiased = var * (m / (m - 1)) if m > 1 else var
        rm *= 1.0 - momentum
        rm += momentum * mu
        rv *= 1.0 - momentum
        rv += momentum * unbiased
    else:
        mu, var = rm, rv
    inv = (1.0 / np.sqrt(var + eps)).astype(x.dtype)
    xhat = (xd - mu.astype(x.dtype)[None, :, None, None]) * inv[None, :, None, None]
    gamma = scale.data[None, :, None, None]
    out = gamma * xhat + shift.data[None, :, None, None]

    def backward(g):
        gs = (g * xhat).sum(axis=axes) if scale.requires_grad else None
        gh = g.sum(axis=axes) if shift.requires_grad else None
        gx = None
        if x.requires_grad:
            dxhat = g * gamma
            if training:
                gx = inv[None, :, None, None] * (
                    dxhat
                    - dxhat.mean(axis=axes, keepdims=True)
                    - xhat * (dxhat * xhat).mean(axis=axes, keepdims=True)
                )
            else:
                gx = dxhat * inv[None, :, None, None]
        return gx, gs, gh

    return make_node(out, (x, scale, shift), backward, "batch_norm")
