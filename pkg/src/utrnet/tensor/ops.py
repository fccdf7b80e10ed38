"""Differentiable primitives.

Shapes are explicit: elementwise binary ops require identical shapes, and the
only broadcasting forms are bias addition and per-channel scaling.  Images are
``(N, C, H, W)``; sequences are time-major ``(T, N, D)``.
"""

from __future__ import annotations

from typing import Optional, Sequence, Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..exceptions import ContractError, DimensionError
from .core import Tensor, make_result


def _same_shape(a: Tensor, b: Tensor, op: str) -> None:
    if a.shape != b.shape:
        raise DimensionError(f"{op}: shape mismatch {a.shape} vs {b.shape}")


# ---------------------------------------------------------------------------
# elementwise
# ---------------------------------------------------------------------------

def add(a: Tensor, b: Tensor) -> Tensor:
    _same_shape(a, b, "add")
    return make_result(a.data + b.data, (a, b), lambda g: (g, g), "add")


def sub(a: Tensor, b: Tensor) -> Tensor:
    _same_shape(a, b, "sub")
    return make_result(a.data - b.data, (a, b), lambda g: (g, -g), "sub")


def mul(a: Tensor, b: Tensor) -> Tensor:
    _same_shape(a, b, "mul")
    x, y = a.data, b.data
    return make_result(x * y, (a, b), lambda g: (g * y, g * x), "mul")


def scale(a: Tensor, factor: float) -> Tensor:
    return make_result(a.data * factor, (a,), lambda g: (g * factor,), "scale")


def relu(x: Tensor) -> Tensor:
    mask = x.data > 0
    return make_result(x.data * mask, (x,), lambda g: (g * mask,), "relu")


def sigmoid(x: Tensor) -> Tensor:
    y = _sigmoid(x.data)
    return make_result(y, (x,), lambda g: (g * y * (1 - y),), "sigmoid")


def tanh(x: Tensor) -> Tensor:
    y = np.tanh(x.data)
    return make_result(y, (x,), lambda g: (g * (1 - y * y),), "tanh")


def _sigmoid(z: np.ndarray) -> np.ndarray:
    # split by sign so exp never overflows
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def apply_mask(x: Tensor, mask: np.ndarray) -> Tensor:
    """Multiply by a constant mask (dropout); the mask is not differentiated."""
    mask = np.asarray(mask, dtype=x.dtype)
    if mask.shape != x.shape:
        mask = np.broadcast_to(mask, x.shape)
    return make_result(x.data * mask, (x,), lambda g: (g * mask,), "apply_mask")


def add_bias(x: Tensor, bias: Tensor, axis: int = 1) -> Tensor:
    """Add a 1-D ``bias`` along ``axis`` (channel axis for images)."""
    axis = axis % x.ndim
    if bias.ndim != 1 or bias.shape[0] != x.shape[axis]:
        raise DimensionError(f"add_bias: bias {bias.shape} vs axis {axis} of {x.shape}")
    shape = [1] * x.ndim
    shape[axis] = -1
    reduce_axes = tuple(i for i in range(x.ndim) if i != axis)
    return make_result(
        x.data + bias.data.reshape(shape),
        (x, bias),
        lambda g: (g, g.sum(axis=reduce_axes)),
        "add_bias",
    )


# ---------------------------------------------------------------------------
# reductions and shape
# ---------------------------------------------------------------------------

def sum(x: Tensor) -> Tensor:  # noqa: A001 - mirrors numpy naming
    shape = x.shape
    return make_result(
        np.asarray(x.data.sum(), dtype=x.dtype), (x,), lambda g: (np.full(shape, g, dtype=x.dtype),), "sum"
    )


def mean(x: Tensor) -> Tensor:
    shape, n = x.shape, x.size
    return make_result(
        np.asarray(x.data.mean(), dtype=x.dtype),
        (x,),
        lambda g: (np.full(shape, g / n, dtype=x.dtype),),
        "mean",
    )


def reshape(x: Tensor, shape: Sequence[int]) -> Tensor:
    old = x.shape
    return make_result(x.data.reshape(shape), (x,), lambda g: (g.reshape(old),), "reshape")


def transpose(x: Tensor, axes: Sequence[int]) -> Tensor:
    axes = tuple(axes)
    inverse = tuple(np.argsort(axes))
    return make_result(
        np.ascontiguousarray(x.data.transpose(axes)), (x,), lambda g: (g.transpose(inverse),), "transpose"
    )


def index(x: Tensor, key) -> Tensor:
    shape = x.shape

    def backward(g):
        gx = np.zeros(shape, dtype=g.dtype)
        np.add.at(gx, key, g)
        return (gx,)

    return make_result(np.array(x.data[key]), (x,), backward, "index")


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    tensors = list(tensors)
    if not tensors:
        raise ContractError("concat of an empty list")
    ndim = tensors[0].ndim
    axis = axis % ndim
    for t in tensors[1:]:
        if t.ndim != ndim or any(
            t.shape[i] != tensors[0].shape[i] for i in range(ndim) if i != axis
        ):
            raise DimensionError(
                f"concat: shapes {[t.shape for t in tensors]} disagree off axis {axis}"
            )
    bounds = np.cumsum([0] + [t.shape[axis] for t in tensors])

    def backward(g):
        return tuple(
            np.take(g, np.arange(bounds[i], bounds[i + 1]), axis=axis) for i in range(len(tensors))
        )

    return make_result(np.concatenate([t.data for t in tensors], axis=axis), tensors, backward, "concat")


def concat_channels(a: Tensor, b: Tensor) -> Tensor:
    """Stack two ``(N, C, H, W)`` maps along the channel axis."""
    if a.ndim != 4 or b.ndim != 4:
        raise DimensionError("concat_channels expects 4-D tensors")
    if (a.shape[0], a.shape[2], a.shape[3]) != (b.shape[0], b.shape[2], b.shape[3]):
        raise DimensionError(f"concat_channels: spatial mismatch {a.shape} vs {b.shape}")
    return concat([a, b], axis=1)


# ---------------------------------------------------------------------------
# linear algebra
# ---------------------------------------------------------------------------

def matmul(a: Tensor, b: Tensor) -> Tensor:
    """2-D matrix product."""
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise DimensionError(f"matmul: incompatible shapes {a.shape} @ {b.shape}")
    x, y = a.data, b.data
    return make_result(x @ y, (a, b), lambda g: (g @ y.T, x.T @ g), "matmul")


def linear(x: Tensor, weight: Tensor, bias: Optional[Tensor] = None) -> Tensor:
    """``x @ weight + bias`` over the last axis of ``x``."""
    if weight.ndim != 2 or x.shape[-1] != weight.shape[0]:
        raise DimensionError(f"linear: input {x.shape} vs weight {weight.shape}")
    lead = x.shape[:-1]
    x2 = x.data.reshape(-1, x.shape[-1])
    w = weight.data
    out = x2 @ w
    if bias is not None:
        if bias.shape != (w.shape[1],):
            raise DimensionError(f"linear: bias {bias.shape} vs weight {w.shape}")
        out = out + bias.data
    parents = (x, weight) if bias is None else (x, weight, bias)

    def backward(g):
        g2 = g.reshape(-1, w.shape[1])
        grads = [(g2 @ w.T).reshape(x.shape), x2.T @ g2]
        if bias is not None:
            grads.append(g2.sum(axis=0))
        return grads

    return make_result(out.reshape(lead + (w.shape[1],)), parents, backward, "linear")


# ---------------------------------------------------------------------------
# convolutional primitives
# ---------------------------------------------------------------------------

def conv2d(
    x: Tensor, kernel: Tensor, bias: Optional[Tensor] = None, stride: int = 1, padding: int = 0
) -> Tensor:
    """Cross-correlation of ``(N, C, H, W)`` input with ``(F, C, kh, kw)`` kernels."""
    if x.ndim != 4 or kernel.ndim != 4:
        raise DimensionError("conv2d expects 4-D input and kernel")
    if stride < 1 or padding < 0:
        raise ContractError("conv2d needs stride >= 1 and padding >= 0")
    n, c, h, w = x.shape
    f, ck, kh, kw = kernel.shape
    if c != ck:
        raise DimensionError(f"conv2d: input has {c} channels, kernel expects {ck}")
    hp, wp = h + 2 * padding, w + 2 * padding
    if kh > hp or kw > wp:
        raise DimensionError(f"conv2d: kernel {kh}x{kw} larger than padded input {hp}x{wp}")
    ho, wo = (hp - kh) // stride + 1, (wp - kw) // stride + 1

    xp = x.data
    if padding:
        xp = np.pad(xp, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    win = sliding_window_view(xp, (kh, kw), axis=(2, 3))[:, :, ::stride, ::stride][:, :, :ho, :wo]
    # rows (c, i, j), columns (n, y, x): the gather copies contiguous runs along x
    cols = np.ascontiguousarray(win.transpose(1, 4, 5, 0, 2, 3)).reshape(c * kh * kw, n * ho * wo)
    wmat = kernel.data.reshape(f, -1)
    out = (wmat @ cols).reshape(f, n, ho, wo).transpose(1, 0, 2, 3)
    if bias is not None:
        if bias.shape != (f,):
            raise DimensionError(f"conv2d: bias {bias.shape} vs {f} filters")
        out = out + bias.data.reshape(1, f, 1, 1)
    parents = (x, kernel) if bias is None else (x, kernel, bias)

    def backward(g):
        g2 = np.ascontiguousarray(g.transpose(1, 0, 2, 3)).reshape(f, -1)
        grads = [None, (g2 @ cols.T).reshape(kernel.shape)]
        if x.requires_grad:
            gcols = (wmat.T @ g2).reshape(c, kh, kw, n, ho, wo)
            gxp = np.zeros((c, n, hp, wp), dtype=g.dtype)
            for i in range(kh):
                for j in range(kw):
                    gxp[:, :, i : i + stride * ho : stride, j : j + stride * wo : stride] += gcols[:, i, j]
            grads[0] = gxp[:, :, padding : padding + h, padding : padding + w].transpose(1, 0, 2, 3)
        if bias is not None:
            grads.append(g.sum(axis=(0, 2, 3)))
        return grads

    return make_result(np.ascontiguousarray(out), parents, backward, "conv2d")


def max_pool2d(x: Tensor, kernel: Tuple[int, int] = (2, 2)) -> Tensor:
    """Non-overlapping max pooling; extents must divide exactly."""
    kh, kw = kernel
    n, c, h, w = x.shape
    if h % kh or w % kw:
        raise DimensionError(f"max_pool2d: extents {h}x{w} not divisible by {kh}x{kw}")
    blocks = x.data.reshape(n, c, h // kh, kh, w // kw, kw).transpose(0, 1, 2, 4, 3, 5)
    flat = blocks.reshape(n, c, h // kh, w // kw, kh * kw)
    arg = flat.argmax(axis=-1)
    out = np.take_along_axis(flat, arg[..., None], axis=-1)[..., 0]

    def backward(g):
        gflat = np.zeros(flat.shape, dtype=g.dtype)
        np.put_along_axis(gflat, arg[..., None], g[..., None], axis=-1)
        gx = gflat.reshape(n, c, h // kh, w // kw, kh, kw).transpose(0, 1, 2, 4, 3, 5)
        return (gx.reshape(n, c, h, w),)

    return make_result(out, (x,), backward, "max_pool2d")


def _interp_matrix(size: int, factor: int, dtype) -> np.ndarray:
    """Rows map output positions to input positions (half-pixel centres)."""
    out = size * factor
    src = (np.arange(out) + 0.5) / factor - 0.5
    src = np.clip(src, 0.0, size - 1)
    lo = np.floor(src).astype(int)
    hi = np.minimum(lo + 1, size - 1)
    frac = src - lo
    m = np.zeros((out, size), dtype=dtype)
    rows = np.arange(out)
    np.add.at(m, (rows, lo), 1.0 - frac)
    np.add.at(m, (rows, hi), frac)
    return m


def upsample_bilinear(x: Tensor, factor: int) -> Tensor:
    """Bilinear upsampling by an integer factor.

    Uses the half-pixel-centre convention (``align_corners=False``): output
    pixel ``o`` samples input coordinate ``(o + 0.5) / factor - 0.5``, clamped
    to the valid range.
    """
    if int(factor) != factor or factor < 1:
        raise ContractError(f"upsample factor must be a positive integer, got {factor}")
    factor = int(factor)
    if factor == 1:
        return make_result(x.data.copy(), (x,), lambda g: (g,), "upsample_bilinear")
    _, _, h, w = x.shape
    mh = _interp_matrix(h, factor, x.dtype)
    mw = _interp_matrix(w, factor, x.dtype)
    out = np.matmul(np.matmul(mh, x.data), mw.T)
    return make_result(
        out, (x,), lambda g: (np.matmul(np.matmul(mh.T, g), mw),), "upsample_bilinear"
    )


def adaptive_avg_pool_height(x: Tensor) -> Tensor:
    """Mean over the height axis: ``(N, C, H, W) -> (N, C, 1, W)``."""
    if x.ndim != 4:
        raise DimensionError("adaptive_avg_pool_height expects (N, C, H, W)")
    h = x.shape[2]
    shape = x.shape
    return make_result(
        x.data.mean(axis=2, keepdims=True),
        (x,),
        lambda g: (np.broadcast_to(g / h, shape).copy(),),
        "adaptive_avg_pool_height",
    )


def batch_norm(
    x: Tensor,
    gamma: Tensor,
    beta: Tensor,
    running_mean: np.ndarray,
    running_var: np.ndarray,
    training: bool,
    momentum: float = 0.1,
    eps: float = 1e-5,
) -> Tensor:
    """Per-channel normalisation of ``(N, C, H, W)`` input.

    In training mode the batch statistics are used and the running estimates
    (mean, unbiased variance) are updated in place.
    """
    if x.ndim != 4:
        raise DimensionError("batch_norm expects (N, C, H, W)")
    c = x.shape[1]
    if gamma.shape != (c,) or beta.shape != (c,):
        raise DimensionError(f"batch_norm: gamma/beta must have length {c}")
    axes = (0, 2, 3)
    shape = (1, c, 1, 1)
    if training:
        m = x.size // c
        mu = x.data.mean(axis=axes)
        var = x.data.var(axis=axes)
        running_mean *= 1 - momentum
        running_mean += momentum * mu
        running_var *= 1 - momentum
        running_var += momentum * var * (m / max(m - 1, 1))
    else:
        mu, var = running_mean.astype(x.dtype), running_var.astype(x.dtype)
    inv_std = (1.0 / np.sqrt(var + eps)).astype(x.dtype)
    xhat = (x.data - mu.reshape(shape)) * inv_std.reshape(shape)
    out = xhat * gamma.data.reshape(shape) + beta.data.reshape(shape)

    def backward(g):
        dgamma = (g * xhat).sum(axis=axes)
        dbeta = g.sum(axis=axes)
        dxhat = g * gamma.data.reshape(shape)
        if training:
            m = x.size // c
            dx = (inv_std.reshape(shape) / m) * (
                m * dxhat
                - dxhat.sum(axis=axes).reshape(shape)
                - xhat * (dxhat * xhat).sum(axis=axes).reshape(shape)
            )
        else:
            dx = dxhat * inv_std.reshape(shape)
        return dx, dgamma, dbeta

    return make_result(out, (x, gamma, beta), backward, "batch_norm")


# ---------------------------------------------------------------------------
# sequence primitives
# ---------------------------------------------------------------------------

def log_softmax(x: Tensor) -> Tensor:
    """Log-softmax over the last axis."""
    shifted = x.data - x.data.max(axis=-1, keepdims=True)
    y = shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))
    return make_result(
        y, (x,), lambda g: (g - np.exp(y) * g.sum(axis=-1, keepdims=True),), "log_softmax"
    )


def reverse_sequences(x: Tensor, lengths: Optional[Sequence[int]] = None) -> Tensor:
    """Reverse each time-major sequence ``(T, N, ...)`` within its own length.

    Positions past a sequence's length stay in place, so the operation is an
    involution and its backward rule is the same permutation.
    """
    t, n = x.shape[0], x.shape[1]
    if lengths is None:
        lengths = [t] * n
    lengths = np.asarray(lengths, dtype=int)
    if lengths.shape != (n,) or (lengths < 0).any() or (lengths > t).any():
        raise ContractError(f"reverse_sequences: bad lengths {lengths.tolist()} for T={t}")
    steps = np.arange(t)[:, None]
    idx = np.where(steps < lengths[None, :], lengths[None, :] - 1 - steps, steps)
    cols = np.arange(n)[None, :]
    return make_result(x.data[idx, cols], (x,), lambda g: (g[idx, cols],), "reverse_sequences")


def lstm(x: Tensor, w_input: Tensor, w_hidden: Tensor, bias: Tensor) -> Tensor:
    """Unidirectional LSTM over a time-major sequence, zero initial state.

    ``x`` is ``(T, N, D)``; ``w_input`` is ``(D, 4H)``, ``w_hidden`` is
    ``(H, 4H)`` and ``bias`` is ``(4H,)`` with gate blocks ordered
    input, forget, cell, output.  Returns all hidden states ``(T, N, H)``.
    """
    if x.ndim != 3:
        raise DimensionError(f"lstm expects (T, N, D) input, got {x.shape}")
    t_len, n, d = x.shape
    hsz = w_hidden.shape[0]
    if w_input.shape != (d, 4 * hsz) or w_hidden.shape != (hsz, 4 * hsz) or bias.shape != (4 * hsz,):
        raise DimensionError(
            f"lstm: weights {w_input.shape}, {w_hidden.shape}, {bias.shape} do not fit D={d}, H={hsz}"
        )
    dtype = x.dtype
    wx, wh = w_input.data, w_hidden.data
    pre_x = (x.data.reshape(-1, d) @ wx + bias.data).reshape(t_len, n, 4 * hsz)
    gates = np.empty((t_len, n, 4 * hsz), dtype=dtype)
    cells = np.empty((t_len, n, hsz), dtype=dtype)
    hidden = np.empty((t_len, n, hsz), dtype=dtype)
    h = np.zeros((n, hsz), dtype=dtype)
    c = np.zeros((n, hsz), dtype=dtype)
    for t in range(t_len):
        z = pre_x[t] + h @ wh
        act = gates[t]
        act[:, : 2 * hsz] = _sigmoid(z[:, : 2 * hsz])
        act[:, 2 * hsz : 3 * hsz] = np.tanh(z[:, 2 * hsz : 3 * hsz])
        act[:, 3 * hsz :] = _sigmoid(z[:, 3 * hsz :])
        c = act[:, hsz : 2 * hsz] * c + act[:, :hsz] * act[:, 2 * hsz : 3 * hsz]
        h = act[:, 3 * hsz :] * np.tanh(c)
        cells[t] = c
        hidden[t] = h

    def backward(g):
        dz_all = np.empty((t_len, n, 4 * hsz), dtype=dtype)
        dwh = np.zeros_like(wh)
        dh_next = np.zeros((n, hsz), dtype=dtype)
        dc_next = np.zeros((n, hsz), dtype=dtype)
        for t in reversed(range(t_len)):
            i_g = gates[t][:, :hsz]
            f_g = gates[t][:, hsz : 2 * hsz]
            c_g = gates[t][:, 2 * hsz : 3 * hsz]
            o_g = gates[t][:, 3 * hsz :]
            tanh_c = np.tanh(cells[t])
            c_prev = cells[t - 1] if t > 0 else np.zeros_like(cells[t])
            dh = g[t] + dh_next
            dc = dh * o_g * (1 - tanh_c * tanh_c) + dc_next
            dz = dz_all[t]
            dz[:, :hsz] = dc * c_g * i_g * (1 - i_g)
            dz[:, hsz : 2 * hsz] = dc * c_prev * f_g * (1 - f_g)
            dz[:, 2 * hsz : 3 * hsz] = dc * i_g * (1 - c_g * c_g)
            dz[:, 3 * hsz :] = dh * tanh_c * o_g * (1 - o_g)
            if t > 0:
                dwh += hidden[t - 1].T @ dz
            dh_next = dz @ wh.T
            dc_next = dc * f_g
        dz2 = dz_all.reshape(-1, 4 * hsz)
        dx = (dz2 @ wx.T).reshape(x.shape)
        dwx = x.data.reshape(-1, d).T @ dz2
        return dx, dwx, dwh, dz2.sum(axis=0)

    return make_result(hidden, (x, w_input, w_hidden, bias), backward, "lstm")

