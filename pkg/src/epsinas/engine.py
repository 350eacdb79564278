"""Forward-only dense tensor primitives on float32 numpy arrays.

Tensors are plain ``numpy.ndarray`` objects: C-order (row-major) float32, so
``shape`` plus the flat data buffer fully describe a value.  NaN and +/-Inf are
legal contents and propagate through every op — score code upstream relies on
observing float range exhaustion rather than having it masked.

The public ops (:func:`conv2d`, :func:`batchnorm`, :func:`relu`,
:func:`avg_pool`, :func:`linear`) take the conventional NCHW layout.
Internally everything runs channels-last (NHWC): on a single core the im2col
copy and the sgemm behind ``np.matmul`` are markedly faster when the channel
axis is contiguous.  Layout is an implementation detail; results are
deterministic (bit-identical across repeated runs) because every reduction has
a fixed order.

Output spatial sizes follow floor((H + 2*padding - k)/stride) + 1.  The macro
skeleton's stride-2 residual convolutions land on odd window counts, so exact
divisibility cannot be required; sizes that floor to < 1 raise ShapeError.
"""

from __future__ import annotations

import threading

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

F32 = np.float32


class ShapeError(ValueError):
    """An operand's dimensions violate an op contract."""


def _require(cond: bool, msg: str) -> None:
    if not cond:
        raise ShapeError(msg)


def as_f32(x) -> np.ndarray:
    """Coerce to a C-contiguous float32 array (no copy when already one)."""
    return np.ascontiguousarray(x, dtype=F32)


class Workspace:
    """Reusable scratch buffers keyed by (tag, shape).

    A forward pass at 32x32 resolution moves hundreds of MB through im2col
    scratch; pooling the buffers avoids re-faulting those pages on every call.
    Buffers handed out here are transient: callers must fully consume them
    before requesting the same tag again.  Padded-input buffers are allocated
    zero-filled and only their interior is ever rewritten, so the zero border
    survives reuse untouched.
    """

    def __init__(self) -> None:
        self._bufs: dict[tuple, np.ndarray] = {}
        self._divisors: dict[tuple, np.ndarray] = {}

    def scratch(self, tag, shape) -> np.ndarray:
        key = (tag, shape)
        buf = self._bufs.get(key)
        if buf is None:
            buf = np.empty(shape, dtype=F32)
            self._bufs[key] = buf
        return buf

    def zeros_once(self, tag, shape) -> np.ndarray:
        """Like scratch, but zero-filled at allocation; never re-zeroed."""
        key = (tag, shape)
        buf = self._bufs.get(key)
        if buf is None:
            buf = np.zeros(shape, dtype=F32)
            self._bufs[key] = buf
        return buf

    def pool_divisor(self, key, build) -> np.ndarray:
        div = self._divisors.get(key)
        if div is None:
            div = build()
            self._divisors[key] = div
        return div

    def clear(self) -> None:
        """Drop every pooled buffer (frees memory between workload sizes)."""
        self._bufs.clear()
        self._divisors.clear()


_tls = threading.local()


def shared_workspace() -> Workspace:
    """Per-thread Workspace reused across forward passes.

    A cold forward faults in a few hundred MB of scratch; sharing one pool per
    thread amortises that across every network scored on the thread.  Buffers
    are only valid within a single forward, so concurrent passes must run on
    distinct threads — which is how the batch scorer parallelises anyway.
    """
    ws = getattr(_tls, "ws", None)
    if ws is None:
        ws = _tls.ws = Workspace()
    return ws


def _out_dim(size: int, k: int, stride: int, padding: int) -> int:
    return (size + 2 * padding - k) // stride + 1


# ---------------------------------------------------------------------------
# NHWC kernels.  x is [N, H, W, C] float32 throughout.
# ---------------------------------------------------------------------------

def nhwc_pad(x: np.ndarray, pad: int, ws: Workspace, tag) -> np.ndarray:
    if pad == 0:
        return x
    n, h, w, c = x.shape
    # pad is part of the key: equal padded shapes with different border
    # widths must not share a buffer, or a stale border would leak through.
    buf = ws.zeros_once((tag, "pad", pad), (n, h + 2 * pad, w + 2 * pad, c))
    buf[:, pad:-pad, pad:-pad, :] = x
    return buf


def nhwc_relu_pad(x: np.ndarray, pad: int, ws: Workspace, tag) -> np.ndarray:
    """max(x, 0) written straight into a zero-bordered pad buffer.

    Fuses the activation with padding so the pre-conv path makes one pass
    over the tensor instead of two.  With pad=0 it is just relu.
    """
    if pad == 0:
        return np.maximum(x, F32(0.0))
    n, h, w, c = x.shape
    buf = ws.zeros_once((tag, "pad", pad), (n, h + 2 * pad, w + 2 * pad, c))
    np.maximum(x, F32(0.0), out=buf[:, pad:-pad, pad:-pad, :])
    return buf


def pack_conv_weight(weight: np.ndarray) -> np.ndarray:
    """[O, C, kH, kW] -> [kH*kW*C, O] matrix matching im2col column order."""
    o, c, kh, kw = weight.shape
    return np.ascontiguousarray(
        weight.transpose(2, 3, 1, 0).reshape(kh * kw * c, o), dtype=F32
    )


def nhwc_im2col(x, kh, kw, stride, pad, ws: Workspace, tag):
    """Return (cols [N*H'*W', kh*kw*C], H', W') for the padded input."""
    xp = nhwc_pad(x, pad, ws, tag)
    n, hp, wp, c = xp.shape
    win = sliding_window_view(xp, (kh, kw), axis=(1, 2))
    if stride > 1:
        win = win[:, ::stride, ::stride]
    ho, wo = win.shape[1], win.shape[2]
    cols = ws.scratch((tag, "cols"), (n, ho, wo, kh, kw, c))
    # [N,H',W',C,kh,kw] view -> [N,H',W',kh,kw,C] contiguous copy
    np.copyto(cols, win.transpose(0, 1, 2, 4, 5, 3))
    return cols.reshape(n * ho * wo, kh * kw * c), ho, wo


def nhwc_conv(x, wmat, kh, kw, stride, pad, ws: Workspace, tag, bias=None):
    """Convolve NHWC input with a pre-packed [kh*kw*C, O] weight matrix."""
    n, h, w, c = x.shape
    o = wmat.shape[1]
    if kh == 1 and kw == 1 and pad == 0:
        xs = x[:, ::stride, ::stride] if stride > 1 else x
        ho, wo = xs.shape[1], xs.shape[2]
        out = xs.reshape(n * ho * wo, c) @ wmat
    else:
        cols, ho, wo = nhwc_im2col(x, kh, kw, stride, pad, ws, tag)
        out = np.empty((n * ho * wo, o), dtype=F32)
        np.matmul(cols, wmat, out=out)
    if bias is not None:
        out += bias
    return out.reshape(n, ho, wo, o)


def nhwc_batchnorm(x, gain, bias, eps, ws: Workspace, tag):
    """Training-mode batch norm: biased variance over N*H*W per channel.

    The centred sum of squares is accumulated in float64 so channel variance
    stays accurate over the ~10^5 entries a 32x32 batch contributes; all
    stored tensors remain float32.
    """
    n, h, w, c = x.shape
    cnt = n * h * w
    mean = x.mean(axis=(0, 1, 2))
    d = ws.scratch((tag, "bn"), x.shape)
    np.subtract(x, mean, out=d)
    np.multiply(d, d, out=d)
    ss = np.add.reduce(d.reshape(cnt, c), axis=0, dtype=np.float64)
    scale = (gain / np.sqrt(ss / cnt + eps)).astype(F32)
    shift = bias - mean * scale
    out = np.empty_like(x)
    np.multiply(x, scale, out=out)
    out += shift
    return out


def nhwc_relu(x):
    return np.maximum(x, F32(0.0))


def nhwc_avg_pool(x, k, stride, pad, include_pad, ws: Workspace, tag):
    """Separable window mean: sum k rows, then k columns of the row sums."""
    n, h, w, c = x.shape
    xp = nhwc_pad(x, pad, ws, tag)
    wp = xp.shape[2]
    ho, wo = _out_dim(h, k, stride, pad), _out_dim(w, k, stride, pad)
    vsum = ws.scratch((tag, "vsum"), (n, ho, wp, c))
    np.copyto(vsum, xp[:, 0:(ho - 1) * stride + 1:stride, :, :])
    for di in range(1, k):
        vsum += xp[:, di:di + (ho - 1) * stride + 1:stride, :, :]
    acc = np.empty((n, ho, wo, c), dtype=F32)
    np.copyto(acc, vsum[:, :, 0:(wo - 1) * stride + 1:stride, :])
    for dj in range(1, k):
        acc += vsum[:, :, dj:dj + (wo - 1) * stride + 1:stride, :]
    if include_pad or pad == 0:
        acc /= F32(k * k)
    else:
        def build():
            # Valid (non-pad) extent of each window factorises per axis.
            return np.multiply.outer(
                _pool_counts(h, ho, k, stride, pad),
                _pool_counts(w, wo, k, stride, pad))[None, :, :, None]
        acc /= ws.pool_divisor(("avgdiv", h, w, k, stride, pad), build)
    return acc


def nhwc_global_mean(x):
    """[N, H, W, C] -> [N, C] spatial mean (head pooling)."""
    return x.mean(axis=(1, 2))


# ---------------------------------------------------------------------------
# Single-channel (collapsed) kernels.  u is [N, H, W] float32.
#
# When every weight tensor holds one shared constant, all channels of every
# feature map are equal, so a network evaluates exactly at effective width 1:
# a conv becomes weight * in_channels * (window sum) and batch norm sees the
# same per-channel statistics it would over the full width.  These kernels
# back that collapsed evaluation; arrays are ~1 MB so they allocate freely.
# ---------------------------------------------------------------------------

def _pool_counts(size, m, k, stride, pad):
    """Per-output-index count of non-padding elements under the window."""
    out = np.empty(m, dtype=F32)
    for o in range(m):
        start = o * stride - pad
        out[o] = min(start + k, size) - max(start, 0)
    return out


def sc_boxsum(u, k, stride, pad):
    """Sliding k x k window sum over [N, H, W] (separable row/column adds)."""
    n, h, w = u.shape
    if k == 1 and pad == 0:
        return u[:, ::stride, ::stride].copy() if stride > 1 else u.copy()
    ho, wo = _out_dim(h, k, stride, pad), _out_dim(w, k, stride, pad)
    if pad:
        up = np.zeros((n, h + 2 * pad, w + 2 * pad), dtype=F32)
        up[:, pad:pad + h, pad:pad + w] = u
    else:
        up = u
    vs = up[:, 0:(ho - 1) * stride + 1:stride, :].copy()
    for i in range(1, k):
        vs += up[:, i:i + (ho - 1) * stride + 1:stride, :]
    out = vs[:, :, 0:(wo - 1) * stride + 1:stride].copy()
    for j in range(1, k):
        out += vs[:, :, j:j + (wo - 1) * stride + 1:stride]
    return out


def sc_batchnorm(u, gain, bias, eps):
    """Single-channel training-mode batch norm over all of [N, H, W]."""
    cnt = u.size
    mean = u.mean(dtype=F32)
    d = u - mean
    np.multiply(d, d, out=d)
    ss = np.add.reduce(d.reshape(-1), dtype=np.float64)
    scale = F32(F32(gain) / np.sqrt(ss / cnt + eps))
    shift = F32(bias) - mean * scale
    out = u * scale
    out += shift
    return out


def sc_avg_pool(u, k, stride, pad, include_pad):
    """Window mean over [N, H, W] with the same divisor rules as the
    channelled pool."""
    n, h, w = u.shape
    acc = sc_boxsum(u, k, stride, pad)
    if include_pad or pad == 0:
        acc /= F32(k * k)
    else:
        ho, wo = acc.shape[1], acc.shape[2]
        div = np.multiply.outer(_pool_counts(h, ho, k, stride, pad),
                                _pool_counts(w, wo, k, stride, pad))
        acc /= div[None, :, :]
    return acc


def nhwc_linear(x2d, weight, bias=None):
    out = x2d @ weight.T
    if bias is not None:
        out += bias
    return out


# ---------------------------------------------------------------------------
# Public NCHW ops.
# ---------------------------------------------------------------------------

def _check_4d(x: np.ndarray, op: str) -> None:
    _require(x.ndim == 4, f"{op}: expected 4-D input, got shape {x.shape}")


def _check_stride_pad(stride, padding, op: str) -> None:
    _require(isinstance(stride, (int, np.integer)) and stride >= 1,
             f"{op}: stride must be a positive int, got {stride!r}")
    _require(isinstance(padding, (int, np.integer)) and padding >= 0,
             f"{op}: padding must be a non-negative int, got {padding!r}")


def _check_window(h, w, kh, kw, stride, padding, op: str) -> tuple[int, int]:
    _require(h + 2 * padding >= kh and w + 2 * padding >= kw,
             f"{op}: window {kh}x{kw} exceeds padded input {h + 2 * padding}"
             f"x{w + 2 * padding}")
    ho, wo = _out_dim(h, kh, stride, padding), _out_dim(w, kw, stride, padding)
    _require(ho >= 1 and wo >= 1,
             f"{op}: output dims {ho}x{wo} not positive")
    return ho, wo


def conv2d(input, weight, bias=None, stride=1, padding=0):
    """Cross-correlation of [N,C,H,W] with [O,C,kH,kW] -> [N,O,H',W']."""
    x = as_f32(input)
    w = as_f32(weight)
    _check_4d(x, "conv2d")
    _require(w.ndim == 4, f"conv2d: expected 4-D weight, got shape {w.shape}")
    _check_stride_pad(stride, padding, "conv2d")
    n, c, h, wd = x.shape
    o, wc, kh, kw = w.shape
    _require(c == wc,
             f"conv2d: input channels {c} != weight in-channels {wc}")
    _check_window(h, wd, kh, kw, stride, padding, "conv2d")
    b = None
    if bias is not None:
        b = as_f32(bias)
        _require(b.shape == (o,),
                 f"conv2d: bias shape {b.shape} != ({o},)")
    xh = np.ascontiguousarray(x.transpose(0, 2, 3, 1))
    out = nhwc_conv(xh, pack_conv_weight(w), kh, kw, int(stride),
                    int(padding), shared_workspace(), "op", bias=b)
    return np.ascontiguousarray(out.transpose(0, 3, 1, 2))


def batchnorm(input, gain, bias, eps=1e-5):
    """Per-channel batch-statistics normalisation of [N,C,H,W]."""
    x = as_f32(input)
    _check_4d(x, "batchnorm")
    g = as_f32(gain)
    b = as_f32(bias)
    c = x.shape[1]
    _require(g.shape == (c,), f"batchnorm: gain shape {g.shape} != ({c},)")
    _require(b.shape == (c,), f"batchnorm: bias shape {b.shape} != ({c},)")
    _require(eps > 0 and np.isfinite(eps),
             f"batchnorm: eps must be a small positive float, got {eps!r}")
    xh = np.ascontiguousarray(x.transpose(0, 2, 3, 1))
    out = nhwc_batchnorm(xh, g, b, F32(eps), shared_workspace(), "op")
    return np.ascontiguousarray(out.transpose(0, 3, 1, 2))


def relu(input):
    """Elementwise max(x, 0); NaN stays NaN (NaN > 0 is false either way)."""
    return np.maximum(as_f32(input), F32(0.0))


def avg_pool(input, k, stride=1, padding=0, count_includes_pad=False):
    """Window mean over [N,C,H,W]; zero padding, divisor per the flag."""
    x = as_f32(input)
    _check_4d(x, "avg_pool")
    _check_stride_pad(stride, padding, "avg_pool")
    _require(isinstance(k, (int, np.integer)) and k >= 1,
             f"avg_pool: window size must be a positive int, got {k!r}")
    _require(padding < k,
             f"avg_pool: padding {padding} must be smaller than window {k}")
    n, c, h, w = x.shape
    _check_window(h, w, k, k, stride, padding, "avg_pool")
    xh = np.ascontiguousarray(x.transpose(0, 2, 3, 1))
    out = nhwc_avg_pool(xh, int(k), int(stride), int(padding),
                        bool(count_includes_pad), shared_workspace(), "op")
    return np.ascontiguousarray(out.transpose(0, 3, 1, 2))


def linear(input, weight, bias=None):
    """Affine map [N,F] @ [O,F]^T (+ bias) -> [N,O]."""
    x = as_f32(input)
    w = as_f32(weight)
    _require(x.ndim == 2, f"linear: expected 2-D input, got shape {x.shape}")
    _require(w.ndim == 2, f"linear: expected 2-D weight, got shape {w.shape}")
    _require(x.shape[1] == w.shape[1],
             f"linear: input features {x.shape[1]} != weight features "
             f"{w.shape[1]}")
    b = None
    if bias is not None:
        b = as_f32(bias)
        _require(b.shape == (w.shape[0],),
                 f"linear: bias shape {b.shape} != ({w.shape[0]},)")
    return nhwc_linear(x, w, b)
