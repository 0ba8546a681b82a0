"""Dense float32 image tensors: resampling, replicate-padded crops, channel stacking.

Tensors are plain numpy arrays laid out ``(height, width, channels)``.
Prediction maps are 2-D ``(height, width)`` arrays with values in [0, 1];
every function here accepts either rank and returns the rank it was given.
"""
import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import ShapeError


def as_tensor(a, dtype=np.float32):
    a = np.asarray(a, dtype=dtype)
    if a.ndim not in (2, 3):
        raise ShapeError(f"expected a 2-D map or 3-D tensor, got shape {a.shape}")
    if a.size == 0:
        raise ShapeError("empty tensor")
    if not np.all(np.isfinite(a)):
        raise ShapeError("tensor contains non-finite values")
    return a


def _bilinear_taps(n_in, n_out):
    # half-pixel centres, clamped to the valid range
    scale = n_in / n_out
    pos = (np.arange(n_out, dtype=np.float64) + 0.5) * scale - 0.5
    pos = np.clip(pos, 0.0, n_in - 1)
    lo = np.floor(pos).astype(np.intp)
    hi = np.minimum(lo + 1, n_in - 1)
    return lo, hi, pos - lo


def resize_bilinear(src, out_h, out_w):
    """Channel-wise bilinear resampling with half-pixel-centred coordinates.

    Interpolation is written as ``a + w * (b - a)`` so that a same-size resize
    and a constant input are both reproduced bit-exactly.
    """
    if out_h < 1 or out_w < 1:
        raise ShapeError("empty target")
    src = as_tensor(src)
    h, w = src.shape[:2]
    if (h, w) == (out_h, out_w):
        return src.copy()
    a = src.astype(np.float64)
    lo, hi, wt = _bilinear_taps(h, out_h)
    wt = wt.reshape((-1,) + (1,) * (a.ndim - 1))
    a = a[lo] + wt * (a[hi] - a[lo])
    lo, hi, wt = _bilinear_taps(w, out_w)
    wt = wt.reshape((1, -1) + (1,) * (a.ndim - 2))
    a = a[:, lo] + wt * (a[:, hi] - a[:, lo])
    return a.astype(np.float32)


def _area_matrix(n_in, n_out):
    """(n_out, n_in) matrix of overlap fractions between output and input cells."""
    edges_out = np.arange(n_out + 1, dtype=np.float64) * (n_in / n_out)
    lo = edges_out[:-1, None]
    hi = edges_out[1:, None]
    cells = np.arange(n_in, dtype=np.float64)[None, :]
    overlap = np.clip(np.minimum(hi, cells + 1) - np.maximum(lo, cells), 0.0, None)
    return overlap / overlap.sum(axis=1, keepdims=True)


def resize_area(src, out_h, out_w):
    """Exact area-weighted average (box resampling) for arbitrary size ratios."""
    if out_h < 1 or out_w < 1:
        raise ShapeError("empty target")
    src = as_tensor(src, np.float64)
    rows = _area_matrix(src.shape[0], out_h)
    cols = _area_matrix(src.shape[1], out_w)
    out = np.tensordot(rows, src, axes=(1, 0))
    out = np.moveaxis(np.tensordot(cols, out, axes=(1, 1)), 0, 1)
    return out


def downsample_mask(mask, out_h, out_w):
    """Area-average a binary mask, then mark cells with coverage >= 0.5 as foreground."""
    cover = resize_area(np.asarray(mask, dtype=np.float64), out_h, out_w)
    return (cover >= 0.5).astype(np.uint8)


def crop_replicate(src, center_row, center_col, side):
    """``side x side`` window around a pixel; out-of-range coordinates clamp to the border."""
    if side < 1 or side % 2 == 0:
        raise ShapeError("side must be odd")
    h, w = src.shape[:2]
    if not (0 <= center_row < h and 0 <= center_col < w):
        raise ShapeError(f"center ({center_row}, {center_col}) outside {h}x{w} map")
    half = side // 2
    rows = np.clip(np.arange(center_row - half, center_row + half + 1), 0, h - 1)
    cols = np.clip(np.arange(center_col - half, center_col + half + 1), 0, w - 1)
    return src[np.ix_(rows, cols)]


def neighborhoods(pmap, side, rows=None, cols=None):
    """Flattened replicate-padded ``side x side`` crops, one row per pixel.

    With ``rows``/``cols`` omitted every pixel is returned in row-major order,
    giving an ``(H*W, side*side)`` matrix. Each row equals
    ``crop_replicate(pmap, r, c, side).ravel()``.
    """
    if side < 1 or side % 2 == 0:
        raise ShapeError("side must be odd")
    pmap = np.asarray(pmap, dtype=np.float32)
    if pmap.ndim != 2:
        raise ShapeError("neighborhoods expects a 2-D prediction map")
    half = side // 2
    padded = np.pad(pmap, half, mode="edge")
    windows = sliding_window_view(padded, (side, side))
    if rows is None:
        return windows.reshape(-1, side * side)
    return windows[rows, cols].reshape(len(rows), side * side)


def concat_channels(a, b):
    a = np.asarray(a, dtype=np.float32)
    b = np.asarray(b, dtype=np.float32)
    if a.ndim == 2:
        a = a[..., None]
    if b.ndim == 2:
        b = b[..., None]
    if a.shape[:2] != b.shape[:2]:
        raise ShapeError("spatial shape mismatch")
    return np.concatenate([a, b], axis=2)


def split_channels(t, n_first):
    return t[..., :n_first], t[..., n_first:]


_PROB_EPS = np.float32(2.0**-24)


def probability_map(p, shape=None):
    """float32 copy of probabilities, kept strictly inside (0, 1) after rounding."""
    p = np.asarray(p, dtype=np.float64)
    if shape is not None:
        p = p.reshape(shape)
    return np.clip(p.astype(np.float32), _PROB_EPS, np.float32(1.0) - _PROB_EPS)
