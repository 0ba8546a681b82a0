"""Temporal-neighbourhood prediction cubes.

A cube is the ``S x S`` replicate-padded window around one fixed pixel,
taken from ``K`` frames of a video's prediction volume. The frames are
sampled every ``gap`` frames around the current one; indices that fall off
either end of the video are mirrored back inside without repeating the end
frame, so the last frame of a 5-frame window at the end of a video reads
``[F-3, F-2, F-1, F-2, F-3]``.
"""
from dataclasses import dataclass

import numpy as np

from .errors import GvcodError, ShapeError
from .tensor import crop_replicate


@dataclass(frozen=True)
class TNCubeSpec:
    S: int = 19
    K: int = 5
    gap: int = 1

    def __post_init__(self):
        if self.S < 1 or self.S % 2 == 0:
            raise GvcodError("S must be odd")
        if self.K < 1 or self.K % 2 == 0:
            raise GvcodError("K must be odd")
        if self.gap < 1:
            raise GvcodError("GAP must be >= 1")

    @property
    def cube_size(self):
        return self.S * self.S * self.K

    @property
    def radius(self):
        """Largest frame distance a cube can reach."""
        return self.gap * (self.K - 1) // 2


def reflect_index(i, n_frames):
    if n_frames <= 1:
        return 0
    period = 2 * (n_frames - 1)
    j = abs(int(i)) % period
    return j if j <= n_frames - 1 else period - j


def sample_indices(i, spec, n_frames):
    if spec.K % 2 == 0:
        raise GvcodError("K must be odd")
    if not 0 <= i < n_frames:
        raise GvcodError(f"frame index {i} outside 0..{n_frames - 1}")
    half = (spec.K - 1) // 2
    return [reflect_index(i + (k - half) * spec.gap, n_frames) for k in range(spec.K)]


def as_volume(maps):
    """Stack per-frame 2-D maps into an ``(F, H, W)`` float32 volume."""
    vol = np.stack([np.asarray(m, dtype=np.float32).reshape(m.shape[:2]) for m in maps])
    if vol.shape[0] < 1:
        raise ShapeError("empty prediction volume")
    return vol


def extract_tn_cube(volume, frame, row, col, spec):
    """``(S, S, K)`` cube; slice k is the crop of the k-th sampled frame at the same pixel."""
    idx = sample_indices(frame, spec, len(volume))
    return np.stack([crop_replicate(volume[j], row, col, spec.S) for j in idx], axis=2)


def tn_feature_vector(cube, pixel_features):
    """Pixel features followed by the cube flattened slice-major, then row-major."""
    cube = np.asarray(cube, dtype=np.float32)
    flat = np.moveaxis(cube, 2, 0).ravel()
    return np.concatenate([np.asarray(pixel_features, dtype=np.float32).ravel(), flat])


def tn_feature_rows(volume, features, frame, spec, pixels=None):
    """Vectorised ``tn_feature_vector`` for many pixels of one frame.

    ``features`` is the frame's ``(H, W, C)`` stack; ``pixels`` are flat
    row-major indices (all pixels when omitted). Returns an
    ``(n, C + S*S*K)`` float32 matrix.
    """
    n_frames, h, w = volume.shape
    if features.shape[:2] != (h, w):
        raise ShapeError(f"features {features.shape[:2]} do not match volume frames {(h, w)}")
    c = features.shape[2]
    if pixels is None:
        pixels = np.arange(h * w)
    rows, cols = np.divmod(np.asarray(pixels), w)
    half = spec.S // 2
    offs = np.arange(-half, half + 1)
    rr = np.clip(rows[:, None] + offs[None, :], 0, h - 1)  # (n, S)
    cc = np.clip(cols[:, None] + offs[None, :], 0, w - 1)
    out = np.empty((len(rows), c + spec.cube_size), dtype=np.float32)
    out[:, :c] = features.reshape(h * w, c)[pixels]
    s2 = spec.S * spec.S
    for k, j in enumerate(sample_indices(frame, spec, n_frames)):
        block = volume[j][rr[:, :, None], cc[:, None, :]]  # (n, S, S)
        out[:, c + k * s2 : c + (k + 1) * s2] = block.reshape(len(rows), s2)
    return out
