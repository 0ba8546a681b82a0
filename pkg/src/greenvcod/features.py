"""Per-frame feature stacks at the standard 168 x 168 size.

Two providers share one interface, ``provide(frame, frame_id) -> (168, 168, C)``:

``FileFeatureProvider``
    Reads precomputed tensors (e.g. dumped CNN block features) from
    ``<root>/<frame_id:05d>.gvf``.

``SyntheticFeatureProvider``
    Hand-crafted local statistics, computed on the frame resized to
    672 x 672 and average-pooled 4 x 4 down to 168 x 168. For each window
    size in ``scales`` (default 9 and 33 pixels at 672 resolution) it emits
    11 channels:

    ====  ===============================================
    0-2   local mean of R, G, B
    3-5   local standard deviation of R, G, B
    6     local mean of the luma gradient magnitude
    7-10  local mean of |gradient| projected on 0, 45, 90, 135 degrees
    ====  ===============================================

    followed by luma, red-minus-luma chroma, and the normalised row and
    column position of the pixel: 26 channels with the default scales.
"""
import threading
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage

from . import STANDARD_SIZE, gvf
from .errors import DataError
from .tensor import resize_bilinear

WORK_SIZE = 4 * STANDARD_SIZE


@dataclass(frozen=True)
class FeatureProviderConfig:
    kind: str = "synthetic"
    root: str | None = None
    scales: tuple = (9, 33)

    def __post_init__(self):
        if self.kind not in ("synthetic", "file"):
            raise DataError(f"unknown feature provider kind {self.kind!r}")


def _as_rgb(frame):
    frame = np.asarray(frame)
    if frame.ndim == 2:
        frame = np.repeat(frame[..., None], 3, axis=2)
    if frame.ndim != 3 or frame.shape[2] < 3:
        raise DataError(f"expected an RGB frame, got shape {frame.shape}")
    frame = frame[..., :3]
    if frame.dtype == np.uint8:
        return frame.astype(np.float64) / 255.0
    return frame.astype(np.float64)


def _pool4(a):
    h, w = a.shape[:2]
    return a.reshape(h // 4, 4, w // 4, 4, *a.shape[2:]).mean(axis=(1, 3))


class SyntheticFeatureProvider:
    def __init__(self, scales=(9, 33)):
        self.scales = tuple(int(s) for s in scales)

    @property
    def channels(self):
        return 11 * len(self.scales) + 4

    def provide(self, frame, frame_id=None):
        rgb = resize_bilinear(_as_rgb(frame), WORK_SIZE, WORK_SIZE).astype(np.float64)
        luma = rgb @ np.array([0.299, 0.587, 0.114])
        gx = ndimage.sobel(luma, axis=1, mode="nearest") / 8.0
        gy = ndimage.sobel(luma, axis=0, mode="nearest") / 8.0
        diag = (gx + gy) / np.sqrt(2.0)
        anti = (gx - gy) / np.sqrt(2.0)
        grad = np.stack([np.hypot(gx, gy), np.abs(gx), np.abs(diag), np.abs(gy), np.abs(anti)], axis=2)
        # centring first makes the variance of a flat frame exactly zero
        centred = rgb - rgb.mean(axis=(0, 1))

        chans = []
        for size in self.scales:
            box = (size, size, 1)
            mean_c = ndimage.uniform_filter(centred, size=box, mode="reflect")
            var = ndimage.uniform_filter(centred**2, size=box, mode="reflect") - mean_c**2
            chans.append(mean_c + rgb.mean(axis=(0, 1)))
            chans.append(np.sqrt(np.maximum(var, 0.0)))
            chans.append(ndimage.uniform_filter(grad, size=box, mode="reflect"))
        chans.append(luma[..., None])
        chans.append((rgb[..., 0] - luma)[..., None])
        stack = _pool4(np.concatenate(chans, axis=2))

        pos = np.arange(STANDARD_SIZE, dtype=np.float64) / (STANDARD_SIZE - 1)
        rows = np.broadcast_to(pos[:, None, None], (STANDARD_SIZE, STANDARD_SIZE, 1))
        cols = np.broadcast_to(pos[None, :, None], (STANDARD_SIZE, STANDARD_SIZE, 1))
        return np.concatenate([stack, rows, cols], axis=2).astype(np.float32)

    def validate_sequence(self, n_frames):
        if n_frames < 1:
            raise DataError("no frames")
        return self.channels


class FileFeatureProvider:
    """Loads ``<root>/<frame_id:05d>.gvf``; every frame must agree on C."""

    def __init__(self, root, channels=None):
        self.root = Path(root)
        self.channels = channels
        self._lock = threading.Lock()

    def path(self, frame_id):
        return self.root / f"{int(frame_id):05d}.gvf"

    def provide(self, frame=None, frame_id=0):
        path = self.path(frame_id)
        if not path.is_file():
            raise DataError(f"feature file not found: {path}", code="not_found")
        t = gvf.read(path)
        self._check(t.shape, path)
        return t

    def _check(self, shape, path):
        h, w, c = shape
        if (h, w) != (STANDARD_SIZE, STANDARD_SIZE):
            raise DataError(f"feature shape mismatch: {path} is {h}x{w}x{c}")
        with self._lock:
            if self.channels is None:
                self.channels = c
            elif c != self.channels:
                raise DataError(
                    f"inconsistent channel count: {path} has {c}, expected {self.channels}"
                )

    def validate_sequence(self, n_frames):
        if n_frames < 1:
            raise DataError("no frames")
        found = {}
        problems = []
        for i in range(n_frames):
            path = self.path(i)
            if not path.is_file():
                problems.append(f"{i:05d} (missing)")
                continue
            h, w, c = gvf.read_header(path)
            if (h, w) != (STANDARD_SIZE, STANDARD_SIZE):
                problems.append(f"{i:05d} (shape {h}x{w})")
                continue
            found[i] = c
        counts = list(found.values())
        ref = self.channels or (max(set(counts), key=counts.count) if counts else None)
        problems += [f"{i:05d} (C={c}, expected {ref})" for i, c in found.items() if c != ref]
        if problems:
            raise DataError("invalid feature sequence, offending frames: " + ", ".join(sorted(problems)))
        self.channels = ref
        return ref


def make_provider(cfg, feature_dir=None):
    if cfg.kind == "synthetic":
        return SyntheticFeatureProvider(cfg.scales)
    root = feature_dir if feature_dir is not None else cfg.root
    if root is None:
        raise DataError("file-backed provider needs a feature directory")
    return FileFeatureProvider(root)


def validate_sequence(cfg, n_frames, feature_dir=None):
    return make_provider(cfg, feature_dir).validate_sequence(n_frames)
