"""Fusion of the short- and long-term refined maps, and adaptive binarisation."""
from dataclasses import dataclass

import numpy as np

from .errors import GvcodError, ShapeError


@dataclass(frozen=True)
class EnsembleConfig:
    weight: float = 0.5  # weight of the long-term map
    threshold: float | None = None  # fixed threshold; None means adaptive

    def __post_init__(self):
        if not 0.0 <= self.weight <= 1.0:
            raise GvcodError("fusion weight must be in [0, 1]")
        if self.threshold is not None and not 0.0 <= self.threshold <= 1.0:
            raise GvcodError("threshold must be in [0, 1]")


def fuse(short_map, long_map, cfg=EnsembleConfig()):
    short_map = np.asarray(short_map, dtype=np.float32)
    long_map = np.asarray(long_map, dtype=np.float32)
    if short_map.shape != long_map.shape:
        raise ShapeError("spatial shape mismatch")
    w = cfg.weight
    if w == 1.0:
        return long_map.copy()
    if w == 0.0:
        return short_map.copy()
    fused = w * long_map.astype(np.float64) + (1.0 - w) * short_map.astype(np.float64)
    return np.clip(fused, 0.0, 1.0).astype(np.float32)


def adaptive_threshold(pmap):
    return min(1.0, 2.0 * float(np.mean(pmap, dtype=np.float64)))


def binarize(pmap, tau):
    # strict comparison: a flat map at tau, or an all-zero map at tau = 0, stays empty
    return (np.asarray(pmap) > tau).astype(np.uint8)


def threshold_for(pmap, cfg=EnsembleConfig()):
    return adaptive_threshold(pmap) if cfg.threshold is None else cfg.threshold
