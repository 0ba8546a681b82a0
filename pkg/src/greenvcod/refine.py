"""Short- and long-term decision refinement.

Each refiner is one boosted classifier over pixel rows built by
``temporal.tn_feature_rows``: the pixel's standard-size features followed by
its temporal-neighbourhood cube from the cascade's prediction volume. The
short-term refiner samples consecutive frames (gap 1); the long-term one
samples every ``gap`` frames.
"""
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import STANDARD_SIZE, gbdt
from .errors import GvcodError, ModelFormatError, ShapeError
from .parallel import pmap
from .sampling import frame_rng, sample_pixels
from .temporal import TNCubeSpec, sample_indices, tn_feature_rows
from .tensor import downsample_mask, probability_map

TERMS = ("short", "long")


@dataclass
class RefinerModel:
    term: str
    spec: TNCubeSpec
    model: gbdt.GbdtModel
    channels: int

    def __post_init__(self):
        if self.term not in TERMS:
            raise GvcodError(f"unknown refinement term {self.term!r}")
        if self.model.n_features != self.width:
            raise ShapeError(f"refiner model has {self.model.n_features} features, expected {self.width}")

    @property
    def width(self):
        return self.channels + self.spec.cube_size

    @classmethod
    def untrained(cls, term, spec, channels):
        return cls(term, spec, gbdt.GbdtModel([], 0.0, 0.1, 6, channels + spec.cube_size), channels)

    def save(self, directory):
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        (directory / f"refiner_{self.term}.json").write_bytes(gbdt.save(self.model))
        sidecar = {"S": self.spec.S, "K": self.spec.K, "GAP": self.spec.gap, "C": self.channels}
        (directory / f"refiner_{self.term}.spec.json").write_text(json.dumps(sidecar, indent=2) + "\n")

    @classmethod
    def load(cls, directory, term):
        directory = Path(directory)
        try:
            model = gbdt.load((directory / f"refiner_{term}.json").read_bytes())
            side = json.loads((directory / f"refiner_{term}.spec.json").read_text())
        except FileNotFoundError as exc:
            raise ModelFormatError(f"missing refiner file: {exc.filename}", code="not_found") from None
        spec = TNCubeSpec(S=int(side["S"]), K=int(side["K"]), gap=int(side["GAP"]))
        return cls(term, spec, model, int(side["C"]))


@dataclass
class RefineVideo:
    """One training/inference video: ``(F, 168, 168)`` volume, per-frame features, masks."""

    volume: np.ndarray
    features: list
    masks: list | None = None

    def __post_init__(self):
        self.volume = np.asarray(self.volume, dtype=np.float32)
        if self.volume.ndim != 3 or self.volume.shape[1:] != (STANDARD_SIZE, STANDARD_SIZE):
            raise ShapeError(f"prediction volume must be F x {STANDARD_SIZE} x {STANDARD_SIZE}, got {self.volume.shape}")
        if len(self.features) != len(self.volume):
            raise ShapeError(f"{len(self.features)} feature stacks for {len(self.volume)} frames")
        if self.masks is not None:
            if len(self.masks) != len(self.volume):
                raise ShapeError(f"{len(self.masks)} masks for {len(self.volume)} frames")
            self.masks = [
                m if np.shape(m) == (STANDARD_SIZE, STANDARD_SIZE) else downsample_mask(m, STANDARD_SIZE, STANDARD_SIZE)
                for m in self.masks
            ]


def _check_features(feats, channels):
    if feats.shape != (STANDARD_SIZE, STANDARD_SIZE, channels):
        raise ShapeError(f"feature stack {feats.shape} does not match C={channels}")


def training_matrix(videos, spec, cfg, workers=1):
    channels = videos[0].features[0].shape[2]
    jobs = [(v, f) for v in range(len(videos)) for f in range(len(videos[v].volume))]

    def build(job):
        v, f = job
        video = videos[v]
        _check_features(video.features[f], channels)
        labels = np.asarray(video.masks[f]).ravel()
        pix = sample_pixels(labels, cfg.max_pixels_per_frame, cfg.neg_pos_ratio, frame_rng(cfg.seed, v, f))
        return tn_feature_rows(video.volume, video.features[f], f, spec, pix), labels[pix]

    parts = pmap(build, jobs, workers)
    return np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts]), channels


def train_refiner(videos, term, spec, cfg=None, workers=1):
    cfg = cfg or gbdt.TrainConfig(n_trees=150, depth=6, max_pixels_per_frame=150)
    if not videos:
        raise GvcodError("empty training set")
    if any(v.masks is None for v in videos):
        raise GvcodError("refiner training needs GT masks")
    X, y, channels = training_matrix(videos, spec, cfg, workers)
    if X.shape[1] != channels + spec.cube_size:
        raise ShapeError("refiner sample width mismatch")
    return RefinerModel(term, spec, gbdt.train(X, y, cfg), channels)


def refine_frame(refiner, volume, features, frame):
    """Refined map of one frame; the rows are those of ``tn_feature_rows``, read in place."""
    _check_features(features, refiner.channels)
    maps = volume[sample_indices(frame, refiner.spec, len(volume))]
    out = gbdt.predict_windows(refiner.model, features, maps, refiner.spec.S)
    return probability_map(out, (STANDARD_SIZE, STANDARD_SIZE))


def refine_sequence(refiner, volume, features, workers=1):
    """Refined ``(F, 168, 168)`` volume; frame ``i`` only reads frames within the cube radius."""
    video = RefineVideo(volume, features)
    maps = pmap(lambda f: refine_frame(refiner, video.volume, video.features[f], f), range(len(video.volume)), workers)
    return np.stack(maps)
