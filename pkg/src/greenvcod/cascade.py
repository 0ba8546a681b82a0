"""Multi-resolution decision cascade.

Four boosted classifiers run at increasing map sizes (42, 42, 84, 168 by
default). Stage 1 sees only the resized feature stack; every later stage also
sees the 19 x 19 replicate-padded neighbourhood of the previous stage's
prediction map, bilinearly resized to its own resolution, appended after the
feature channels. A pixel row therefore has ``C`` or ``C + 361`` columns.
"""
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import STANDARD_SIZE, gbdt
from .errors import GvcodError, ModelFormatError, ShapeError
from .parallel import pmap
from .sampling import frame_rng, sample_pixels
from .tensor import downsample_mask, neighborhoods, probability_map, resize_bilinear

PAPER_RESOLUTIONS = (42, 42, 84, 168)


def _default_stage_cfgs():
    return [gbdt.TrainConfig(n_trees=200, depth=3) for _ in PAPER_RESOLUTIONS]


@dataclass
class CascadeConfig:
    resolutions: tuple = PAPER_RESOLUTIONS
    side: int = 19
    stages: list = field(default_factory=_default_stage_cfgs)

    def __post_init__(self):
        self.resolutions = tuple(int(r) for r in self.resolutions)
        if len(self.resolutions) != 4 or len(self.stages) != 4:
            raise GvcodError("cascade needs exactly 4 stages")
        if any(b < a for a, b in zip(self.resolutions, self.resolutions[1:])):
            raise GvcodError("stage resolutions must be nondecreasing")
        if self.resolutions[-1] != STANDARD_SIZE:
            raise GvcodError(f"last stage must run at {STANDARD_SIZE}")
        if self.side < 1 or self.side % 2 == 0:
            raise GvcodError("side must be odd")

    @classmethod
    def paper_scale(cls):
        return cls(stages=[gbdt.TrainConfig(n_trees=10000, depth=3) for _ in range(4)])


@dataclass
class CascadeModel:
    stages: list
    config: CascadeConfig
    channels: int

    @classmethod
    def untrained(cls, channels, config=None):
        config = config or CascadeConfig()
        dims = [channels] + [channels + config.side**2] * 3
        stages = [gbdt.GbdtModel([], 0.0, c.learning_rate, c.depth, d) for c, d in zip(config.stages, dims)]
        return cls(stages, config, channels)

    def expected_width(self, k):
        return self.channels if k == 0 else self.channels + self.config.side**2

    def save(self, directory):
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        for k, stage in enumerate(self.stages):
            (directory / f"stage{k + 1}.json").write_bytes(gbdt.save(stage))
        meta = {
            "resolutions": list(self.config.resolutions),
            "side": self.config.side,
            "channels": self.channels,
        }
        (directory / "config.json").write_text(json.dumps(meta, indent=2) + "\n")

    @classmethod
    def load(cls, directory):
        directory = Path(directory)
        try:
            meta = json.loads((directory / "config.json").read_text())
            stages = [gbdt.load((directory / f"stage{k}.json").read_bytes()) for k in range(1, 5)]
        except FileNotFoundError as exc:
            raise ModelFormatError(f"incomplete cascade directory: {exc.filename}", code="not_found") from None
        cfg = CascadeConfig(
            resolutions=tuple(meta["resolutions"]),
            side=int(meta["side"]),
            stages=[gbdt.TrainConfig(n_trees=max(1, len(s.trees)), depth=s.depth) for s in stages],
        )
        model = cls(stages, cfg, int(meta["channels"]))
        for k, s in enumerate(stages):
            if s.n_features != model.expected_width(k):
                raise ModelFormatError(f"stage{k + 1} expects {s.n_features} features, cascade says {model.expected_width(k)}")
        return model


def stage_inputs(features, prev_map, res, side=19, pixels=None):
    """Sample matrix for one stage, one row per pixel of the ``res x res`` grid.

    ``pixels`` optionally restricts the rows to the given flat (row-major)
    indices, in that order.
    """
    if res < 1:
        raise ShapeError("stage resolution must be positive")
    feats = resize_bilinear(features, res, res)
    c = feats.shape[2]
    flat = feats.reshape(res * res, c)
    if pixels is not None:
        flat = flat[pixels]
    if prev_map is None:
        return np.ascontiguousarray(flat)
    pmap = resize_bilinear(np.asarray(prev_map, dtype=np.float32), res, res)
    if pixels is None:
        nb = neighborhoods(pmap, side)
    else:
        nb = neighborhoods(pmap, side, pixels // res, pixels % res)
    return np.concatenate([flat, nb], axis=1)


def _run_stage(model, k, features, prev_map):
    # same rows as stage_inputs, but the neighbourhoods are read in place
    res, side = model.config.resolutions[k], model.config.side
    feats = resize_bilinear(features, res, res)
    if prev_map is None:
        maps = np.zeros((0, res, res), dtype=np.float32)
    else:
        maps = resize_bilinear(np.asarray(prev_map, dtype=np.float32), res, res)[None]
    width = feats.shape[2] + len(maps) * side * side
    if width != model.expected_width(k):
        raise ShapeError(f"stage {k + 1} input width {width} != {model.expected_width(k)}")
    return probability_map(gbdt.predict_windows(model.stages[k], feats, maps, side), (res, res))


def infer_cascade(model, features, return_all=False):
    """Standard-size prediction map (and, optionally, every stage's map)."""
    features = np.asarray(features, dtype=np.float32)
    if features.ndim != 3 or features.shape[2] != model.channels:
        raise ShapeError(
            f"channel mismatch: cascade trained on C={model.channels}, got shape {features.shape}"
        )
    maps = []
    prev = None
    for k in range(4):
        prev = _run_stage(model, k, features, prev)
        maps.append(prev)
    return maps if return_all else maps[-1]


def train_cascade(samples, cfg=None, workers=1):
    """Train the four stages in order.

    ``samples`` is a list of ``(features, mask)`` pairs: standard-size feature
    stacks and binary GT masks at any resolution. Each stage trains on pixels
    sampled from its own resolution, with the previous stage's inference maps
    on the same training frames as neighbourhood input.
    """
    cfg = cfg or CascadeConfig()
    if not samples:
        raise GvcodError("empty training set")
    channels = samples[0][0].shape[2]
    for feats, mask in samples:
        if feats.shape != (STANDARD_SIZE, STANDARD_SIZE, channels):
            raise ShapeError(f"feature stack shape {feats.shape} is not {STANDARD_SIZE}x{STANDARD_SIZE}x{channels}")
        if not np.all((mask == 0) | (mask == 1)):
            raise GvcodError("masks must be binary")

    model = CascadeModel.untrained(channels, cfg)
    prev_maps = [None] * len(samples)
    for k, (res, tcfg) in enumerate(zip(cfg.resolutions, cfg.stages)):

        def build(i, k=k, res=res, tcfg=tcfg):
            feats, mask = samples[i]
            labels = downsample_mask(mask, res, res).ravel()
            rng = frame_rng(tcfg.seed, k, i)
            pix = sample_pixels(labels, tcfg.max_pixels_per_frame, tcfg.neg_pos_ratio, rng)
            return stage_inputs(feats, prev_maps[i], res, cfg.side, pix), labels[pix]

        parts = pmap(build, range(len(samples)), workers)
        X = np.concatenate([p[0] for p in parts])
        y = np.concatenate([p[1] for p in parts])
        if X.shape[1] != model.expected_width(k):
            raise ShapeError(f"stage {k + 1} training width {X.shape[1]} != {model.expected_width(k)}")
        model.stages[k] = gbdt.train(X, y, tcfg)
        if k < 3:
            prev_maps = pmap(
                lambda i, k=k: _run_stage(model, k, samples[i][0], prev_maps[i]),
                range(len(samples)),
                workers,
            )
    return model
