"""Run configuration: one TOML file plus command-line overrides (flags win).

Example::

    seed = 0
    workers = 1

    [paths]
    data = "data"
    models = "models"
    maps = "runs/maps"
    out = "runs/final"

    [features]
    kind = "synthetic"        # or "file": <data>/<seq>/features/*.gvf
    scales = [9, 33]

    [cascade]
    resolutions = [42, 42, 84, 168]
    side = 19
    n_trees = 200
    depth = 3
    max_pixels_per_frame = 400

    [refine]
    S = 19
    K = 5
    gap_short = 1
    gap_long = 3
    n_trees = 150
    depth = 6
    max_pixels_per_frame = 150

    [ensemble]
    weight = 0.5
    threshold = "adaptive"    # or a number in [0, 1]

    [synth]
    n_sequences = 4
    n_frames = 40
    gamma = 0.6
"""
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import tomli

from .cascade import CascadeConfig
from .ensemble import EnsembleConfig
from .errors import GvcodError
from .features import FeatureProviderConfig
from .gbdt import TrainConfig
from .temporal import TNCubeSpec

_TRAIN_KEYS = {f.name for f in fields(TrainConfig)} - {"seed"}


@dataclass
class SynthSettings:
    n_sequences: int = 4
    n_frames: int = 40
    height: int = 120
    width: int = 160
    axes: tuple = (18.0, 26.0)
    max_speed: float = 3.0
    gamma: float = 0.6
    noise: float = 0.03


@dataclass
class RunConfig:
    data: Path = Path("data")
    models: Path = Path("models")
    maps: Path = Path("runs/maps")
    out: Path = Path("runs/final")
    seed: int = 0
    workers: int = 1
    features: FeatureProviderConfig = field(default_factory=FeatureProviderConfig)
    resolutions: tuple = (42, 42, 84, 168)
    side: int = 19
    cascade_train: TrainConfig = field(default_factory=lambda: TrainConfig(n_trees=200, depth=3))
    cube_s: int = 19
    cube_k: int = 5
    gap_short: int = 1
    gap_long: int = 3
    refine_train: TrainConfig = field(
        default_factory=lambda: TrainConfig(n_trees=150, depth=6, max_pixels_per_frame=150)
    )
    ensemble: EnsembleConfig = field(default_factory=EnsembleConfig)
    synth: SynthSettings = field(default_factory=SynthSettings)

    def cascade_config(self):
        stages = [replace(self.cascade_train, seed=self.seed + k) for k in range(4)]
        return CascadeConfig(resolutions=self.resolutions, side=self.side, stages=stages)

    def refine_config(self, term):
        return replace(self.refine_train, seed=self.seed + (101 if term == "long" else 100))

    def cube_spec(self, term):
        gap = self.gap_long if term == "long" else self.gap_short
        return TNCubeSpec(S=self.cube_s, K=self.cube_k, gap=gap)


def _train_cfg(section, base):
    unknown = set(section) - _TRAIN_KEYS - {"resolutions", "side", "S", "K", "gap_short", "gap_long"}
    if unknown:
        raise GvcodError(f"unknown config keys: {sorted(unknown)}", code="config")
    return replace(base, **{k: v for k, v in section.items() if k in _TRAIN_KEYS})


def load_config(path=None):
    cfg = RunConfig()
    if path is None:
        return cfg
    path = Path(path)
    try:
        doc = tomli.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise GvcodError(f"config file not found: {path}", code="not_found") from None
    except tomli.TOMLDecodeError as exc:
        raise GvcodError(f"cannot parse {path}: {exc}", code="config") from None
    base = path.parent
    cfg.seed = int(doc.get("seed", cfg.seed))
    cfg.workers = int(doc.get("workers", cfg.workers))
    for key, value in doc.get("paths", {}).items():
        if key not in ("data", "models", "maps", "out"):
            raise GvcodError(f"unknown [paths] key {key!r}", code="config")
        setattr(cfg, key, base / value)
    if "features" in doc:
        sec = doc["features"]
        root = sec.get("root")
        cfg.features = FeatureProviderConfig(
            kind=sec.get("kind", "synthetic"),
            root=str(base / root) if root else None,
            scales=tuple(sec.get("scales", (9, 33))),
        )
    if "cascade" in doc:
        sec = doc["cascade"]
        cfg.resolutions = tuple(sec.get("resolutions", cfg.resolutions))
        cfg.side = int(sec.get("side", cfg.side))
        cfg.cascade_train = _train_cfg(sec, cfg.cascade_train)
    if "refine" in doc:
        sec = doc["refine"]
        cfg.cube_s = int(sec.get("S", cfg.cube_s))
        cfg.cube_k = int(sec.get("K", cfg.cube_k))
        cfg.gap_short = int(sec.get("gap_short", cfg.gap_short))
        cfg.gap_long = int(sec.get("gap_long", cfg.gap_long))
        cfg.refine_train = _train_cfg(sec, cfg.refine_train)
    if "ensemble" in doc:
        sec = doc["ensemble"]
        thr = sec.get("threshold", "adaptive")
        cfg.ensemble = EnsembleConfig(
            weight=float(sec.get("weight", 0.5)),
            threshold=None if thr == "adaptive" else float(thr),
        )
    if "synth" in doc:
        known = {f.name for f in fields(SynthSettings)}
        sec = doc["synth"]
        if set(sec) - known:
            raise GvcodError(f"unknown [synth] keys: {sorted(set(sec) - known)}", code="config")
        cfg.synth = replace(cfg.synth, **{k: (tuple(v) if isinstance(v, list) else v) for k, v in sec.items()})
    return cfg
