"""Glue between the dataset layout, the models and the on-disk outputs."""
import os
import shutil
import tempfile
from contextlib import contextmanager
from pathlib import Path

import numpy as np

from . import STANDARD_SIZE, gvf
from .cascade import infer_cascade, train_cascade
from .dataset import write_gray
from .ensemble import binarize, fuse, threshold_for
from .errors import DataError
from .features import make_provider
from .parallel import pmap
from .refine import RefineVideo, refine_sequence, train_refiner
from .tensor import resize_bilinear

MARKER = ".gvcod-output"


@contextmanager
def staged_output(target):
    """Build a directory next to ``target`` and swap it in only on success.

    An existing ``target`` is replaced only if it was produced by this tool
    (it carries the marker file); anything else is left alone.
    """
    target = Path(target)
    if target.exists() and any(target.iterdir()) and not (target / MARKER).exists():
        raise DataError(f"refusing to overwrite non-empty directory {target}", code="exists")
    target.parent.mkdir(parents=True, exist_ok=True)
    tmp = Path(tempfile.mkdtemp(prefix=f".{target.name}.", dir=target.parent))
    try:
        yield tmp
        (tmp / MARKER).write_text("")
        if target.exists():
            shutil.rmtree(target)
        os.replace(tmp, target)
    except BaseException:
        shutil.rmtree(tmp, ignore_errors=True)
        raise


def sequence_features(seq, provider_cfg, workers=1):
    provider = make_provider(provider_cfg, seq.feature_dir if provider_cfg.kind == "file" else None)
    if provider_cfg.kind == "file":
        provider.validate_sequence(len(seq))
        return pmap(lambda i: provider.provide(None, i), range(len(seq)), workers)
    return pmap(lambda i: provider.provide(seq.frame(i), i), range(len(seq)), workers)


def train_cascade_on(seqs, provider_cfg, cascade_cfg, workers=1, features=None):
    samples = []
    for s, seq in enumerate(seqs):
        feats = features[s] if features is not None else sequence_features(seq, provider_cfg, workers)
        for i, f in enumerate(feats):
            mask = seq.mask(i)
            if mask.shape != tuple(seq.frame_size):
                raise DataError(f"{seq.mask_paths[i]}: mask {mask.shape} does not match frame {seq.frame_size}")
            samples.append((f, mask))
    return train_cascade(samples, cascade_cfg, workers)


def predict_volume(model, feats, workers=1):
    return np.stack(pmap(lambda f: infer_cascade(model, f), feats, workers))


def to_png(pmap, size=None):
    pmap = np.asarray(pmap, dtype=np.float32)
    if size is not None and tuple(size) != pmap.shape:
        pmap = resize_bilinear(pmap, *size)
    return np.clip(np.round(255.0 * pmap.astype(np.float64)), 0, 255).astype(np.uint8)


def write_maps(out_dir, seq, volume):
    d = Path(out_dir) / seq.name
    d.mkdir(parents=True, exist_ok=True)
    for stem, pmap in zip(seq.stems, volume):
        gvf.write(d / f"{stem}.gvf", pmap)
        write_gray(d / f"{stem}.png", to_png(pmap))


def read_volume(maps_dir, seq):
    d = Path(maps_dir) / seq.name
    maps = []
    for stem in seq.stems:
        path = d / f"{stem}.gvf"
        if not path.is_file():
            raise DataError(f"prediction map not found: {path}", code="not_found")
        t = gvf.read(path)
        if t.shape != (STANDARD_SIZE, STANDARD_SIZE, 1):
            raise DataError(f"{path}: expected a {STANDARD_SIZE}x{STANDARD_SIZE}x1 map, got {t.shape}")
        maps.append(t[..., 0])
    return np.stack(maps)


def refine_videos(seqs, maps_dir, provider_cfg, workers=1, with_masks=True):
    videos = []
    for seq in seqs:
        feats = sequence_features(seq, provider_cfg, workers)
        masks = [seq.mask(i) for i in range(len(seq))] if with_masks else None
        videos.append(RefineVideo(read_volume(maps_dir, seq), feats, masks))
    return videos


def train_refiners(videos, terms, cfg, workers=1):
    return {t: train_refiner(videos, t, cfg.cube_spec(t), cfg.refine_config(t), workers) for t in terms}


def write_final(out_dir, seq, short_vol, long_vol, ens_cfg):
    out_dir = Path(out_dir)
    fused_vol = np.stack([fuse(s, l, ens_cfg) for s, l in zip(short_vol, long_vol)])
    for kind, vol in (("short", short_vol), ("long", long_vol), ("fused", fused_vol)):
        d = out_dir / kind / seq.name
        d.mkdir(parents=True, exist_ok=True)
        for stem, pmap in zip(seq.stems, vol):
            write_gray(d / f"{stem}.png", to_png(pmap, seq.frame_size))
    d = out_dir / "fused_binary" / seq.name
    d.mkdir(parents=True, exist_ok=True)
    for stem, pmap in zip(seq.stems, fused_vol):
        full = resize_bilinear(pmap, *seq.frame_size)
        write_gray(d / f"{stem}.png", binarize(full, threshold_for(full, ens_cfg)) * 255)


def refine_outputs(video, refiners, workers=1):
    return {t: refine_sequence(r, video.volume, video.features, workers) for t, r in refiners.items()}
