"""Video sequence layout and a synthetic camouflage video generator.

Dataset layout::

    <root>/<sequence>/frames/*.png     RGB frames
    <root>/<sequence>/gt/*.png         single-channel masks, 0 / 255
    <root>/<sequence>/features/*.gvf   optional precomputed GVF1 features

Sequences are sorted by name and frames lexicographically by file name.
"""
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image
from scipy import ndimage

from .errors import DataError

IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg", ".bmp")


@dataclass
class VideoSequence:
    name: str
    frame_paths: list
    mask_paths: list = field(default_factory=list)
    feature_dir: Path | None = None
    frame_size: tuple = (0, 0)

    def __len__(self):
        return len(self.frame_paths)

    @property
    def stems(self):
        return [p.stem for p in self.frame_paths]

    def frame(self, i):
        return read_rgb(self.frame_paths[i])

    def mask(self, i):
        return read_mask(self.mask_paths[i])


def read_rgb(path):
    try:
        with Image.open(path) as im:
            return np.asarray(im.convert("RGB"))
    except (OSError, ValueError) as exc:
        raise DataError(f"cannot decode image {path}: {exc}") from None


def read_gray(path):
    try:
        with Image.open(path) as im:
            return np.asarray(im.convert("L"))
    except (OSError, ValueError) as exc:
        raise DataError(f"cannot decode image {path}: {exc}") from None


def read_mask(path):
    return (read_gray(path) >= 128).astype(np.uint8)


def write_gray(path, arr):
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(np.asarray(arr, dtype=np.uint8), mode="L").save(path, optimize=False)


def _images(folder):
    return sorted(p for p in folder.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES)


def load_sequence(seq_dir, require_masks=True):
    seq_dir = Path(seq_dir)
    frames_dir = seq_dir / "frames"
    if not frames_dir.is_dir():
        raise DataError(f"{seq_dir}: missing frames/ directory")
    frames = _images(frames_dir)
    if not frames:
        raise DataError(f"{seq_dir}: no frames")
    masks = _images(seq_dir / "gt") if (seq_dir / "gt").is_dir() else []
    if require_masks and len(masks) != len(frames):
        raise DataError(f"{seq_dir}: {len(frames)} frames but {len(masks)} masks")
    if masks and len(masks) != len(frames):
        raise DataError(f"{seq_dir}: {len(frames)} frames but {len(masks)} masks")
    feat_dir = seq_dir / "features"
    try:
        with Image.open(frames[0]) as im:
            w, h = im.size
    except OSError as exc:
        raise DataError(f"cannot decode image {frames[0]}: {exc}") from None
    return VideoSequence(
        seq_dir.name, frames, masks, feat_dir if feat_dir.is_dir() else None, (h, w)
    )


def load_dataset(root, require_masks=True):
    root = Path(root)
    if not root.is_dir():
        raise DataError(f"dataset root not found: {root}", code="not_found")
    seqs = [
        load_sequence(d, require_masks)
        for d in sorted(root.iterdir())
        if d.is_dir() and (d / "frames").is_dir()
    ]
    if not seqs:
        raise DataError(f"no sequences found under {root}")
    return seqs


# ----------------------------------------------------------------- synthetic


@dataclass
class SynthConfig:
    name: str = "seq000"
    n_frames: int = 40
    height: int = 120
    width: int = 160
    axes: tuple = (18.0, 26.0)  # ellipse semi-axes (rows, cols)
    velocity: tuple = (1.0, 2.0)  # pixels per frame (rows, cols)
    start: tuple | None = None  # centre at frame 0; random when None
    gamma: float = 0.6  # 1 = object texture identical to background
    noise: float = 0.03  # per-frame gaussian noise std, intensity units
    seed: int = 0

    def __post_init__(self):
        if self.n_frames < 1:
            raise DataError("n_frames must be >= 1")
        if not 0.0 <= self.gamma <= 1.0:
            raise DataError("gamma must be in [0, 1]")
        if self.height < 2 or self.width < 2:
            raise DataError("canvas too small")


def _texture(rng, h, w, sigma, base, amp):
    noise = rng.standard_normal((h, w, 3))
    smooth = ndimage.gaussian_filter(noise, sigma=(sigma, sigma, 0), mode="wrap")
    smooth /= smooth.std() + 1e-12
    return np.asarray(base) + amp * smooth


def ellipse_mask(h, w, center, axes):
    """Ellipse rasterised at pixel centres with toroidal wrap-around."""
    rows = np.arange(h, dtype=np.float64)[:, None]
    cols = np.arange(w, dtype=np.float64)[None, :]
    dr = (rows - center[0] + h / 2) % h - h / 2
    dc = (cols - center[1] + w / 2) % w - w / 2
    return ((dr / axes[0]) ** 2 + (dc / axes[1]) ** 2 <= 1.0).astype(np.uint8)


def synth_frames(cfg):
    """Yield ``(rgb uint8, mask uint8)`` per frame; deterministic per seed."""
    rng = np.random.default_rng(cfg.seed)
    h, w = cfg.height, cfg.width
    background = _texture(rng, h, w, 3.0, (0.45, 0.50, 0.35), 0.12)
    # the distinct texture: warmer tint, finer grain
    distinct = _texture(rng, h, w, 1.2, (0.62, 0.42, 0.30), 0.12)
    obj = cfg.gamma * background + (1.0 - cfg.gamma) * distinct
    if cfg.start is None:
        start = (rng.uniform(0, h), rng.uniform(0, w))
    else:
        start = cfg.start
    for t in range(cfg.n_frames):
        center = ((start[0] + t * cfg.velocity[0]) % h, (start[1] + t * cfg.velocity[1]) % w)
        mask = ellipse_mask(h, w, center, cfg.axes)
        # the object carries its texture along with it
        shift = (int(round(t * cfg.velocity[0])), int(round(t * cfg.velocity[1])))
        moved = np.roll(obj, shift, axis=(0, 1))
        img = np.where(mask[..., None] > 0, moved, background)
        img = img + cfg.noise * rng.standard_normal(img.shape)
        rgb = np.clip(np.round(img * 255.0), 0, 255).astype(np.uint8)
        yield rgb, mask


def synth_generate(cfg, out_root):
    seq_dir = Path(out_root) / cfg.name
    try:
        (seq_dir / "frames").mkdir(parents=True, exist_ok=True)
        (seq_dir / "gt").mkdir(parents=True, exist_ok=True)
        for t, (rgb, mask) in enumerate(synth_frames(cfg)):
            Image.fromarray(rgb, mode="RGB").save(seq_dir / "frames" / f"{t:05d}.png")
            write_gray(seq_dir / "gt" / f"{t:05d}.png", mask * 255)
    except OSError as exc:
        raise DataError(f"cannot write synthetic sequence to {seq_dir}: {exc}", code="io") from None
    return load_sequence(seq_dir)
