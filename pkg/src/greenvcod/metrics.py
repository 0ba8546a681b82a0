"""Segmentation metrics: weighted F-measure, E-measure, MAE, Dice and IoU.

Continuous predictions feed MAE and the weighted F-measure; E-measure, Dice
and IoU score the prediction binarised at its adaptive threshold
``min(1, 2 * mean)``. Scoring uses ``pred >= tau`` (``pred > 0`` when tau is
0), the usual evaluation-toolkit convention, so a perfect binary prediction
always scores perfectly; the strict rule in ``ensemble.binarize`` would empty
any object covering half the frame. Frames with an empty ground truth only
count towards MAE.
"""
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import ndimage

from .dataset import _images, read_gray, read_mask
from .ensemble import adaptive_threshold
from .errors import DataError, ShapeError
from .tensor import resize_bilinear

METRICS = ("wfm", "emeasure", "mae", "mdice", "miou")
EPS_ALIGN = 1e-8
BETA2 = 1.0
ALPHA = math.log(0.5) / 5.0


def _pair(pred, gt):
    pred = np.asarray(pred, dtype=np.float64)
    gt = np.asarray(gt)
    if pred.shape != gt.shape:
        raise ShapeError(f"prediction {pred.shape} and ground truth {gt.shape} differ in shape")
    return pred, gt.astype(bool)


def mae(pred, gt):
    pred, gt = _pair(pred, gt)
    return float(np.mean(np.abs(pred - gt)))


def dice_iou(pred_bin, gt):
    p, g = _pair(pred_bin, gt)
    p = p > 0
    inter = np.count_nonzero(p & g)
    n_p, n_g = np.count_nonzero(p), np.count_nonzero(g)
    if n_p + n_g == 0:
        return 1.0, 1.0
    return 2.0 * inter / (n_p + n_g), inter / (n_p + n_g - inter)


def emeasure(pred_bin, gt):
    p, g = _pair(pred_bin, gt)
    p = (p > 0).astype(np.float64)
    if not g.any():
        return float(1.0 - p.mean())
    if g.all():
        return float(p.mean())
    g = g.astype(np.float64)
    dp = p - p.mean()
    dg = g - g.mean()
    align = 2.0 * dp * dg / (dp * dp + dg * dg + EPS_ALIGN)
    return float(np.mean((align + 1.0) ** 2 / 4.0))


def gaussian_kernel(size=7, sigma=5.0):
    half = size // 2
    x = np.arange(-half, half + 1, dtype=np.float64)
    k = np.exp(-(x[:, None] ** 2 + x[None, :] ** 2) / (2.0 * sigma * sigma))
    return k / k.sum()


def wfm(pred, gt):
    """Weighted F-measure (beta^2 = 1).

    Background errors are first replaced by the error at the nearest
    foreground pixel (ties go to the smallest column, then row, as
    ``scipy.ndimage.distance_transform_edt`` resolves them), smoothed by a
    7 x 7, sigma 5 Gaussian with replicate padding; foreground pixels keep the
    smaller of raw and smoothed error. Background errors are then scaled by
    ``2 - exp(ln(0.5) / 5 * d)`` with ``d`` the distance to the foreground.
    Returns 0 for an empty ground truth.
    """
    pred, g = _pair(pred, gt)
    if not g.any():
        return 0.0
    err = np.abs(pred - g)
    dist, (ri, ci) = ndimage.distance_transform_edt(~g, return_indices=True)
    spread = err[ri, ci]
    smooth = ndimage.correlate(spread, gaussian_kernel(), mode="nearest")
    min_err = np.where(g & (smooth < err), smooth, err)
    weight = np.where(g, 1.0, 2.0 - np.exp(ALPHA * dist))
    ew = min_err * weight
    tp = g.sum() - ew[g].sum()
    fp = ew[~g].sum()
    recall = 1.0 - ew[g].mean()
    precision = tp / (tp + fp) if tp + fp > 0 else 0.0
    denom = BETA2 * precision + recall
    if denom <= 0:
        return 0.0
    return float((1.0 + BETA2) * precision * recall / denom)


def score_binarize(pred):
    tau = adaptive_threshold(pred)
    return (pred > 0) if tau == 0 else (pred >= tau)


def frame_metrics(pred, gt):
    """All five scores for one frame; overlap scores are None for an empty GT."""
    pred, g = _pair(pred, gt)
    out = {"mae": mae(pred, g)}
    if not g.any():
        out.update(wfm=None, emeasure=None, mdice=None, miou=None)
        return out
    pb = score_binarize(pred)
    d, i = dice_iou(pb, g)
    out.update(wfm=wfm(pred, g), emeasure=emeasure(pb, g), mdice=d, miou=i)
    return out


def _mean(values):
    vals = [v for v in values if v is not None and not (isinstance(v, float) and math.isnan(v))]
    return float(np.mean(vals)) if vals else float("nan")


@dataclass
class MetricsReport:
    per_sequence: dict = field(default_factory=dict)
    overall: dict = field(default_factory=dict)

    def to_json(self):
        def clean(d):
            return {k: (None if isinstance(v, float) and math.isnan(v) else v) for k, v in d.items()}

        doc = {
            "per_sequence": {name: clean(m) for name, m in self.per_sequence.items()},
            "overall": clean(self.overall),
        }
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"

    def to_table(self):
        head = ["sequence", "wFm", "Ephi", "MAE", "mDice", "mIoU"]
        rows = [[name] + [m[k] for k in METRICS] for name, m in self.per_sequence.items()]
        rows.append(["overall"] + [self.overall[k] for k in METRICS])
        return format_table(head, rows)


def format_table(head, rows):
    cells = [head] + [
        [r[0]] + [("-" if v is None or math.isnan(v) else f"{v:.5f}") for v in r[1:]] for r in rows
    ]
    widths = [max(len(c[i]) for c in cells) for i in range(len(head))]
    lines = ["  ".join(c[i].ljust(widths[i]) if i == 0 else c[i].rjust(widths[i]) for i in range(len(head))) for c in cells]
    lines.insert(1, "-" * len(lines[0]))
    return "\n".join(lines) + "\n"


def aggregate(per_frame_by_sequence):
    """Frame scores -> per-sequence means -> mean over sequences."""
    report = MetricsReport()
    for name, frames in per_frame_by_sequence.items():
        report.per_sequence[name] = {k: _mean(f[k] for f in frames) for k in METRICS}
    report.overall = {k: _mean(m[k] for m in report.per_sequence.values()) for k in METRICS}
    return report


def evaluate_arrays(pairs_by_sequence):
    """``{sequence: [(pred, gt), ...]}``; predictions are resized to the GT size."""
    scores = {}
    for name, pairs in pairs_by_sequence.items():
        frames = []
        for pred, gt in pairs:
            pred = np.asarray(pred, dtype=np.float32)
            if pred.shape != np.shape(gt):
                pred = np.clip(resize_bilinear(pred, *np.shape(gt)), 0.0, 1.0)
            frames.append(frame_metrics(pred, gt))
        scores[name] = frames
    return aggregate(scores)


def evaluate_dataset(pred_root, data_root):
    """Score ``<pred_root>/<seq>/<stem>.png`` against ``<data_root>/<seq>/gt/<stem>.png``."""
    pred_root, data_root = Path(pred_root), Path(data_root)
    if not pred_root.is_dir():
        raise DataError(f"prediction directory not found: {pred_root}", code="not_found")
    seqs = sorted(d for d in data_root.iterdir() if (d / "gt").is_dir()) if data_root.is_dir() else []
    if not seqs:
        raise DataError(f"no sequences found under {data_root}")
    missing = []
    pairs = {}
    for seq in seqs:
        gts = _images(seq / "gt")
        items = []
        for gt_path in gts:
            pred_path = pred_root / seq.name / (gt_path.stem + ".png")
            if not pred_path.is_file():
                # a dataset root given as predictions scores its own masks
                pred_path = pred_root / seq.name / "gt" / (gt_path.stem + ".png")
            if not pred_path.is_file():
                missing.append(str(pred_path))
                continue
            items.append((pred_path, gt_path))
        pairs[seq.name] = items
    if missing:
        shown = ", ".join(missing[:10]) + (" ..." if len(missing) > 10 else "")
        raise DataError(f"missing prediction files ({len(missing)}): {shown}", code="not_found")
    loaded = {
        name: [(read_gray(p).astype(np.float32) / 255.0, read_mask(g)) for p, g in items]
        for name, items in pairs.items()
    }
    return evaluate_arrays(loaded)
