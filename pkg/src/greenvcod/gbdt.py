"""Binary gradient-boosted decision trees with second-order logistic boosting.

Trees are grown depth-wise to a fixed depth from feature histograms and are
always complete: a node that has no useful split gets a pass-through split
(every sample goes left) and the unused branch is padded with zero leaves.
This keeps the node count at ``2**(depth+1) - 1`` per tree, which is what the
complexity accounting assumes.

Traversal rule everywhere: go left iff ``x[feature] < threshold``.
"""
import json
import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .errors import GvcodError, ModelFormatError, ShapeError

FORMAT = "gvcod-gbdt"
VERSION = 1
BASE_SCORE_CLAMP = 10.0
# pass-through split threshold: every finite float32 is strictly below it
PASS_THROUGH = float(np.finfo(np.float64).max)


@dataclass
class TrainConfig:
    n_trees: int = 200
    depth: int = 3
    learning_rate: float = 0.1
    l2_lambda: float = 1.0
    n_bins: int = 256
    min_child_weight: float = 1e-3
    # pixel sampling caps, applied by the callers that build sample matrices
    max_pixels_per_frame: int = 400
    neg_pos_ratio: float = 3.0
    seed: int = 0

    def __post_init__(self):
        if self.n_trees < 1:
            raise GvcodError("n_trees must be >= 1")
        if self.depth < 0:
            raise GvcodError("depth must be >= 0")
        if not 2 <= self.n_bins <= 256:
            raise GvcodError("n_bins must be in [2, 256]")
        if self.l2_lambda < 0 or self.learning_rate <= 0:
            raise GvcodError("l2_lambda must be >= 0 and learning_rate > 0")


@dataclass
class Tree:
    """Flat node arrays; leaves have ``left == right == -1``."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    @property
    def n_nodes(self):
        return len(self.feature)


@dataclass
class GbdtModel:
    trees: list
    base_score: float
    learning_rate: float
    depth: int
    n_features: int
    # per-round training log-loss; not serialized
    history: list = field(default_factory=list, repr=False, compare=False)

    def __post_init__(self):
        self._packed = None

    def packed(self):
        if self._packed is None:
            self._packed = _pack(self.trees)
        return self._packed


def sigmoid(z):
    return 1.0 / (1.0 + np.exp(-z))


def log_loss(y, raw):
    # log(1 + e^-z) for positives, log(1 + e^z) for negatives
    z = np.where(y > 0, raw, -raw)
    return float(np.mean(np.logaddexp(0.0, -z)))


# --------------------------------------------------------------------- binning


def bin_cuts(col, n_bins):
    """Candidate thresholds for one feature column.

    With at most ``n_bins`` distinct values the cuts are the midpoints between
    consecutive distinct values, so histogram search is exhaustive. Otherwise
    they are the interior quantiles.
    """
    s = np.sort(col.astype(np.float64))
    uniq = s[np.concatenate(([True], s[1:] != s[:-1]))]
    if len(uniq) <= n_bins:
        return (uniq[:-1] + uniq[1:]) / 2.0
    idx = np.linspace(0, len(s) - 1, n_bins + 1)[1:-1]
    cuts = np.unique(s[np.round(idx).astype(np.intp)])
    # a cut at the minimum would leave bin 0 empty
    return cuts[cuts > s[0]]


def bin_matrix(X, cuts):
    """(D, N) uint8 bin codes; bin b holds values in [cuts[b-1], cuts[b])."""
    n, d = X.shape
    out = np.empty((d, n), dtype=np.uint8)
    for f in range(d):
        out[f] = np.searchsorted(cuts[f], X[:, f].astype(np.float64), side="right")
    return out


# --------------------------------------------------------------------- kernels


@njit(nogil=True, cache=True)
def _node_totals(node_of, g, h, n_nodes):
    tot = np.zeros((n_nodes, 3))
    for i in range(node_of.shape[0]):
        n = node_of[i]
        tot[n, 0] += g[i]
        tot[n, 1] += h[i]
        tot[n, 2] += 1.0
    return tot


@njit(nogil=True, cache=True)
def _best_splits(binned, n_cuts, node_of, g, h, tot, lam, min_child_weight):
    """Best (feature, bin, gain) per node of the current level.

    Ties keep the lowest feature index, then the lowest bin.
    """
    n_features, n_samples = binned.shape
    n_nodes = tot.shape[0]
    best_gain = np.zeros(n_nodes)
    best_feat = np.full(n_nodes, -1, dtype=np.int32)
    best_bin = np.zeros(n_nodes, dtype=np.int32)
    parent = np.empty(n_nodes)
    for n in range(n_nodes):
        parent[n] = tot[n, 0] * tot[n, 0] / (tot[n, 1] + lam)
    hist = np.zeros((n_nodes, 256, 3))
    for f in range(n_features):
        nc = n_cuts[f]
        if nc == 0:
            continue
        hist[:, : nc + 1, :] = 0.0
        row = binned[f]
        for i in range(n_samples):
            n = node_of[i]
            b = row[i]
            hist[n, b, 0] += g[i]
            hist[n, b, 1] += h[i]
            hist[n, b, 2] += 1.0
        for n in range(n_nodes):
            if tot[n, 2] < 2.0:
                continue
            gl = 0.0
            hl = 0.0
            cl = 0.0
            for b in range(nc):
                gl += hist[n, b, 0]
                hl += hist[n, b, 1]
                cl += hist[n, b, 2]
                if cl == 0.0:
                    continue
                if cl == tot[n, 2]:
                    break
                hr = tot[n, 1] - hl
                if hl < min_child_weight or hr < min_child_weight:
                    continue
                gr = tot[n, 0] - gl
                gain = 0.5 * (gl * gl / (hl + lam) + gr * gr / (hr + lam) - parent[n])
                if gain > best_gain[n]:
                    best_gain[n] = gain
                    best_feat[n] = f
                    best_bin[n] = b
    return best_feat, best_bin, best_gain


@njit(nogil=True, cache=True)
def _descend(binned, node_of, split_feat, split_bin):
    for i in range(node_of.shape[0]):
        n = node_of[i]
        f = split_feat[n]
        if f < 0:
            node_of[i] = 2 * n
        elif binned[f, i] > split_bin[n]:
            node_of[i] = 2 * n + 1
        else:
            node_of[i] = 2 * n


@njit(nogil=True, cache=True)
def _predict_raw(X, base, feat, thr, left, right, val):
    n = X.shape[0]
    out = np.empty(n)
    for i in range(n):
        s = base
        for t in range(feat.shape[0]):
            node = 0
            while left[t, node] >= 0:
                if X[i, feat[t, node]] < thr[t, node]:
                    node = left[t, node]
                else:
                    node = right[t, node]
            s += val[t, node]
        out[i] = s
    return out


@njit(nogil=True, cache=True)
def _predict_windows(feats, maps, side, base, feat, thr, left, right, val):
    """Like ``_predict_raw`` over every pixel of ``feats``, with each row being
    the pixel's features followed by the ``side x side`` replicate-padded
    window of every map in ``maps``, read in place instead of materialised."""
    h, w, c = feats.shape
    half = side // 2
    s2 = side * side
    out = np.empty(h * w)
    for r in range(h):
        for col in range(w):
            s = base
            for t in range(feat.shape[0]):
                node = 0
                while left[t, node] >= 0:
                    f = feat[t, node]
                    if f < c:
                        x = feats[r, col, f]
                    else:
                        j = f - c
                        k = j // s2
                        rem = j - k * s2
                        rr = min(max(r + rem // side - half, 0), h - 1)
                        cc = min(max(col + rem % side - half, 0), w - 1)
                        x = maps[k, rr, cc]
                    if x < thr[t, node]:
                        node = left[t, node]
                    else:
                        node = right[t, node]
                s += val[t, node]
            out[r * w + col] = s
    return out


# -------------------------------------------------------------------- training


def _grow_tree(binned, cuts, n_cuts, g, h, cfg):
    """One complete tree of depth ``cfg.depth``; returns the tree and leaf slot per sample."""
    depth = cfg.depth
    n_internal = 2**depth - 1
    n_total = 2 ** (depth + 1) - 1
    feature = np.full(n_total, -1, dtype=np.int32)
    threshold = np.zeros(n_total)
    left = np.full(n_total, -1, dtype=np.int32)
    right = np.full(n_total, -1, dtype=np.int32)
    value = np.zeros(n_total)

    node_of = np.zeros(len(g), dtype=np.int32)
    for level in range(depth):
        n_nodes = 2**level
        tot = _node_totals(node_of, g, h, n_nodes)
        sf, sb, _ = _best_splits(
            binned, n_cuts, node_of, g, h, tot, cfg.l2_lambda, cfg.min_child_weight
        )
        offset = n_nodes - 1
        for n in range(n_nodes):
            k = offset + n
            left[k] = 2 * k + 1
            right[k] = 2 * k + 2
            if sf[n] >= 0:
                feature[k] = sf[n]
                threshold[k] = cuts[sf[n]][sb[n]]
            else:
                feature[k] = 0
                threshold[k] = PASS_THROUGH
        _descend(binned, node_of, sf, sb)

    n_leaves = 2**depth
    tot = _node_totals(node_of, g, h, n_leaves)
    leaf_vals = np.zeros(n_leaves)
    filled = tot[:, 2] > 0
    leaf_vals[filled] = -cfg.learning_rate * tot[filled, 0] / (tot[filled, 1] + cfg.l2_lambda)
    value[n_internal:] = leaf_vals
    return Tree(feature, threshold, left, right, value), leaf_vals[node_of]


def _check_xy(X, y):
    X = np.asarray(X, dtype=np.float32)
    if X.ndim != 2 or X.shape[0] == 0:
        raise GvcodError("no samples")
    y = np.asarray(y)
    if y.shape != (X.shape[0],):
        raise ShapeError(f"labels shape {y.shape} does not match {X.shape[0]} samples")
    if not np.all((y == 0) | (y == 1)):
        raise GvcodError("labels must be 0 or 1")
    if not np.all(np.isfinite(X)):
        raise GvcodError("features must be finite")
    return X, y.astype(np.float64)


def train(X, y, cfg=None):
    """Fit a boosted ensemble to binary labels with Newton steps on log-loss."""
    cfg = cfg or TrainConfig()
    X, y = _check_xy(X, y)
    n, d = X.shape
    prior = y.mean()
    if prior in (0.0, 1.0):
        base = BASE_SCORE_CLAMP if prior == 1.0 else -BASE_SCORE_CLAMP
        return GbdtModel([], base, cfg.learning_rate, cfg.depth, d)
    base = float(np.clip(math.log(prior / (1.0 - prior)), -BASE_SCORE_CLAMP, BASE_SCORE_CLAMP))

    cuts = [bin_cuts(X[:, f], cfg.n_bins) for f in range(d)]
    n_cuts = np.array([len(c) for c in cuts], dtype=np.int32)
    binned = bin_matrix(X, cuts)

    raw = np.full(n, base)
    model = GbdtModel([], base, cfg.learning_rate, cfg.depth, d)
    model.history.append(log_loss(y, raw))
    for _ in range(cfg.n_trees):
        p = sigmoid(raw)
        g = p - y
        h = p * (1.0 - p)
        tree, delta = _grow_tree(binned, cuts, n_cuts, g, h, cfg)
        raw = raw + delta
        model.trees.append(tree)
        model.history.append(log_loss(y, raw))
    return model


# ------------------------------------------------------------------ inference


def _pack(trees):
    n_trees = len(trees)
    width = max((t.n_nodes for t in trees), default=1)
    feat = np.zeros((n_trees, width), dtype=np.int32)
    thr = np.zeros((n_trees, width))
    left = np.full((n_trees, width), -1, dtype=np.int32)
    right = np.full((n_trees, width), -1, dtype=np.int32)
    val = np.zeros((n_trees, width))
    for i, t in enumerate(trees):
        k = t.n_nodes
        feat[i, :k] = np.maximum(t.feature, 0)
        thr[i, :k] = t.threshold
        left[i, :k] = t.left
        right[i, :k] = t.right
        val[i, :k] = t.value
    return feat, thr, left, right, val


def predict_raw(model, X):
    X = np.asarray(X, dtype=np.float32)
    if X.ndim != 2 or X.shape[1] != model.n_features:
        raise ShapeError(
            f"feature dimension mismatch: model expects {model.n_features}, got {X.shape[-1]}"
        )
    return _predict_raw(np.ascontiguousarray(X), float(model.base_score), *model.packed())


def predict_batch(model, X):
    """Foreground probability per row of ``X``."""
    return sigmoid(predict_raw(model, X))


def predict_windows(model, feats, maps, side):
    """Probabilities for every pixel of ``feats`` (H, W, C) where the model's
    rows are ``C`` features plus flattened ``side x side`` windows of each of
    the (K, H, W) ``maps``; equal to ``predict_batch`` on the explicit rows."""
    feats = np.ascontiguousarray(feats, dtype=np.float32)
    maps = np.ascontiguousarray(maps, dtype=np.float32)
    if maps.ndim != 3 or maps.shape[1:] != feats.shape[:2]:
        raise ShapeError(f"maps {maps.shape} do not match features {feats.shape}")
    width = feats.shape[2] + maps.shape[0] * side * side
    if width != model.n_features:
        raise ShapeError(f"feature dimension mismatch: model expects {model.n_features}, got {width}")
    raw = _predict_windows(feats, maps, int(side), float(model.base_score), *model.packed())
    return sigmoid(raw)


def predict_one(model, x):
    """Pure-Python traversal of a single sample; reference for ``predict_batch``."""
    x = np.asarray(x, dtype=np.float32)
    s = model.base_score
    for t in model.trees:
        node = 0
        while t.left[node] >= 0:
            node = t.left[node] if x[t.feature[node]] < t.threshold[node] else t.right[node]
        s += t.value[node]
    return 1.0 / (1.0 + math.exp(-s))


# -------------------------------------------------------------- serialization


def to_dict(model):
    trees = []
    for t in model.trees:
        nodes = []
        for k in range(t.n_nodes):
            if t.left[k] < 0:
                nodes.append({"v": float(t.value[k])})
            else:
                nodes.append(
                    {
                        "f": int(t.feature[k]),
                        "t": float(t.threshold[k]),
                        "l": int(t.left[k]),
                        "r": int(t.right[k]),
                    }
                )
        trees.append({"nodes": nodes})
    return {
        "format": FORMAT,
        "version": VERSION,
        "n_features": model.n_features,
        "depth": model.depth,
        "base_score": float(model.base_score),
        "learning_rate": float(model.learning_rate),
        "trees": trees,
    }


def save(model):
    return json.dumps(to_dict(model), separators=(",", ":")).encode("utf-8")


def _tree_from_nodes(nodes, n_features):
    if not isinstance(nodes, list) or not nodes:
        raise ModelFormatError("tree has no nodes")
    k = len(nodes)
    feature = np.full(k, -1, dtype=np.int32)
    threshold = np.zeros(k)
    left = np.full(k, -1, dtype=np.int32)
    right = np.full(k, -1, dtype=np.int32)
    value = np.zeros(k)
    for i, node in enumerate(nodes):
        if not isinstance(node, dict):
            raise ModelFormatError(f"node {i} is not an object")
        if "v" in node:
            value[i] = float(node["v"])
            continue
        try:
            f, t, lo, hi = int(node["f"]), float(node["t"]), int(node["l"]), int(node["r"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ModelFormatError(f"malformed internal node {i}: {exc}") from None
        if not 0 <= f < n_features:
            raise ModelFormatError(f"node {i} feature {f} out of range")
        # children after parents rules out cycles
        if not (i < lo < k and i < hi < k):
            raise ModelFormatError(f"node {i} has invalid children ({lo}, {hi})")
        feature[i], threshold[i], left[i], right[i] = f, t, lo, hi
    return Tree(feature, threshold, left, right, value)


def from_dict(doc):
    if not isinstance(doc, dict) or doc.get("format") != FORMAT:
        raise ModelFormatError("not a gvcod-gbdt model document")
    if doc.get("version") != VERSION:
        raise ModelFormatError(f"unsupported model version: {doc.get('version')!r}")
    try:
        n_features = int(doc["n_features"])
        depth = int(doc["depth"])
        base = float(doc["base_score"])
        raw_trees = doc["trees"]
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFormatError(f"malformed model document: {exc}") from None
    if n_features < 1 or not isinstance(raw_trees, list):
        raise ModelFormatError("malformed model document")
    trees = []
    for t in raw_trees:
        if not isinstance(t, dict):
            raise ModelFormatError("malformed tree entry")
        trees.append(_tree_from_nodes(t.get("nodes"), n_features))
    lr = float(doc.get("learning_rate", 1.0))
    return GbdtModel(trees, base, lr, depth, n_features)


def load(data):
    try:
        doc = json.loads(data.decode("utf-8") if isinstance(data, bytes) else data)
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ModelFormatError(f"malformed model document: {exc}") from None
    return from_dict(doc)


def best_root_split(X, g, h, cfg):
    """``(feature, threshold, gain)`` of the best split over all of ``X``; feature -1 if none."""
    X = np.asarray(X, dtype=np.float32)
    cuts = [bin_cuts(X[:, f], cfg.n_bins) for f in range(X.shape[1])]
    n_cuts = np.array([len(c) for c in cuts], dtype=np.int32)
    binned = bin_matrix(X, cuts)
    node_of = np.zeros(len(X), dtype=np.int32)
    g = np.asarray(g, dtype=np.float64)
    h = np.asarray(h, dtype=np.float64)
    tot = _node_totals(node_of, g, h, 1)
    f, b, gain = _best_splits(binned, n_cuts, node_of, g, h, tot, cfg.l2_lambda, cfg.min_child_weight)
    if f[0] < 0:
        return -1, PASS_THROUGH, 0.0
    return int(f[0]), float(cuts[f[0]][b[0]]), float(gain[0])
