"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run on its own with ``pytest tests/test_acceptance.py -v -s`` (or
``python3 tests/test_acceptance.py``). The end-to-end criteria (6 and 7)
are marked slow and take roughly ten minutes together on one core.
"""
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from greenvcod import complexity, gbdt, metrics
from greenvcod.cascade import CascadeConfig, infer_cascade, train_cascade
from greenvcod.cli import main as cli_main
from greenvcod.dataset import SynthConfig, synth_frames
from greenvcod.ensemble import fuse
from greenvcod.features import SyntheticFeatureProvider
from greenvcod.gbdt import TrainConfig
from greenvcod.parallel import pmap
from greenvcod.refine import RefineVideo, refine_sequence, train_refiner
from greenvcod.temporal import TNCubeSpec, reflect_index, sample_indices

import oracles


def report(capsys, name, ok, detail, elapsed, budget):
    ok = ok and elapsed < budget
    with capsys.disabled():
        print(f"\n[{'PASS' if ok else 'FAIL'}] {name}: {detail} ({elapsed:.1f}s, budget {budget:.0f}s)")
    return ok


# -------------------------------------------------------------- criterion 1


def test_c1_complexity_table(capsys):
    t0 = time.perf_counter()
    rep = complexity.paper_report()
    params = [r.params for r in rep.rows]
    macs = [r.macs for r in rep.rows]
    ok = (
        params == [16_742_216] + [220_000] * 4 + [1_140_000] * 2
        and macs == [13_503_446_880, 70_560_000, 70_560_000, 282_240_000, 1_128_960_000, 1_185_408_000, 1_185_408_000]
        and rep.total_params == 19_902_216
        and rep.total_macs == 17_426_582_880
    )
    ok = report(capsys, "C1 complexity table", ok,
                f"params {rep.total_params:,}, MACs {rep.total_macs:,}", time.perf_counter() - t0, 1)
    assert ok


def test_c2_paper_tables_out_of_scope(capsys):
    with capsys.disabled():
        print("\n[NOT RUN] C2 paper performance/ablation tables: need MoCA-Mask and backbone features; "
              "out of desk-scale scope, replaced by C3-C7")


# -------------------------------------------------------------- criterion 3


def test_c3_metric_oracles(capsys):
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(200):
        pred = rng.random((8, 8))
        gt = rng.random((8, 8)) < rng.uniform(0.05, 0.7)
        if not gt.any():
            gt[rng.integers(8), rng.integers(8)] = True
        pb = rng.random((8, 8)) < rng.uniform(0.0, 1.0)
        gl, pl, bl = gt.tolist(), pred.tolist(), pb.tolist()
        d, i = metrics.dice_iou(pb, gt)
        od, oi = oracles.dice_iou(bl, gl)
        diffs = [
            metrics.mae(pred, gt) - oracles.mae(pl, gt.astype(float).tolist()),
            d - od,
            i - oi,
            metrics.emeasure(pb, gt) - oracles.emeasure(bl, gl),
            metrics.wfm(pred, gt) - oracles.wfm(pl, gl),
        ]
        worst = max(worst, max(abs(x) for x in diffs))
    identities = True
    for _ in range(50):
        gt = rng.random((8, 8)) < rng.uniform(0.1, 0.9)
        if not gt.any() or gt.all():
            continue
        f = metrics.frame_metrics(gt.astype(float), gt)
        identities &= (f["wfm"], f["mae"], f["mdice"], f["miou"]) == (1.0, 0.0, 1.0, 1.0)
        # the pinned eps = 1e-8 keeps a perfect E-measure 1 - eps / (2 d^2) per pixel,
        # d >= min(fg, bg fraction) >= 1/64 on 8 x 8
        identities &= 1.0 - f["emeasure"] <= 1e-8 * 64**2 / 2
        identities &= metrics.dice_iou(~gt, gt) == (0.0, 0.0)
        d, i = metrics.dice_iou(rng.random((8, 8)) < 0.5, gt)
        identities &= d >= i
    ok = report(capsys, "C3 metric oracles", worst <= 1e-9 and identities,
                f"max |diff| {worst:.2e} over 200 instances, identities {'hold' if identities else 'broken'}",
                time.perf_counter() - t0, 10)
    assert ok


# -------------------------------------------------------------- criterion 4


def test_c4_tn_indexing(capsys):
    t0 = time.perf_counter()
    ok = sample_indices(10, TNCubeSpec(K=5, gap=2), 20) == [6, 8, 10, 12, 14]
    F = 37
    ok &= sample_indices(F - 1, TNCubeSpec(K=5, gap=1), F) == [F - 3, F - 2, F - 1, F - 2, F - 3]
    ok &= [reflect_index(i, 5) for i in (2, 3, 4, 5, 6)] == [2, 3, 4, 3, 2]
    rng = np.random.default_rng(4)
    for _ in range(5000):
        F = int(rng.integers(1, 80))
        K = int(rng.choice([1, 3, 5, 7, 9]))
        gap = int(rng.integers(1, 7))
        i = int(rng.integers(0, F))
        idx = sample_indices(i, TNCubeSpec(S=3, K=K, gap=gap), F)
        h = (K - 1) // 2
        ok &= idx[h] == i and all(0 <= j < F for j in idx)
        ok &= all(abs(j - i) <= abs(k - h) * gap for k, j in enumerate(idx))
        if i in (0, F - 1):
            ok &= idx == idx[::-1]
        if gap == 1 and h <= i <= F - 1 - h:
            ok &= idx == list(range(i - h, i + h + 1))
    ok = report(capsys, "C4 TN indexing", bool(ok), "paper examples + 5000 randomized cases",
                time.perf_counter() - t0, 5)
    assert ok


# -------------------------------------------------------------- criterion 5


def test_c5_gbdt_correctness(capsys):
    t0 = time.perf_counter()
    rng = np.random.default_rng(5)
    X = rng.normal(size=(2000, 6)).astype(np.float32)
    y = (X[:, 0] * X[:, 1] + X[:, 2] > 0).astype(int)
    m = gbdt.train(X, y, TrainConfig(n_trees=40, depth=4))
    monotone = bool(np.all(np.diff(m.history) <= 1e-12))

    x8 = np.arange(8, dtype=np.float32)[:, None]
    m8 = gbdt.train(x8, np.array([0, 0, 0, 1, 1, 1, 1, 1]),
                    TrainConfig(n_trees=1, depth=1, learning_rate=1.0, l2_lambda=1.0, min_child_weight=0.0))
    h = 15 / 64
    leaves = m8.trees[0].value[1:]
    leaf_err = max(abs(leaves[0] - (-(3 * 0.625) / (3 * h + 1))), abs(leaves[1] - (-(5 * -0.375) / (5 * h + 1))))

    split_err = 0.0
    for _ in range(150):
        n, d = int(rng.integers(2, 65)), int(rng.integers(1, 4))
        Xs = rng.integers(0, 8, size=(n, d)).astype(np.float32)
        p = rng.uniform(0.05, 0.95, n)
        ys = rng.integers(0, 2, n)
        lam = float(rng.uniform(0, 3))
        _, _, gain = gbdt.best_root_split(Xs, p - ys, p * (1 - p), TrainConfig(l2_lambda=lam, min_child_weight=0.0))
        ref = oracles.best_split_exhaustive(Xs.tolist(), (p - ys).tolist(), (p * (1 - p)).tolist(), lam)
        split_err = max(split_err, abs(gain - ref) / max(1.0, abs(ref)))

    Z = rng.normal(size=(1000, 6)).astype(np.float32)
    round_trip = np.array_equal(gbdt.predict_batch(m, Z), gbdt.predict_batch(gbdt.load(gbdt.save(m)), Z))
    ok = monotone and leaf_err <= 1e-6 and split_err <= 1e-9 and round_trip
    ok = report(capsys, "C5 GBDT correctness", ok,
                f"monotone={monotone}, leaf err {leaf_err:.1e}, split err {split_err:.1e}, round-trip={round_trip}",
                time.perf_counter() - t0, 30)
    assert ok


# -------------------------------------------------------------- criterion 6

N_SEQ, N_FRAMES = 8, 40
TRAIN, TEST = range(0, 4), range(4, 8)
SALT_RATE = 0.08


def _corrupt(vol, seed):
    # independent salt per frame: no temporal correlation
    rng = np.random.default_rng(seed)
    out = vol.copy()
    for f in range(len(out)):
        salt = rng.random(out[f].shape) < SALT_RATE
        out[f][salt] = rng.uniform(0.5, 1.0, salt.sum()).astype(np.float32)
    return out


def _mdice(vols, masks, seqs):
    pairs = {s: [(v, m) for v, m in zip(vols[s], masks[s])] for s in seqs}
    return metrics.evaluate_arrays(pairs).overall["mdice"]


@pytest.mark.slow
def test_c6_synthetic_ablation(capsys):
    t0 = time.perf_counter()
    rng = np.random.default_rng(6)
    provider = SyntheticFeatureProvider()
    feats, masks = {}, {}
    for s in range(N_SEQ):
        angle, speed = rng.uniform(0, 2 * np.pi), rng.uniform(0.5, 3.0)
        cfg = SynthConfig(name=f"s{s}", n_frames=N_FRAMES, gamma=0.6, noise=0.04,
                          velocity=(speed * np.sin(angle), speed * np.cos(angle)), seed=1000 + s)
        frames = list(synth_frames(cfg))
        masks[s] = [m for _, m in frames]
        feats[s] = pmap(lambda fm: provider.provide(fm[0]), frames, 1)

    cascade = train_cascade([(f, m) for s in TRAIN for f, m in zip(feats[s], masks[s])], CascadeConfig())
    stage1, stage4 = {}, {}
    for s in range(N_SEQ):
        maps = [infer_cascade(cascade, f, return_all=True) for f in feats[s]]
        stage1[s] = [m[0] for m in maps]
        stage4[s] = np.stack([m[3] for m in maps])
    d1, d4 = _mdice(stage1, masks, TEST), _mdice(stage4, masks, TEST)

    noisy = {s: _corrupt(stage4[s], 77 + s) for s in range(N_SEQ)}
    d_in = _mdice(noisy, masks, TEST)
    videos = [RefineVideo(noisy[s], feats[s], masks[s]) for s in TRAIN]
    cfg = TrainConfig(n_trees=150, depth=6, max_pixels_per_frame=150, seed=100)
    refined = {}
    for term, gap in (("short", 1), ("long", 3)):
        r = train_refiner(videos, term, TNCubeSpec(S=19, K=5, gap=gap), cfg)
        refined[term] = {s: refine_sequence(r, noisy[s], feats[s]) for s in TEST}
    fused = {s: np.stack([fuse(a, b) for a, b in zip(refined["short"][s], refined["long"][s])]) for s in TEST}
    d_s, d_l, d_f = (_mdice(refined["short"], masks, TEST), _mdice(refined["long"], masks, TEST),
                     _mdice(fused, masks, TEST))
    elapsed = time.perf_counter() - t0

    a = report(capsys, "C6a cascade stage-4 > stage-1", d4 > d1, f"held-out mDice {d4:.4f} vs {d1:.4f}", elapsed, 900)
    b = report(capsys, "C6b fused >= max(short, long) - 0.01", d_f >= max(d_s, d_l) - 0.01,
               f"fused {d_f:.4f}, short {d_s:.4f}, long {d_l:.4f}", elapsed, 900)
    c = report(capsys, "C6c refined > corrupted stage-1 volume", d_s > d_in and d_l > d_in,
               f"short {d_s:.4f}, long {d_l:.4f} vs corrupted input {d_in:.4f}", elapsed, 900)
    assert a and b and c


# -------------------------------------------------------------- criterion 7

DET_CONFIG = """
seed = 11

[paths]
data = "data"
models = "models"
maps = "maps"
out = "final"

[cascade]
n_trees = 12
depth = 3
max_pixels_per_frame = 200

[refine]
n_trees = 8
depth = 6
max_pixels_per_frame = 100

[synth]
n_sequences = 2
n_frames = 6
"""


def _files(root):
    return {p.relative_to(root).as_posix(): p.read_bytes()
            for p in sorted(root.rglob("*")) if p.is_file() and p.suffix in (".json", ".gvf", ".png")}


@pytest.mark.slow
def test_c7_determinism(capsys, tmp_path):
    t0 = time.perf_counter()
    runs = []
    for name, workers in (("a", "1"), ("b", "8")):
        root = tmp_path / name
        root.mkdir()
        (root / "run.toml").write_text(DET_CONFIG)
        for cmd in ("synth", "train-cascade", "predict", "train-refiners", "refine"):
            assert cli_main([cmd, "--config", str(root / "run.toml"), "--workers", workers]) == 0
        runs.append({sub: _files(root / sub) for sub in ("models", "maps", "final")})
    a, b = runs
    same = all(a[k] == b[k] for k in a) and all(a[k] for k in a)
    n = sum(len(v) for v in a.values())
    ok = report(capsys, "C7 determinism (--workers 1 vs 8)", same,
                f"{n} model/map files {'byte-identical' if same else 'DIFFER'}", time.perf_counter() - t0, 900)
    assert ok


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v", "-s"]))
