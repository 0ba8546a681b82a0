import numpy as np
import pytest
from PIL import Image

from greenvcod import dataset
from greenvcod.dataset import SynthConfig, ellipse_mask, load_dataset, synth_frames, synth_generate
from greenvcod.errors import DataError


def _small(**kw):
    return SynthConfig(**{"n_frames": 3, "height": 24, "width": 32, "axes": (5.0, 7.0), **kw})


def test_load_two_sequences(tmp_path):
    for name in ("b", "a"):
        synth_generate(_small(name=name), tmp_path)
    seqs = load_dataset(tmp_path)
    assert [s.name for s in seqs] == ["a", "b"]
    assert [len(s) for s in seqs] == [3, 3]
    assert seqs[0].frame_size == (24, 32)
    assert seqs[0].stems == ["00000", "00001", "00002"]


def test_count_mismatch(tmp_path):
    synth_generate(_small(name="a"), tmp_path)
    (tmp_path / "a" / "gt" / "00002.png").unlink()
    with pytest.raises(DataError, match="3 frames but 2 masks"):
        load_dataset(tmp_path)


def test_empty_root(tmp_path):
    with pytest.raises(DataError, match="no sequences found"):
        load_dataset(tmp_path)


def test_undecodable_image_named(tmp_path):
    synth_generate(_small(name="a"), tmp_path)
    bad = tmp_path / "a" / "gt" / "00001.png"
    bad.write_bytes(b"not a png")
    seq = load_dataset(tmp_path)[0]
    with pytest.raises(DataError, match="00001.png"):
        seq.mask(1)


def test_masks_binarised_at_128(tmp_path):
    p = tmp_path / "m.png"
    Image.fromarray(np.array([[0, 127, 128, 255]], np.uint8), mode="L").save(p)
    assert dataset.read_mask(p).tolist() == [[0, 0, 1, 1]]


def test_gamma_one_object_matches_background():
    cfg = SynthConfig(n_frames=1, gamma=1.0, noise=0.0, velocity=(0, 0), seed=3)
    cfg0 = SynthConfig(n_frames=1, gamma=0.0, noise=0.0, velocity=(0, 0), seed=3)
    (img, mask), = synth_frames(cfg)
    (img0, _), = synth_frames(cfg0)
    m = mask > 0
    # gamma = 1: the object is cut from the background itself
    assert abs(img[m].mean() - img[~m].mean()) < 6
    assert abs(img0[m].astype(float).mean(0) - img[~m].astype(float).mean(0)).max() > 15
    assert m.any()


def test_static_object_keeps_mask():
    masks = [m for _, m in synth_frames(_small(velocity=(0.0, 0.0), n_frames=4))]
    assert all(np.array_equal(masks[0], m) for m in masks)


def test_same_seed_same_bytes(tmp_path):
    synth_generate(_small(name="a", seed=5), tmp_path / "x")
    synth_generate(_small(name="a", seed=5), tmp_path / "y")
    for sub in ("frames", "gt"):
        for p in sorted((tmp_path / "x" / "a" / sub).iterdir()):
            assert p.read_bytes() == (tmp_path / "y" / "a" / sub / p.name).read_bytes()


def test_round_trip_mask_area(tmp_path):
    cfg = _small(n_frames=5, velocity=(2.5, -3.0), start=(3.0, 30.0))
    seq = synth_generate(cfg, tmp_path)
    for t in range(5):
        c = (cfg.start[0] + t * cfg.velocity[0]) % cfg.height, (cfg.start[1] + t * cfg.velocity[1]) % cfg.width
        expect = ellipse_mask(cfg.height, cfg.width, c, cfg.axes)
        assert seq.mask(t).sum() == expect.sum()
        assert np.array_equal(seq.mask(t), expect)


def test_config_validation():
    with pytest.raises(DataError):
        SynthConfig(n_frames=0)
    with pytest.raises(DataError):
        SynthConfig(gamma=1.5)
