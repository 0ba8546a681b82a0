import json

import numpy as np
import pytest

from greenvcod import gvf
from greenvcod.cli import main
from greenvcod.dataset import read_gray

CONFIG = """
seed = 3
workers = 2

[paths]
data = "data"
models = "models"
maps = "maps"
out = "final"

[cascade]
n_trees = 4
depth = 2
max_pixels_per_frame = 100

[refine]
S = 5
K = 3
gap_long = 2
n_trees = 4
depth = 3
max_pixels_per_frame = 80

[synth]
n_sequences = 2
n_frames = 3
height = 40
width = 48
axes = [8.0, 10.0]
"""


@pytest.fixture(scope="module")
def run(tmp_path_factory):
    root = tmp_path_factory.mktemp("run")
    (root / "run.toml").write_text(CONFIG)
    cfg = str(root / "run.toml")
    for cmd in ("synth", "train-cascade", "predict", "train-refiners", "refine"):
        assert main([cmd, "--config", cfg]) == 0, cmd
    return root, cfg


def test_pipeline_outputs(run):
    root, _ = run
    assert sorted(p.name for p in (root / "models").iterdir() if not p.name.startswith(".")) == [
        "cascade", "refiner_long.json", "refiner_long.spec.json", "refiner_short.json", "refiner_short.spec.json"]
    spec = json.loads((root / "models" / "refiner_long.spec.json").read_text())
    assert spec == {"S": 5, "K": 3, "GAP": 2, "C": 26}
    t = gvf.read(root / "maps" / "seq000" / "00000.gvf")
    assert t.shape == (168, 168, 1)
    for kind in ("short", "long", "fused", "fused_binary"):
        img = read_gray(root / "final" / kind / "seq001" / "00002.png")
        assert img.shape == (40, 48)
    assert set(np.unique(read_gray(root / "final" / "fused_binary" / "seq000" / "00000.png"))) <= {0, 255}


def test_evaluate_and_ablate(run, capsys):
    root, cfg = run
    assert main(["evaluate", "--config", cfg, "--pred", str(root / "final" / "fused"), "--out", str(root / "rep.json")]) == 0
    doc = json.loads((root / "rep.json").read_text())
    assert set(doc["overall"]) == {"wfm", "emeasure", "mae", "mdice", "miou"}
    assert main(["ablate", "--config", cfg]) == 0
    out = capsys.readouterr().out
    assert "Short-Term" in out and "Long-Term" in out and "Ensemble" in out
    assert set(json.loads((root / "final" / "ablation.json").read_text())) == {"short", "long", "fused"}


def test_evaluate_gt_against_itself(run, capsys):
    root, cfg = run
    assert main(["evaluate", "--config", cfg, "--pred", str(root / "data")]) == 0
    last = capsys.readouterr().out.strip().splitlines()[-1].split()
    assert last == ["overall", "1.00000", "1.00000", "0.00000", "1.00000", "1.00000"]


def test_flag_overrides_config(run, tmp_path):
    _, cfg = run
    assert main(["synth", "--config", cfg, "--data", str(tmp_path / "d"), "--seed", "9"]) == 0
    assert sorted(p.name for p in (tmp_path / "d").iterdir() if p.is_dir()) == ["seq000", "seq001"]


def test_account(capsys, tmp_path):
    assert main(["account", "--paper-scale", "--out", str(tmp_path / "a.json")]) == 0
    out = capsys.readouterr().out
    assert "19,902,216" in out and "17,426,582,880" in out
    assert json.loads((tmp_path / "a.json").read_text())["total_macs"] == 17_426_582_880
    assert main(["account"]) == 0


def test_errors_are_one_line(tmp_path, capsys):
    assert main(["train-cascade", "--data", str(tmp_path / "missing"), "--models", str(tmp_path / "m")]) == 1
    err = capsys.readouterr().err.strip().splitlines()
    assert len(err) == 1 and err[0].startswith("error: not_found: ")
    assert main(["account", "--config", str(tmp_path / "nope.toml")]) == 1
    assert capsys.readouterr().err.startswith("error: not_found: ")
    (tmp_path / "bad.toml").write_text("[cascade]\nwidth = 3\n")
    assert main(["account", "--config", str(tmp_path / "bad.toml")]) == 1
    assert capsys.readouterr().err.startswith("error: config: ")
    assert main(["predict", "--workers", "0"]) == 1


def test_refuses_to_overwrite_foreign_directory(tmp_path, capsys):
    (tmp_path / "data").mkdir()
    (tmp_path / "data" / "keep.txt").write_text("mine")
    assert main(["synth", "--data", str(tmp_path / "data")]) == 1
    assert "error: exists" in capsys.readouterr().err
    assert (tmp_path / "data" / "keep.txt").read_text() == "mine"
