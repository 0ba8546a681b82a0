"""``gvcod`` command-line interface.

    gvcod synth           --config run.toml
    gvcod train-cascade   --config run.toml
    gvcod predict         --config run.toml
    gvcod train-refiners  --config run.toml [--term short|long|both]
    gvcod refine          --config run.toml
    gvcod evaluate        --pred DIR --data DIR [--out report.json]
    gvcod account         [--paper-scale] [--out report.json]
    gvcod ablate          --config run.toml

Any failure exits with status 1 and prints one line,
``error: <code>: <detail>``, to stderr.
"""
import argparse
import json
import logging
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import complexity, pipeline
from .cascade import CascadeModel
from .config import load_config
from .dataset import SynthConfig, load_dataset, synth_generate
from .errors import GvcodError
from .metrics import METRICS, evaluate_dataset, format_table
from .refine import TERMS, RefinerModel

log = logging.getLogger("greenvcod")


def _parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path)
    common.add_argument("--data", type=Path)
    common.add_argument("--models", type=Path)
    common.add_argument("--maps", type=Path, help="stage-1 prediction maps directory")
    common.add_argument("--out", type=Path)
    common.add_argument("--seed", type=int)
    common.add_argument("--workers", type=int)
    common.add_argument("--gap-short", type=int)
    common.add_argument("--gap-long", type=int)
    common.add_argument("--cube-k", type=int)
    common.add_argument("--cube-s", type=int)
    common.add_argument("--term", choices=("short", "long", "both"), default="both")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="gvcod", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name in ("synth", "train-cascade", "predict", "train-refiners", "refine", "ablate"):
        sub.add_parser(name, parents=[common])
    ev = sub.add_parser("evaluate", parents=[common])
    ev.add_argument("--pred", type=Path, required=True)
    acc = sub.add_parser("account", parents=[common])
    acc.add_argument("--paper-scale", action="store_true")
    return p


def _settings(args):
    cfg = load_config(args.config)
    for flag, attr in (("data", "data"), ("models", "models"), ("maps", "maps"), ("out", "out"),
                       ("seed", "seed"), ("workers", "workers"), ("gap_short", "gap_short"),
                       ("gap_long", "gap_long"), ("cube_k", "cube_k"), ("cube_s", "cube_s")):
        value = getattr(args, flag, None)
        if value is not None:
            setattr(cfg, attr, value)
    if cfg.workers < 1:
        raise GvcodError("--workers must be >= 1")
    return cfg


def _terms(args):
    return TERMS if args.term == "both" else (args.term,)


def cmd_synth(args, cfg):
    s = cfg.synth
    rng = np.random.default_rng(cfg.seed)
    with pipeline.staged_output(cfg.data) as tmp:
        for i in range(s.n_sequences):
            angle = rng.uniform(0, 2 * np.pi)
            speed = rng.uniform(0.5, s.max_speed)
            sc = SynthConfig(
                name=f"seq{i:03d}", n_frames=s.n_frames, height=s.height, width=s.width,
                axes=tuple(s.axes), velocity=(speed * np.sin(angle), speed * np.cos(angle)),
                gamma=s.gamma, noise=s.noise, seed=int(rng.integers(2**31)),
            )
            synth_generate(sc, tmp)
    print(f"wrote {s.n_sequences} sequences to {cfg.data}")


def cmd_train_cascade(args, cfg):
    seqs = load_dataset(cfg.data)
    model = pipeline.train_cascade_on(seqs, cfg.features, cfg.cascade_config(), cfg.workers)
    cfg.models.mkdir(parents=True, exist_ok=True)
    with pipeline.staged_output(cfg.models / "cascade") as tmp:
        model.save(tmp)
    print(f"wrote cascade ({model.channels} feature channels) to {cfg.models / 'cascade'}")


def cmd_predict(args, cfg):
    seqs = load_dataset(cfg.data, require_masks=False)
    model = CascadeModel.load(cfg.models / "cascade")
    n = 0
    with pipeline.staged_output(cfg.maps) as tmp:
        for seq in seqs:
            feats = pipeline.sequence_features(seq, cfg.features, cfg.workers)
            pipeline.write_maps(tmp, seq, pipeline.predict_volume(model, feats, cfg.workers))
            n += len(seq)
    print(f"wrote {n} prediction maps to {cfg.maps}")


def cmd_train_refiners(args, cfg):
    seqs = load_dataset(cfg.data)
    videos = pipeline.refine_videos(seqs, cfg.maps, cfg.features, cfg.workers)
    refiners = pipeline.train_refiners(videos, _terms(args), cfg, cfg.workers)
    cfg.models.mkdir(parents=True, exist_ok=True)
    # models are only written once both refiners are trained
    with tempfile.TemporaryDirectory(dir=cfg.models) as tmp:
        for r in refiners.values():
            r.save(tmp)
        for f in sorted(Path(tmp).iterdir()):
            f.replace(cfg.models / f.name)
    print(f"wrote {', '.join(refiners)} refiner(s) to {cfg.models}")


def cmd_refine(args, cfg):
    seqs = load_dataset(cfg.data, require_masks=False)
    refiners = {t: RefinerModel.load(cfg.models, t) for t in TERMS}
    with pipeline.staged_output(cfg.out) as tmp:
        for seq in seqs:
            video = pipeline.refine_videos([seq], cfg.maps, cfg.features, cfg.workers, with_masks=False)[0]
            outs = pipeline.refine_outputs(video, refiners, cfg.workers)
            pipeline.write_final(tmp, seq, outs["short"], outs["long"], cfg.ensemble)
    print(f"wrote short, long and fused maps to {cfg.out}")


def cmd_evaluate(args, cfg):
    report = evaluate_dataset(args.pred, cfg.data)
    sys.stdout.write(report.to_table())
    if args.out is not None:
        Path(args.out).write_text(report.to_json())


def cmd_account(args, cfg):
    if args.paper_scale:
        rep = complexity.paper_report()
    else:
        shape = complexity.PipelineShape(
            cascade_resolutions=cfg.resolutions,
            cascade_trees=(cfg.cascade_train.n_trees,) * 4,
            cascade_depths=(cfg.cascade_train.depth,) * 4,
            refiner_trees={t: cfg.refine_train.n_trees for t in TERMS},
            refiner_depths={t: cfg.refine_train.depth for t in TERMS},
        )
        rep = complexity.report(shape)
    sys.stdout.write(rep.to_text())
    sys.stdout.write("\n" + rep.to_json())
    if args.out is not None:
        Path(args.out).write_text(rep.to_json())


def cmd_ablate(args, cfg):
    pred_root = args.out if args.out is not None else cfg.out
    rows = []
    overall = {}
    for kind, label in (("short", "Short-Term"), ("long", "Long-Term"), ("fused", "Ensemble")):
        rep = evaluate_dataset(Path(pred_root) / kind, cfg.data)
        overall[kind] = rep.overall
        rows.append([label] + [rep.overall[k] for k in METRICS])
    sys.stdout.write(format_table(["variant", "wFm", "Ephi", "MAE", "mDice", "mIoU"], rows))
    (Path(pred_root) / "ablation.json").write_text(json.dumps(overall, indent=2, sort_keys=True) + "\n")


COMMANDS = {
    "synth": cmd_synth,
    "train-cascade": cmd_train_cascade,
    "predict": cmd_predict,
    "train-refiners": cmd_train_refiners,
    "refine": cmd_refine,
    "evaluate": cmd_evaluate,
    "account": cmd_account,
    "ablate": cmd_ablate,
}


def main(argv=None):
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        cfg = _settings(args)
        COMMANDS[args.command](args, cfg)
    except GvcodError as exc:
        print(f"error: {exc.code}: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"error: not_found: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: io: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
