"""Command-line interface.

Exit codes: 0 on success, 1 on runtime failure, 2 on usage errors.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import harness
from .checkpoint import CheckpointError
from .config import ConfigError, load_config, parse_overrides
from .ontology import OntologyError
from .synthetic import SyntheticSpec, generate_synthetic_dataset

log = logging.getLogger("sitrec")


class UsageError(Exception):
    pass


def _emit(obj, out=None):
    text = json.dumps(obj, indent=1, sort_keys=True)
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text + "\n")
    else:
        print(text)


def cmd_gen_data(args):
    overrides = parse_overrides(args.set)
    fields = SyntheticSpec.__dataclass_fields__
    for key in overrides:
        if key not in fields:
            raise UsageError(f"unknown dataset option {key!r}")
    for key in ("n_verbs", "n_roles", "n_nouns", "frames_per_verb", "seed", "n_videos"):
        value = getattr(args, key)
        if value is not None:
            overrides[key] = value
    for key, value in overrides.items():
        if isinstance(value, list):
            overrides[key] = tuple(value)
    out = generate_synthetic_dataset(args.out, **overrides)
    print(f"wrote synthetic dataset to {out}")


def _config(args):
    overrides = parse_overrides(args.set)
    for key in ("model", "provider", "seed", "epochs"):
        value = getattr(args, key, None)
        if value is not None:
            overrides[key] = value
    return load_config(args.config, overrides, desk=not args.full_size)


def cmd_train(args):
    config = _config(args)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    ckpt = harness.train(config, args.data, args.out, resume=args.resume, log=lambda e: log.info(json.dumps(e)))
    last = ckpt.trace[-1] if ckpt.trace else {}
    print(f"checkpoint {ckpt.digest()} written to {args.out} (final loss {last.get('loss', float('nan')):.4f})")


def cmd_eval(args):
    rep = harness.evaluate(args.checkpoint, args.split, args.setting, data_dir=args.data, require_noun=not args.iou_only)
    _emit(rep.to_json(), args.out)


def cmd_summarize(args):
    ckpt = harness.load_checkpoint(args.checkpoint)
    ws = harness.workspace_for(ckpt, args.data)
    out = [harness.summarize(ref, ckpt, with_boxes=args.with_boxes, workspace=ws).to_json() for ref in args.image]
    _emit(out[0] if len(out) == 1 else out, args.out)


def cmd_decode_video(args):
    preds = harness.decode_videos(args.checkpoint, args.split, data_dir=args.data, limit=args.limit, max_len=args.max_len)
    _emit(preds, args.out)


def cmd_report(args):
    preds = json.loads(Path(args.predictions).read_text())
    ckpt_verbs = None
    if args.checkpoint:
        ckpt_verbs = harness.load_checkpoint(args.checkpoint).extra.get("video_verbs")
    _emit(harness.generation_report(preds, args.data, args.split, ckpt_verbs), args.out)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sitrec", description="Situation recognition from image and video embeddings.")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-data", help="write a planted synthetic dataset")
    g.add_argument("--out", required=True)
    g.add_argument("--seed", type=int)
    g.add_argument("--n-verbs", dest="n_verbs", type=int)
    g.add_argument("--n-roles", dest="n_roles", type=int)
    g.add_argument("--n-nouns", dest="n_nouns", type=int)
    g.add_argument("--frames-per-verb", dest="frames_per_verb", type=int)
    g.add_argument("--n-videos", dest="n_videos", type=int)
    g.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="any other generator option")
    g.set_defaults(func=cmd_gen_data)

    t = sub.add_parser("train", help="train a model and write a checkpoint directory")
    t.add_argument("--data", required=True)
    t.add_argument("--out", required=True)
    t.add_argument("--config", help="YAML config file")
    t.add_argument("--model", choices=("verb", "role", "mlp", "tf", "xtf", "stack", "video"))
    t.add_argument("--provider")
    t.add_argument("--seed", type=int)
    t.add_argument("--epochs", type=int)
    t.add_argument("--resume", help="checkpoint to continue from")
    t.add_argument("--full-size", action="store_true", help="start from full-size widths instead of desk-scale ones")
    t.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
    t.add_argument("-v", "--verbose", action="store_true")
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", help="score a checkpoint on a split")
    e.add_argument("--checkpoint", required=True)
    e.add_argument("--data", help="dataset directory (defaults to the one used for training)")
    e.add_argument("--split", default="test")
    e.add_argument("--setting", default="gt-verb", choices=sorted(harness.SETTING_ALIASES))
    e.add_argument("--iou-only", action="store_true", help="grounded metrics ignore noun correctness")
    e.add_argument("--out")
    e.set_defaults(func=cmd_eval)

    s = sub.add_parser("summarize", help="situational summary for one or more images")
    s.add_argument("--checkpoint", required=True)
    s.add_argument("--data")
    s.add_argument("--with-boxes", action="store_true")
    s.add_argument("--out")
    s.add_argument("image", nargs="+")
    s.set_defaults(func=cmd_summarize)

    v = sub.add_parser("decode-video", help="greedy-decode videos into VidSitu-style predictions")
    v.add_argument("--checkpoint", required=True)
    v.add_argument("--data")
    v.add_argument("--split", default="dev")
    v.add_argument("--limit", type=int)
    v.add_argument("--max-len", dest="max_len", type=int)
    v.add_argument("--out")
    v.set_defaults(func=cmd_decode_video)

    r = sub.add_parser("report", help="generation metrics for decoded videos")
    r.add_argument("--predictions", required=True)
    r.add_argument("--data", required=True)
    r.add_argument("--split", default="dev")
    r.add_argument("--checkpoint", help="take the verb vocabulary from this checkpoint")
    r.add_argument("--out")
    r.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        args.func(args)
    except (UsageError, ConfigError) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except (harness.TrainingError, harness.EvalError, harness.SummaryError, CheckpointError, OntologyError, FileNotFoundError, KeyError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
