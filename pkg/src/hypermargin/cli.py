"""Command-line driver: ``gen``, ``train``, ``eval`` and ``kappa`` subcommands.

Exit status is 0 on success, 1 on invalid input (configuration, data or
checkpoint), 2 on runtime failure.
"""
import argparse
import csv
import json
import logging
import os
import sys

import numpy as np

from . import __version__
from .bench import generate, split_sizes
from .config import config_text, load_config
from .errors import (
    CheckpointError, ConfigurationError, DataParseError, MarginError, MissingClassError,
    ParameterError, ShapeError,
)
from .geometry import adaptive_margin, voronoi_apex_angle
from .metrics import evaluate
from .prototypes import classify
from .sphere import normalize_rows
from .storage import (
    atomic_write, checkpoint_bytes, checkpoint_from_result, embeddings_csv_text,
    load_checkpoint, read_embeddings_csv, report_text, trace_csv_text,
)
from .trainer import embed, train
from .vmf import apex_angle_approx, estimate_kappa

log = logging.getLogger("hypermargin")

VALIDATION_ERRORS = (ConfigurationError, DataParseError, ShapeError, CheckpointError,
                     MissingClassError, ParameterError)
SPLITS = ("train", "val", "test")


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(f"{self.prog}: {message}")


def _require_config(args):
    if not args.config:
        raise ConfigurationError("this command needs --config PATH", key="config")
    cfg = load_config(args.config)
    return cfg.with_overrides(seed=args.seed, out_dir=args.out)


def _out_dir(path):
    os.makedirs(path, exist_ok=True)
    return path


def cmd_gen(args):
    cfg = _require_config(args)
    spec = cfg.bench_spec()
    ds = generate(spec)
    out = _out_dir(cfg.out_dir)
    for name in SPLITS:
        part = ds.split(name)
        atomic_write(os.path.join(out, f"{name}.csv"), embeddings_csv_text(part.x, part.y))
    manifest = {
        "seed": spec.seed,
        "n_classes": spec.n_classes,
        "d_embed": spec.d_embed,
        "d_ambient": spec.d_ambient,
        "counts": list(spec.counts),
        "kappas": list(spec.kappas),
        "noise_sigma": spec.noise_sigma,
        "lift": spec.lift,
        "imbalance_ratio": spec.imbalance_ratio,
        "split_sizes": {name: [split_sizes(n)[i] for n in spec.counts]
                        for i, name in enumerate(SPLITS)},
        "files": [f"{name}.csv" for name in SPLITS],
        "config": config_text(cfg),
    }
    atomic_write(os.path.join(out, "manifest.json"), json.dumps(manifest, indent=2) + "\n")
    print(f"wrote {', '.join(manifest['files'])} and manifest.json to {out}")
    return 0


def _load_split(data_dir, name):
    x, y = read_embeddings_csv(os.path.join(data_dir, f"{name}.csv"))
    return x, y


def cmd_train(args):
    from .bench import Dataset, Split

    cfg = _require_config(args)
    splits = {}
    for name in SPLITS:
        path = os.path.join(args.data, f"{name}.csv")
        if name == "test" and not os.path.exists(path):
            continue
        splits[name] = Split(*_load_split(args.data, name))
    d_in = splits["train"].x.shape[1]
    for name, part in splits.items():
        if part.x.shape[1] != d_in:
            raise ShapeError(f"{name}.csv has {part.x.shape[1]} columns, train.csv has {d_in}")
        if part.y.max() >= cfg.n_classes:
            raise ShapeError(f"{name}.csv has label {part.y.max()} but n_classes={cfg.n_classes}")
    dirs = np.full((cfg.n_classes, cfg.d_embed), np.nan)
    ds = Dataset(splits["train"], splits["val"], splits.get("test", splits["val"]),
                 dirs, np.full(cfg.n_classes, np.nan), np.empty((0, 0)))

    out = _out_dir(cfg.out_dir)
    every = cfg.checkpoint_every

    def periodic(result):
        epoch = len(result.traces)
        if every and epoch % every == 0 and epoch != cfg.epochs:
            atomic_write(os.path.join(out, f"checkpoint_epoch{epoch}.mrgn"),
                         checkpoint_bytes(checkpoint_from_result(result)))

    result = train(ds, cfg.train_config(), epoch_callback=periodic if every else None)
    atomic_write(os.path.join(out, "checkpoint.mrgn"), checkpoint_bytes(checkpoint_from_result(result)))
    atomic_write(os.path.join(out, "trace.csv"), trace_csv_text(result.traces, cfg.n_classes))
    last = result.traces[-1]
    print(f"trained {cfg.epochs} epochs ({cfg.mode}); final loss {last.train_loss:.6f}, "
          f"val macro FNR+FPR {last.metrics.macro_fnr_plus_fpr:.4f}")
    return 0


def evaluate_checkpoint(ckpt, x, y, nonvul_class=0):
    """Metrics report text for raw inputs ``x`` under checkpoint ``ckpt``."""
    if x.shape[1] != ckpt.encoder.d_in:
        raise ShapeError(f"data has {x.shape[1]} columns but the checkpoint encoder expects "
                         f"{ckpt.encoder.d_in}")
    C = ckpt.n_classes
    if y.max() >= C:
        raise ShapeError(f"data has label {y.max()} but the checkpoint has {C} classes")
    e = embed(ckpt.encoder, x)
    record, cm = evaluate(y, classify(e, ckpt.median_prototypes), e, C, nonvul_class)
    return report_text(record, cm)


def cmd_eval(args):
    ckpt = load_checkpoint(args.checkpoint)
    path = args.data
    if os.path.isdir(path):
        path = os.path.join(path, f"{args.split}.csv")
    x, y = read_embeddings_csv(path)
    text = evaluate_checkpoint(ckpt, x, y, args.nonvul_class)
    if args.out:
        atomic_write(os.path.join(_out_dir(args.out), "report.json"), text)
    sys.stdout.write(text)
    return 0


def kappa_rows(x, y, alpha=0.95):
    """Per-class geometry rows for the ``kappa`` command.

    Returns ``(rows, notices)``; each row is a dict with class, count,
    r_bar, kappa, theta_vmf and margin (``None`` when undefined).
    """
    e = normalize_rows(x)
    d = e.shape[1]
    classes = np.unique(y)
    notices = []
    rows = []
    for c in classes:
        members = e[y == c]
        if members.shape[0] < 2:
            notices.append(f"warning: class {c} has {members.shape[0]} row; kappa is clamped")
        _, kappa = estimate_kappa(members, d)
        r_bar = float(np.linalg.norm(members.mean(axis=0)))
        rows.append({"class": int(c), "count": int(members.shape[0]), "r_bar": r_bar,
                     "kappa": kappa, "theta_vmf": apex_angle_approx(kappa, d, alpha),
                     "margin": None})
    if classes.size < 2:
        notices.append("notice: single class; the Voronoi apex angle is undefined, margins omitted")
    else:
        theta_cell = voronoi_apex_angle(classes.size)
        theta_min = min(r["theta_vmf"] for r in rows)
        for r in rows:
            r["margin"] = adaptive_margin(r["theta_vmf"], theta_cell, theta_min)
    return rows, notices


def cmd_kappa(args):
    x, y = read_embeddings_csv(args.data)
    rows, notices = kappa_rows(x, y, args.alpha)
    for msg in notices:
        print(msg, file=sys.stderr)
    w = csv.writer(sys.stdout, lineterminator="\n")
    cols = ["class", "count", "r_bar", "kappa", "theta_vmf", "margin"]
    w.writerow(cols)
    for r in rows:
        w.writerow([r["class"], r["count"]] + [
            "" if r[k] is None else format(r[k], ".10g") for k in cols[2:]])
    return 0


def build_parser():
    common = _Parser(add_help=False)
    common.add_argument("--config", metavar="PATH", default=argparse.SUPPRESS)
    common.add_argument("--seed", metavar="N", type=int, default=argparse.SUPPRESS)
    common.add_argument("--out", metavar="DIR", default=argparse.SUPPRESS)
    common.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS)

    p = _Parser(prog="hypermargin", parents=[common],
                description="Imbalance-aware hyperspherical margin learning.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("gen", parents=[common], help="generate a synthetic benchmark")
    g.set_defaults(func=cmd_gen)

    t = sub.add_parser("train", parents=[common], help="train on a generated dataset")
    t.add_argument("--data", required=True, metavar="DIR",
                   help="directory holding train.csv and val.csv (test.csv optional)")
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", parents=[common], help="evaluate a checkpoint")
    e.add_argument("--checkpoint", required=True, metavar="PATH")
    e.add_argument("--data", required=True, metavar="PATH",
                   help="embedding CSV, or a dataset directory combined with --split")
    e.add_argument("--split", choices=SPLITS, default="test")
    e.add_argument("--nonvul-class", type=int, default=0)
    e.set_defaults(func=cmd_eval)

    k = sub.add_parser("kappa", parents=[common], help="per-class concentration report")
    k.add_argument("data", metavar="CSV")
    k.add_argument("--alpha", type=float, default=0.95)
    k.set_defaults(func=cmd_kappa)
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    for name in ("config", "seed", "out", "verbose"):
        if not hasattr(args, name):
            setattr(args, name, None)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except VALIDATION_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (MarginError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
