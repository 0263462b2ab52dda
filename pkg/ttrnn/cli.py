"""
ttrnn command line: plan, gen-data, train, eval and ingest.

Exit codes: 0 success, 2 configuration error, 3 data/format error,
4 numeric divergence.
"""
import argparse
import logging
import os
import sys

import numpy as np

from ttrnn.cells import parse_kind
from ttrnn.checkpoint import load_checkpoint
from ttrnn.config import config_keys, load_run_config
from ttrnn.data import (
    MotionClasses,
    dataset_bytes,
    generate_synthetic,
    ingest_frames,
    read_dataset,
    write_dataset,
)
from ttrnn.errors import ArgumentError, ConfigError, FormatError, ShapeError, TTRNNError
from ttrnn.metrics import per_class_accuracy, per_class_average_precision, predicted_classes
from ttrnn.train import CHECKPOINT, METRICS_LOG, evaluate, fit
from ttrnn.tt_layer import (
    TTShape,
    compression_rate,
    dense_param_count,
    parse_factors,
    tt_param_count,
    validate_shape,
)

logger = logging.getLogger("ttrnn")


def format_rate(rate):
    return f"{float(rate):.3e} ({rate.numerator}/{rate.denominator})"


def plan_rows(shape, cell):
    """
    (label, value) rows of the parameter accounting for one cell kind.
    """
    validate_shape(shape)
    kind, _ = parse_kind(cell)
    c = {"srnn": 1, "mlp": 1, "gru": 3, "lstm": 4}[kind]
    return [
        ("cell", f"{cell} ({c} gate{'s' if c > 1 else ''})"),
        ("input size M", f"{shape.M} = {'x'.join(map(str, shape.m))}"),
        ("hidden size N", f"{shape.N} = {'x'.join(map(str, shape.n))}"),
        ("ranks", ",".join(map(str, shape.ranks))),
        ("dense params", dense_param_count(shape, 1)),
        ("dense params (gates)", dense_param_count(shape, c)),
        ("tt params (vanilla)", c * tt_param_count(shape, 1)),
        ("tt params (fused)", tt_param_count(shape, c)),
        ("rate r", format_rate(compression_rate(shape, 1))),
        ("rate r* (fused)", format_rate(compression_rate(shape, c))),
    ]


def rank_sweep_rows(m, n, ranks=(3, 4, 5)):
    """
    TTL / vanilla / fused parameter counts for uniform interior ranks.
    """
    rows = []
    for r in ranks:
        shape = TTShape(m, n, (1,) + (r,) * (len(m) - 1) + (1,))
        rows.append((r, tt_param_count(shape, 1),
                     4 * tt_param_count(shape, 1), tt_param_count(shape, 4),
                     3 * tt_param_count(shape, 1), tt_param_count(shape, 3)))
    return rows


def cmd_plan(args):
    shape = TTShape(parse_factors(args.input_factors), parse_factors(args.hidden_factors),
                    parse_factors(args.ranks))
    for label, value in plan_rows(shape, args.cell):
        print(f"{label:<22}{value}")
    if args.rank_sweep:
        print()
        print("rank\tTTL\tTT-LSTM\tTT-LSTM*\tTT-GRU\tTT-GRU*")
        for row in rank_sweep_rows(shape.m, shape.n):
            print("\t".join(str(v) for v in row))
    return 0


def _require_empty(path, force):
    if os.path.isdir(path) and os.listdir(path):
        if not force:
            raise ArgumentError(f"{path} exists and is not empty (use --force)")
        for name in os.listdir(path):
            target = os.path.join(path, name)
            if os.path.isfile(target):
                os.remove(target)


def _frame_size(text):
    dims = parse_factors(text)
    if len(dims) == 1:
        dims = dims * 2
    if len(dims) != 2:
        raise ArgumentError(f"Frame size must be H or HxW, got {text!r}")
    return dims


def cmd_gen_data(args):
    if args.classes != len(MotionClasses):
        raise ArgumentError(f"The synthetic motion task has exactly {len(MotionClasses)} classes")
    _require_empty(args.out, args.force)
    height, width = _frame_size(args.frame_size)
    ds = generate_synthetic(
        args.per_class, (args.t_min, args.t_max), height, width, args.channels,
        args.noise, args.seed, square=args.square, progress=args.progress)
    write_dataset(ds, args.out)
    print(f"records {len(ds)}")
    print(f"bytes {dataset_bytes(args.out)}")
    return 0


def cmd_ingest(args):
    _require_empty(args.out, args.force)
    height, width = _frame_size(args.frame_size)
    ds = ingest_frames(args.src, args.out, height, width, progress=args.progress)
    print(f"records {len(ds)}")
    print(f"bytes {dataset_bytes(args.out)}")
    return 0


def cmd_train(args):
    overrides = {
        "cell": args.cell, "input_factors": args.input_factors,
        "hidden_factors": args.hidden_factors, "ranks": args.ranks, "data": args.data,
        "val_data": args.val_data, "out": args.out, "epochs": args.epochs,
        "batch_size": args.batch_size, "learning_rate": args.lr, "dropout": args.dropout,
        "ridge": args.ridge, "seed": args.seed, "mlp_frames": args.mlp_frames,
    }
    cfg = load_run_config(args.config, overrides)
    if not cfg.data:
        raise ConfigError("No dataset given (data= in the config or --data)")
    cfg.validate()
    dataset = read_dataset(cfg.data)
    val_dataset = read_dataset(cfg.val_data) if cfg.val_data else None
    if len(dataset) == 0:
        raise ConfigError(f"{cfg.data} holds no records")
    cfg.validate(frame_size=dataset.frame_size)
    if val_dataset is not None and val_dataset.frame_shape != dataset.frame_shape:
        raise ConfigError(
            f"Validation frames {val_dataset.frame_shape} differ from training frames {dataset.frame_shape}")

    model = cfg.build_model(dataset.frame_size, dataset.n_classes, dataset.label_mode)
    print(f"cell {model.cell.name}")
    print(f"params {model.param_count()}")
    print(f"input params {model.cell.input_param_count()}")
    _, log = fit(model, dataset, cfg.train, val_dataset=val_dataset, out_dir=cfg.out,
                 progress=args.progress, timestamps=args.timestamps)
    best = max(log, key=lambda r: r.metric_value)
    print(f"best {best.metric_name} {best.metric_value:.4f} (epoch {best.epoch})")
    print(f"checkpoint {os.path.join(cfg.out, CHECKPOINT)}")
    print(f"log {os.path.join(cfg.out, METRICS_LOG)}")
    return 0


def cmd_eval(args):
    state = load_checkpoint(args.checkpoint)
    dataset = read_dataset(args.data)
    model = state.model
    if len(dataset) == 0:
        raise ArgumentError(f"{args.data} holds no records")
    if model.cell.input_size != dataset.frame_size:
        raise ShapeError(
            f"Checkpoint expects frames of size {model.cell.input_size}, "
            f"dataset {args.data} has {dataset.frame_size} = {'x'.join(map(str, dataset.frame_shape))}")
    expected_mode = "single" if model.mode == "softmax" else "multi"
    if dataset.label_mode != expected_mode or dataset.n_classes != model.clf.n_classes:
        raise ShapeError(
            f"Checkpoint classifies {model.clf.n_classes} classes ({model.mode}), "
            f"dataset has {dataset.n_classes} classes ({dataset.label_mode}-label)")
    name, value, scores = evaluate(model, dataset)
    print(f"{name} {value:.4f}")
    if args.per_class:
        if dataset.label_mode == "single":
            per_class = per_class_accuracy(predicted_classes(scores), dataset.labels(), dataset.n_classes)
        else:
            per_class = per_class_average_precision(scores, dataset.labels())
        for cls, v in zip(dataset.class_names, per_class):
            print(f"  {cls:<20}{'n/a' if np.isnan(v) else f'{v:.4f}'}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="ttrnn", description="Tensor-Train recurrent networks for frame-sequence classification")
    parser.add_argument("-v", "--verbose", action="store_true", help="Log progress messages")
    sub = parser.add_subparsers(dest="command", required=True)

    plan = sub.add_parser("plan", help="Print parameter counts and compression rates")
    plan.add_argument("-i", "--input-factors", required=True, help="Input factors, e.g. 8,20,20,18")
    plan.add_argument("-hf", "--hidden-factors", required=True, help="Hidden factors, e.g. 4,4,4,4")
    plan.add_argument("-r", "--ranks", required=True, help="TT ranks, e.g. 1,4,4,4,1")
    plan.add_argument("-c", "--cell", default="tt-lstm", help="Cell kind (default tt-lstm)")
    plan.add_argument("--rank-sweep", action="store_true",
                      help="Also print the rank 3/4/5 comparison for these factors")
    plan.set_defaults(func=cmd_plan)

    gen = sub.add_parser("gen-data", help="Generate the synthetic motion dataset")
    gen.add_argument("-o", "--out", required=True, help="Output dataset directory")
    gen.add_argument("--classes", type=int, default=4, help="Number of classes (only 4)")
    gen.add_argument("-n", "--per-class", type=int, default=100, help="Sequences per class")
    gen.add_argument("-fs", "--frame-size", default="16", help="Frame size H or HxW (default 16)")
    gen.add_argument("--channels", type=int, default=3, help="Channels per frame (default 3)")
    gen.add_argument("--t-min", type=int, default=8, help="Shortest sequence (default 8)")
    gen.add_argument("--t-max", type=int, default=16, help="Longest sequence (default 16)")
    gen.add_argument("--noise", type=float, default=0.05, help="Noise standard deviation")
    gen.add_argument("--square", type=int, default=4, help="Side of the moving square")
    gen.add_argument("-s", "--seed", type=int, default=7, help="Make the generation deterministic.")
    gen.add_argument("-f", "--force", action="store_true", help="Overwrite a non-empty directory")
    gen.set_defaults(func=cmd_gen_data)

    ingest = sub.add_parser("ingest", help="Convert pre-extracted frame images to a dataset")
    ingest.add_argument("--src", required=True, help="Directory of per-sequence image folders")
    ingest.add_argument("-o", "--out", required=True, help="Output dataset directory")
    ingest.add_argument("-fs", "--frame-size", required=True, help="Target frame size HxW")
    ingest.add_argument("-f", "--force", action="store_true", help="Overwrite a non-empty directory")
    ingest.set_defaults(func=cmd_ingest)

    train = sub.add_parser("train", help="Train a classifier",
                           epilog="Config keys: " + ", ".join(config_keys()))
    train.add_argument("--config", help="key=value configuration file")
    train.add_argument("-c", "--cell", help="srnn, gru, lstm, mlp or their tt- variants")
    train.add_argument("-i", "--input-factors")
    train.add_argument("-hf", "--hidden-factors")
    train.add_argument("-r", "--ranks")
    train.add_argument("-d", "--data", help="Training dataset directory")
    train.add_argument("--val-data", help="Separate validation dataset directory")
    train.add_argument("-o", "--out", help="Output directory for checkpoint and log")
    train.add_argument("-e", "--epochs", type=int)
    train.add_argument("-b", "--batch-size", type=int)
    train.add_argument("--lr", type=float)
    train.add_argument("--dropout", type=float)
    train.add_argument("--ridge", type=float)
    train.add_argument("-s", "--seed", type=int)
    train.add_argument("--mlp-frames", type=int, help="Frames sampled by the (tt-)mlp baseline")
    train.add_argument("--timestamps", action="store_true", help="Add timestamps to the metrics log")
    train.set_defaults(func=cmd_train)

    ev = sub.add_parser("eval", help="Evaluate a checkpoint on a dataset")
    ev.add_argument("-k", "--checkpoint", required=True)
    ev.add_argument("-d", "--data", required=True)
    ev.add_argument("--per-class", action="store_true", help="Also print per-class scores")
    ev.set_defaults(func=cmd_eval)

    for p in (gen, ingest, train):
        p.add_argument("--no-progress", dest="progress", action="store_false",
                       help="Hide progress bars")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s:%(name)s: %(message)s")
    try:
        return args.func(args)
    except TTRNNError as e:
        print(f"error: {e}", file=sys.stderr)
        return e.exit_code
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return FormatError.exit_code


if __name__ == "__main__":
    sys.exit(main())
