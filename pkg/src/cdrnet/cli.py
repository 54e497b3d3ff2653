"""Command-line entry point.

Subcommands cover the whole pipeline: synth (generate labeled CDR data),
featurize (CDR csv to tensor file), train (tensor file + labels to model
file), train-svm (append an SVM head to a model), predict (model + tensors
to predictions csv), evaluate (predictions + labels to metrics), and
gradcheck (finite-difference gradient audit).

Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.
Given the same inputs and --seed, every subcommand writes byte-identical
output files.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .classify import (
    evaluate,
    format_table,
    predict_dataset,
    read_predictions,
    train_svm_head,
    write_predictions,
)
from .container import ContainerError
from .featurize import AgeBuckets, bucketize_age, featurize_users, fit_normalizer
from .featurize import load_tensor_dataset, save_tensor_dataset
from .ingest import IngestError, ParseError, ingest, load_labels
from .modelfile import load_model, save_model
from .net import NetworkConfig, downsized_config, init_params
from .synth import SynthConfig, generate, write_lines
from .training import (
    GRAD_TOL,
    NumericError,
    TrainConfig,
    class_assignments,
    grad_check,
    train,
)

DEFAULT_EDGES_TEXT = "28,38,48"


def _int_tuple(text: str) -> tuple[int, ...]:
    return tuple(int(x) for x in text.split(","))


def _read_lines(path) -> list[str]:
    with open(path, encoding="utf-8") as fh:
        return fh.readlines()


def _cmd_synth(args) -> int:
    config = SynthConfig(
        users=args.users,
        weeks_per_user=args.weeks,
        age_edges=args.age_edges,
        gender_ratio=args.gender_ratio,
        signal=args.signal,
        contact_pool=args.contact_pool,
        event_rate=args.event_rate,
        seed=args.seed,
    )
    cdr_lines, label_lines = generate(config)
    write_lines(args.cdr, cdr_lines)
    write_lines(args.labels, label_lines)
    print(f"wrote {len(cdr_lines) - 1} records and {len(label_lines) - 1} labels")
    return 0


def _cmd_featurize(args) -> int:
    groups, _, report = ingest(_read_lines(args.cdr))
    print(json.dumps(report.to_json(), sort_keys=True))
    if report.records_accepted == 0:
        print(f"error: {args.cdr}: no usable records", file=sys.stderr)
        return 2
    ds = featurize_users(groups, include_empty_weeks=args.include_empty_weeks)
    ds.norm_stats = fit_normalizer(ds.tensors)
    save_tensor_dataset(args.out, ds)
    print(f"wrote {len(ds)} user-week tensors for {len(set(ds.user_ids))} users")
    return 0


def _cmd_train(args) -> int:
    ds = load_tensor_dataset(args.tensors)
    if len(ds) == 0:
        print(f"error: {args.tensors}: empty tensor file", file=sys.stderr)
        return 2
    labels, report = load_labels(_read_lines(args.labels))
    if not labels:
        print(f"error: {args.labels}: no usable labels", file=sys.stderr)
        return 2
    users = sorted(set(ds.user_ids))
    _, class_names = class_assignments(users, labels, args.attribute, args.age_edges)
    net_config = NetworkConfig(
        classes=len(class_names),
        filters=args.filters,
        dense=args.dense,
        alpha=args.alpha,
    )
    train_config = TrainConfig(
        learning_rate=args.lr,
        momentum=args.momentum,
        batch_size=args.batch,
        epochs=args.epochs,
        seed=args.seed,
        weight_decay=args.weight_decay,
        val_fraction=args.val_fraction,
    )
    params, history = train(ds, labels, args.attribute, train_config, net_config, args.age_edges)
    save_model(args.out, params)
    if args.history:
        with open(args.history, "w", encoding="utf-8") as fh:
            json.dump([h.to_json() for h in history], fh, indent=2, sort_keys=True)
    last = history[-1]
    val = "n/a" if last.val_accuracy is None else f"{last.val_accuracy:.4f}"
    print(f"epoch {last.epoch}: train_loss {last.train_loss:.6f} val_accuracy {val}")
    print(f"saved model to {args.out}")
    return 0


def _cmd_train_svm(args) -> int:
    params = load_model(args.model)
    ds = load_tensor_dataset(args.tensors)
    if len(ds) == 0:
        print(f"error: {args.tensors}: empty tensor file", file=sys.stderr)
        return 2
    labels, _ = load_labels(_read_lines(args.labels))
    svm = train_svm_head(
        params,
        ds,
        labels,
        lam=args.lam,
        epochs=args.epochs,
        seed=args.seed,
        val_fraction=args.val_fraction,
    )
    params.svm = svm
    out = args.out if args.out else args.model
    save_model(out, params)
    print(f"saved model with {len(svm.weights)}-class svm head to {out}")
    return 0


def _cmd_predict(args) -> int:
    params = load_model(args.model)
    ds = load_tensor_dataset(args.tensors)
    if len(ds) == 0:
        print(f"error: {args.tensors}: empty tensor file", file=sys.stderr)
        return 2
    preds = predict_dataset(params, ds, head=args.head)
    write_predictions(args.out, preds)
    print(f"wrote {len(preds)} predictions ({args.head} head) to {args.out}")
    return 0


def _cmd_evaluate(args) -> int:
    preds = read_predictions(args.predictions)
    labels, _ = load_labels(_read_lines(args.labels))
    if args.attribute == "gender":
        class_labels = tuple(sorted({r.gender for r in labels.values()}))
        truth = {u: class_labels.index(r.gender) for u, r in labels.items()}
    else:
        buckets = AgeBuckets(args.age_edges)
        class_labels = buckets.class_labels()
        truth = {u: bucketize_age(r.age_years, buckets) for u, r in labels.items()}
    metrics = evaluate(preds, truth, class_labels=class_labels)
    report = json.dumps(metrics.to_json(), indent=2, sort_keys=True)
    print(report)
    print(
        format_table(
            [
                ("majority", metrics.majority_accuracy),
                ("uniform", metrics.uniform_accuracy),
                ("model", metrics.accuracy),
            ]
        )
    )
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(report + "\n")
    return 0


def _cmd_gradcheck(args) -> int:
    config = downsized_config()
    params = init_params(config, args.seed)
    rng = np.random.default_rng(args.seed)
    # random non-zero biases keep pre-activations off the leaky-ReLU kink,
    # where central differences and the analytic slope legitimately disagree
    for name in params.tensors:
        if name.endswith(".b"):
            params.tensors[name] = rng.normal(0.0, 0.1, params.tensors[name].shape)
    x = rng.normal(size=(config.in_channels, config.hours, config.days))
    label = int(rng.integers(config.classes))
    errors = grad_check(params, x, label)
    worst = max(errors.values())
    print(f"max relative error {worst:.3e} (tolerance {GRAD_TOL:.0e})")
    if worst >= GRAD_TOL:
        print("error: gradient check failed", file=sys.stderr)
        return 3
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cdrnet",
        description="weekly CDR tensors, a small ConvNet, and two prediction heads",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a labeled synthetic CDR dataset")
    p.add_argument("--cdr", required=True, help="output CDR csv path")
    p.add_argument("--labels", required=True, help="output labels csv path")
    p.add_argument("--users", type=int, required=True)
    p.add_argument("--weeks", type=int, default=8)
    p.add_argument("--signal", type=float, default=1.0, help="class signal strength in [0,1]")
    p.add_argument("--age-edges", type=_int_tuple, default=_int_tuple(DEFAULT_EDGES_TEXT))
    p.add_argument("--gender-ratio", type=float, default=0.5)
    p.add_argument("--contact-pool", type=int, default=20)
    p.add_argument("--event-rate", type=float, default=60.0)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("featurize", help="turn a CDR csv into week tensors")
    p.add_argument("--cdr", required=True, help="input CDR csv path")
    p.add_argument("--out", required=True, help="output tensor file path")
    p.add_argument("--include-empty-weeks", action="store_true")
    p.set_defaults(func=_cmd_featurize)

    p = sub.add_parser("train", help="train the network on week tensors")
    p.add_argument("--tensors", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--out", required=True, help="output model file path")
    p.add_argument("--attribute", choices=("gender", "age"), required=True)
    p.add_argument("--age-edges", type=_int_tuple, default=_int_tuple(DEFAULT_EDGES_TEXT))
    p.add_argument("--epochs", type=int, default=30)
    p.add_argument("--lr", type=float, default=0.01)
    p.add_argument("--momentum", type=float, default=0.9)
    p.add_argument("--batch", type=int, default=32)
    p.add_argument("--weight-decay", type=float, default=0.0)
    p.add_argument("--val-fraction", type=float, default=0.1)
    p.add_argument("--filters", type=_int_tuple, default=(16, 16, 16, 16, 32, 64))
    p.add_argument("--dense", type=_int_tuple, default=(128, 64))
    p.add_argument("--alpha", type=float, default=0.01, help="leaky ReLU slope")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--history", help="optional path for per-epoch stats (json)")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("train-svm", help="fit the svm head on a trained model")
    p.add_argument("--model", required=True)
    p.add_argument("--tensors", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--out", help="output model path (default: overwrite --model)")
    p.add_argument("--lambda", dest="lam", type=float, default=1e-4)
    p.add_argument("--epochs", type=int, default=50)
    p.add_argument("--val-fraction", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_train_svm)

    p = sub.add_parser("predict", help="predict each user in a tensor file")
    p.add_argument("--model", required=True)
    p.add_argument("--tensors", required=True)
    p.add_argument("--out", required=True, help="output predictions csv path")
    p.add_argument("--head", choices=("avg", "svm"), default="avg")
    p.set_defaults(func=_cmd_predict)

    p = sub.add_parser("evaluate", help="score predictions against labels")
    p.add_argument("--predictions", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--attribute", choices=("gender", "age"), required=True)
    p.add_argument("--age-edges", type=_int_tuple, default=_int_tuple(DEFAULT_EDGES_TEXT))
    p.add_argument("--out", help="optional path for the metrics json")
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("gradcheck", help="finite-difference audit of the backward pass")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_gradcheck)

    return parser


def run(argv: list[str]) -> int:
    """Dispatch argv; returns the process exit code instead of raising."""
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 1
    try:
        return args.func(args)
    except NumericError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (ContainerError, IngestError, ParseError, OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
