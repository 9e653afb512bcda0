"""Command-line entry point: ``countgraph {synth,train,eval,dump-functions,grad-check}``.

Options may also come from a JSON file given with ``--config``; explicit flags
win over file values.  ``COUNTGRAPH_SEED`` supplies the seed when neither does.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import metrics
from .oracle import gradient_check
from .plots import functions_csv, functions_svg
from .synth import SynthConfig, generate_dataset
from .train import Checkpoint, TrainConfig, train_loop

SEED_ENV = "COUNTGRAPH_SEED"


class UsageError(Exception):
    pass


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {value}")
    return value


def _nonneg_int(text: str) -> int:
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got {value}")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="countgraph", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name: str, help: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help)
        p.add_argument("--config", type=Path, help="JSON file of option defaults")
        p.add_argument("--seed", type=int)
        return p

    p = add("synth", "write a JSONL dataset of synthetic scenes")
    p.add_argument("--n", type=_positive_int, default=10, help="proposals per scene")
    p.add_argument("--count", type=_positive_int, default=1000, help="number of scenes")
    p.add_argument("--max-objects", type=_nonneg_int, default=5)
    p.add_argument("--side", type=float, default=0.15)
    p.add_argument("--dup-prob", type=float, default=0.5)
    p.add_argument("--jitter", type=float, default=0.0)
    p.add_argument("--q", type=float, default=0.0, help="attention noise level")
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_synth)

    p = add("train", "train the count module on a synthetic dataset")
    p.add_argument("--train", type=Path, required=True)
    p.add_argument("--val", type=Path, required=True)
    p.add_argument("--epochs", type=_nonneg_int, default=30)
    p.add_argument("--theta", type=float, default=0.5, help="confidence center")
    p.add_argument("--n", type=_positive_int, default=10, help="proposals per scene")
    p.add_argument("--lr", type=float, default=1.5e-3)
    p.add_argument("--half-life", type=float, default=50000.0, help="LR half-life in iterations")
    p.add_argument("--batch-size", type=_positive_int, default=32)
    p.add_argument("--segments", type=_positive_int, default=16)
    p.add_argument("--checkpoint", type=Path, required=True, help="output checkpoint JSON")
    p.add_argument("--metrics", type=Path, help="per-epoch metrics JSONL (default: next to checkpoint)")
    p.set_defaults(func=cmd_train)

    p = add("eval", "score predictions against VQA-style annotations")
    p.add_argument("--predictions", type=Path, required=True)
    p.add_argument("--annotations", type=Path, required=True)
    p.add_argument("--format", choices=("table", "json"), default="table")
    p.add_argument("--out", type=Path, help="also write the report as JSON here")
    p.set_defaults(func=cmd_eval)

    p = add("dump-functions", "sample the eight learned functions to CSV (and SVG)")
    p.add_argument("--checkpoint", type=Path, required=True)
    p.add_argument("--k", type=int, default=101, help="grid points")
    p.add_argument("--out", type=Path, required=True, help="CSV path")
    p.add_argument("--svg", type=Path)
    p.set_defaults(func=cmd_dump_functions)

    p = add("grad-check", "compare analytic gradients with central differences")
    p.add_argument("--draws", type=int, default=50)
    p.add_argument("--h", type=float, default=1e-6)
    p.add_argument("--tol", type=float, default=1e-4)
    p.add_argument("--n-max", type=_positive_int, default=6)
    p.set_defaults(func=cmd_grad_check)
    parser.subcommands = sub.choices
    return parser


def _resolve_seed(args: argparse.Namespace) -> int:
    if args.seed is not None:
        return args.seed
    env = os.environ.get(SEED_ENV)
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise UsageError(f"{SEED_ENV}={env!r} is not an integer") from None
    return 0


def cmd_synth(args: argparse.Namespace) -> int:
    try:
        cfg = SynthConfig(
            n=args.n, max_objects=min(args.max_objects, args.n), side=args.side,
            dup_prob=args.dup_prob, jitter=args.jitter, q=args.q, seed=args.seed,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    generate_dataset(cfg, args.count, args.out)
    print(f"wrote {args.count} scenes to {args.out}")
    return 0


def cmd_train(args: argparse.Namespace) -> int:
    try:
        cfg = TrainConfig(
            lr=args.lr, half_life=args.half_life, epochs=args.epochs, batch_size=args.batch_size,
            seed=args.seed, theta=args.theta, n=args.n, segments=args.segments,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    for path in (args.train, args.val):
        if not path.is_file():
            raise UsageError(f"dataset not found: {path}")
    metrics_path = args.metrics or args.checkpoint.with_suffix(".metrics.jsonl")
    result = train_loop(args.train, args.val, cfg, args.checkpoint, metrics_path)
    final = result.history[-1] if result.history else result.initial
    summary = {
        "initial_val_acc": result.initial["val_acc"],
        "initial_val_loss": result.initial["val_loss"],
        "final_val_acc": final["val_acc"],
        "final_val_loss": final["val_loss"],
        "epochs": cfg.epochs,
        "theta": cfg.theta,
        "n": cfg.n,
        "checkpoint": str(args.checkpoint),
        "metrics": str(metrics_path),
    }
    print(json.dumps(summary))
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    annotations = metrics.load_annotations(args.annotations)
    predictions = metrics.load_predictions(args.predictions)
    report = metrics.category_report(predictions, annotations)
    if args.format == "json":
        print(json.dumps(report, indent=2))
    else:
        print(metrics.format_table(report))
    if args.out is not None:
        args.out.write_text(json.dumps(report, indent=2) + "\n", encoding="utf-8")
    return 0


def cmd_dump_functions(args: argparse.Namespace) -> int:
    if args.k < 2:
        raise UsageError(f"--k must be >= 2, got {args.k}")
    ckpt = Checkpoint.load(args.checkpoint)
    args.out.write_text(functions_csv(ckpt.params, args.k), encoding="utf-8")
    if args.svg is not None:
        args.svg.write_text(functions_svg(ckpt.params, args.k), encoding="utf-8")
    print(f"wrote {args.k} samples of 8 functions to {args.out}")
    return 0


def cmd_grad_check(args: argparse.Namespace, backward_fn=None) -> int:
    if args.draws < 1:
        raise UsageError(f"--draws must be >= 1, got {args.draws}")
    if args.h <= 0:
        raise UsageError(f"--h must be positive, got {args.h}")
    errors = gradient_check(args.draws, args.seed, args.h, args.n_max, backward_fn=backward_fn)
    worst = max(errors)
    ok = worst < args.tol
    print(f"grad-check: {len(errors)} draws, max rel error {worst:.3e} (tol {args.tol:g}) {'PASS' if ok else 'FAIL'}")
    return 0 if ok else 1


def parse_args(argv: list[str] | None = None) -> argparse.Namespace:
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config", type=Path)
    pre.add_argument("command", nargs="?")
    early, _ = pre.parse_known_args(argv)
    sub = parser.subcommands.get(early.command)
    if early.config is not None and sub is not None:
        try:
            file_values = json.loads(early.config.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            sub.error(f"cannot read --config {early.config}: {exc}")
        if not isinstance(file_values, dict):
            sub.error(f"--config {early.config} must hold a JSON object")
        values = {k.replace("-", "_"): v for k, v in file_values.items()}
        known = {a.dest for a in sub._actions}
        unknown = sorted(set(values) - known)
        if unknown:
            sub.error(f"unknown keys in --config: {', '.join(unknown)}")
        # file values become defaults, so explicit flags still win
        sub.set_defaults(**values)
        for action in sub._actions:
            if action.dest in values:
                action.required = False
    return parser.parse_args(argv)


def main(argv: list[str] | None = None) -> int:
    try:
        args = parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        args.seed = _resolve_seed(args)
        return args.func(args)
    except UsageError as exc:
        print(f"countgraph {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except metrics.MissingPredictionError as exc:
        print(f"countgraph {args.command}: error: {exc}", file=sys.stderr)
        return 1
    except (OSError, ValueError) as exc:
        print(f"countgraph {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
