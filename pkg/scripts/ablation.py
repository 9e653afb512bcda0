"""Run the proposal-count / confidence-center ablation matrix and dump function shapes.

Trains a baseline (n=10, theta=0.5), a 20-proposal run and a theta=0.2 run on
matching synthetic data, writes CSV/SVG shapes for each, and reports how f6
moved between the two confidence centers.

    python scripts/ablation.py --out runs/ablation
"""

import argparse
import csv
import json
from pathlib import Path

import numpy as np

from countgraph.plots import functions_csv, functions_svg
from countgraph.synth import SynthConfig, iter_scenes
from countgraph.train import TrainConfig, train_loop

RUNS = {"baseline": (10, 0.5), "use_20_objects": (20, 0.5), "confidence_0.2": (10, 0.2)}


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--epochs", type=int, default=30)
    ap.add_argument("--train-size", type=int, default=5000)
    ap.add_argument("--val-size", type=int, default=1000)
    ap.add_argument("--q", type=float, default=0.3)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", type=Path, default=Path("runs/ablation"))
    args = ap.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)

    summary = {}
    for name, (n, theta) in RUNS.items():
        data = dict(n=n, max_objects=n // 2, q=args.q, jitter=0.02, dup_prob=0.5)
        train = list(iter_scenes(SynthConfig(**data, seed=args.seed + 1), args.train_size))
        val = list(iter_scenes(SynthConfig(**data, seed=args.seed + 2), args.val_size))
        cfg = TrainConfig(epochs=args.epochs, n=n, theta=theta, seed=args.seed)
        res = train_loop(train, val, cfg, args.out / f"{name}.json", args.out / f"{name}.metrics.jsonl")
        params = res.checkpoint.params
        (args.out / f"{name}.csv").write_text(functions_csv(params, 101))
        (args.out / f"{name}.svg").write_text(functions_svg(params, 101))
        summary[name] = {"n": n, "theta": theta, **{k: v for k, v in res.history[-1].items() if k != "lr"}}
        print(name, summary[name])

    def f6(name):
        with open(args.out / f"{name}.csv") as fh:
            return np.array([float(r["f6"]) for r in csv.DictReader(fh)])

    shift = f6("confidence_0.2") - f6("baseline")
    summary["f6_shift_mean"] = float(shift.mean())
    print(f"f6 (theta 0.2) minus f6 (theta 0.5): mean {shift.mean():+.4f}, max |diff| {np.abs(shift).max():.4f}")
    (args.out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")


if __name__ == "__main__":
    main()
