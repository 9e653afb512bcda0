"""Train on noisy synthetic scenes and compare against the majority-class baseline.

    python scripts/trainability.py --epochs 30 --q 0.3 --out runs/trainability
"""

import argparse
import json
from pathlib import Path

import numpy as np

from countgraph.synth import SynthConfig, iter_scenes
from countgraph.train import TrainConfig, majority_baseline, train_loop


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=int, default=10)
    ap.add_argument("--q", type=float, default=0.3)
    ap.add_argument("--jitter", type=float, default=0.02)
    ap.add_argument("--dup-prob", type=float, default=0.5)
    ap.add_argument("--train-size", type=int, default=5000)
    ap.add_argument("--val-size", type=int, default=1000)
    ap.add_argument("--epochs", type=int, default=30)
    ap.add_argument("--theta", type=float, default=0.5)
    ap.add_argument("--lr", type=float, default=1.5e-3)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", type=Path, default=Path("runs/trainability"))
    args = ap.parse_args()

    data = dict(n=args.n, q=args.q, jitter=args.jitter, dup_prob=args.dup_prob, max_objects=min(5, args.n))
    train = list(iter_scenes(SynthConfig(**data, seed=args.seed + 1), args.train_size))
    val = list(iter_scenes(SynthConfig(**data, seed=args.seed + 2), args.val_size))
    args.out.mkdir(parents=True, exist_ok=True)
    cfg = TrainConfig(epochs=args.epochs, theta=args.theta, n=args.n, lr=args.lr, seed=args.seed)
    res = train_loop(train, val, cfg, args.out / "checkpoint.json", args.out / "metrics.jsonl")

    base = majority_baseline(np.array([s.true_count for s in train]), np.array([s.true_count for s in val]))
    print(f"epoch  0  val_loss {res.initial['val_loss']:.4f}  val_acc {res.initial['val_acc']:.3f}")
    for rec in res.history:
        print(f"epoch {rec['epoch']:2d}  train_loss {rec['train_loss']:.4f}  val_loss {rec['val_loss']:.4f}  val_acc {rec['val_acc']:.3f}")
    print(json.dumps({"majority_baseline": base, "final_val_acc": res.history[-1]["val_acc"] if res.history else None}))


if __name__ == "__main__":
    main()
