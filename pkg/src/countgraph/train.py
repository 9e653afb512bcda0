"""Direct supervision of the count output: cross-entropy, Adam with half-life decay, checkpoints.

Also carries the gated fusion ``ReLU(Wx x + Wy y) - (Wx x - Wy y)^2`` used by
the host VQA model, in plain dense-vector form.
"""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .counting import CountParams, Scene, backward_arrays, forward_arrays, stack_scenes
from .plf import DEFAULT_SEGMENTS, from_dict, to_dict
from .synth import load_dataset

logger = logging.getLogger(__name__)

CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 1.5e-3
    half_life: float = 50000.0
    betas: tuple[float, float] = (0.9, 0.999)
    eps: float = 1e-8
    epochs: int = 30
    batch_size: int = 32
    seed: int = 0
    theta: float = 0.5
    n: int = 10
    segments: int = DEFAULT_SEGMENTS

    def __post_init__(self) -> None:
        object.__setattr__(self, "betas", tuple(float(b) for b in self.betas))
        if self.lr <= 0:
            raise ValueError(f"lr must be positive, got {self.lr}")
        if self.half_life <= 0:
            raise ValueError(f"half_life must be positive, got {self.half_life}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.epochs < 0:
            raise ValueError(f"epochs must be >= 0, got {self.epochs}")
        if self.n < 1:
            raise ValueError(f"n must be >= 1, got {self.n}")
        if not 0.0 < self.theta < 1.0:
            raise ValueError(f"theta must lie in (0, 1), got {self.theta}")
        if not all(0.0 <= b < 1.0 for b in self.betas) or len(self.betas) != 2:
            raise ValueError(f"betas must be two values in [0, 1), got {self.betas}")

    def to_json(self) -> dict:
        out = asdict(self)
        out["betas"] = list(self.betas)
        return out

    @classmethod
    def from_json(cls, obj: dict) -> "TrainConfig":
        known = {k: v for k, v in obj.items() if k in cls.__dataclass_fields__}
        if "betas" in known:
            known["betas"] = tuple(known["betas"])
        return cls(**known)


# -- loss ---------------------------------------------------------------------

def _log_softmax(z: np.ndarray) -> np.ndarray:
    shifted = z - np.max(z, axis=-1, keepdims=True)
    return shifted - np.log(np.sum(np.exp(shifted), axis=-1, keepdims=True))


def loss_ce(o_gated: np.ndarray, true_count) -> float:
    """Mean of ``-log softmax(o_gated)[true_count]`` over any leading batch axes."""
    o_gated = np.asarray(o_gated, dtype=np.float64)
    labels = np.asarray(true_count)
    n = o_gated.shape[-1] - 1
    if np.any(labels < 0) or np.any(labels > n):
        raise ValueError(f"label outside 0..{n}: {labels}")
    logp = _log_softmax(o_gated)
    picked = np.take_along_axis(logp, labels[..., None].astype(np.int64), axis=-1)
    return float(-np.mean(picked))


def loss_ce_grad(o_gated: np.ndarray, true_count) -> np.ndarray:
    o_gated = np.asarray(o_gated, dtype=np.float64)
    labels = np.asarray(true_count).astype(np.int64)
    probs = np.exp(_log_softmax(o_gated))
    onehot = np.zeros_like(probs)
    np.put_along_axis(onehot, labels[..., None], 1.0, axis=-1)
    batch = probs.size // probs.shape[-1]
    return (probs - onehot) / batch


# -- optimiser ----------------------------------------------------------------

@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0

    @classmethod
    def zeros(cls, size: int) -> "AdamState":
        return cls(np.zeros(size), np.zeros(size), 0)


def effective_lr(cfg: TrainConfig, t: int) -> float:
    return cfg.lr * 0.5 ** (t / cfg.half_life)


def adam_step(
    params: np.ndarray, grads: np.ndarray, state: AdamState, cfg: TrainConfig
) -> tuple[np.ndarray, AdamState]:
    """One bias-corrected Adam update; the step count ``state.t`` is advanced first."""
    b1, b2 = cfg.betas
    t = state.t + 1
    m = b1 * state.m + (1.0 - b1) * grads
    v = b2 * state.v + (1.0 - b2) * grads * grads
    m_hat = m / (1.0 - b1 ** t)
    v_hat = v / (1.0 - b2 ** t)
    new = params - effective_lr(cfg, t) * m_hat / (np.sqrt(v_hat) + cfg.eps)
    return new, AdamState(m, v, t)


# -- checkpoints --------------------------------------------------------------

@dataclass
class Checkpoint:
    params: CountParams
    adam: AdamState
    iteration: int
    config: TrainConfig
    version: int = CHECKPOINT_VERSION

    def to_json(self) -> dict:
        return {
            "version": self.version,
            "theta": self.params.theta,
            "plfs": [to_dict(f) for f in self.params.fs],
            "adam": {"m": self.adam.m.tolist(), "v": self.adam.v.tolist(), "t": self.adam.t},
            "iter": self.iteration,
            "config": self.config.to_json(),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "Checkpoint":
        if obj.get("version") != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {obj.get('version')!r}")
        params = CountParams(tuple(from_dict(p) for p in obj["plfs"]), float(obj["theta"]))
        adam = obj["adam"]
        return cls(
            params=params,
            adam=AdamState(np.array(adam["m"], dtype=np.float64), np.array(adam["v"], dtype=np.float64), int(adam["t"])),
            iteration=int(obj["iter"]),
            config=TrainConfig.from_json(obj["config"]),
        )

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=1) + "\n"

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.dumps(), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "Checkpoint":
        path = Path(path)
        try:
            obj = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ValueError(f"{path}: not a JSON checkpoint: {exc}") from exc
        return cls.from_json(obj)

    @classmethod
    def initial(cls, cfg: TrainConfig) -> "Checkpoint":
        params = CountParams.identity(cfg.segments, cfg.theta)
        return cls(params, AdamState.zeros(params.flat().size), 0, cfg)


# -- training loop ------------------------------------------------------------

@dataclass
class EvalResult:
    loss: float
    accuracy: float


def evaluate(params: CountParams, a: np.ndarray, D: np.ndarray, labels: np.ndarray) -> EvalResult:
    trace = forward_arrays(params, a, D)
    acc = float(np.mean(trace.prediction() == labels))
    return EvalResult(loss_ce(trace.o_gated, labels), acc)


@dataclass
class TrainResult:
    checkpoint: Checkpoint
    history: list[dict]
    initial: dict = field(default_factory=dict)


def _prepare(scenes: Sequence[Scene], n: int, name: str):
    if not scenes:
        raise ValueError(f"{name} set is empty")
    for i, sc in enumerate(scenes):
        if sc.n != n:
            raise ValueError(f"{name} scene {i} has {sc.n} proposals, config expects n={n}")
        if sc.true_count is None:
            raise ValueError(f"{name} scene {i} has no true_count")
    a, D = stack_scenes(scenes)
    labels = np.array([sc.true_count for sc in scenes], dtype=np.int64)
    return a, D, labels


def _as_scenes(data) -> list[Scene]:
    if isinstance(data, (str, Path)):
        return load_dataset(data)
    return list(data)


def majority_baseline(train_labels: np.ndarray, val_labels: np.ndarray) -> float:
    """Val accuracy of always answering the most frequent training label."""
    mode = int(np.argmax(np.bincount(train_labels)))
    return float(np.mean(val_labels == mode))


def train_loop(
    train,
    val,
    cfg: TrainConfig,
    checkpoint_path: str | Path | None = None,
    metrics_path: str | Path | None = None,
) -> TrainResult:
    """Train from identity-initialised functions; one metrics record per epoch.

    ``train``/``val`` are JSONL paths or scene sequences.  The pre-training
    evaluation is returned as ``TrainResult.initial`` rather than logged.
    """
    a_tr, D_tr, y_tr = _prepare(_as_scenes(train), cfg.n, "train")
    a_va, D_va, y_va = _prepare(_as_scenes(val), cfg.n, "val")

    ckpt = Checkpoint.initial(cfg)
    params, state = ckpt.params, ckpt.adam
    flat = params.flat()
    rng = np.random.default_rng(cfg.seed)
    init = evaluate(params, a_va, D_va, y_va)
    initial = {"epoch": 0, "val_loss": init.loss, "val_acc": init.accuracy}
    history: list[dict] = []

    log_fh = open(metrics_path, "w", encoding="utf-8") if metrics_path is not None else None
    try:
        for epoch in range(1, cfg.epochs + 1):
            order = rng.permutation(len(y_tr))
            batch_losses = []
            for start in range(0, len(order), cfg.batch_size):
                idx = order[start:start + cfg.batch_size]
                trace = forward_arrays(params, a_tr[idx], D_tr[idx])
                batch_losses.append(loss_ce(trace.o_gated, y_tr[idx]))
                grads = backward_arrays(params, trace, loss_ce_grad(trace.o_gated, y_tr[idx]))
                flat, state = adam_step(flat, grads.flat(), state, cfg)
                params = params.with_flat(flat)
            res = evaluate(params, a_va, D_va, y_va)
            record = {
                "epoch": epoch,
                "train_loss": float(np.mean(batch_losses)),
                "val_loss": res.loss,
                "val_acc": res.accuracy,
                "lr": effective_lr(cfg, state.t),
            }
            history.append(record)
            logger.info("epoch %d: %s", epoch, record)
            if log_fh is not None:
                log_fh.write(json.dumps(record) + "\n")
                log_fh.flush()
    finally:
        if log_fh is not None:
            log_fh.close()

    ckpt = Checkpoint(params, state, state.t, cfg)
    if checkpoint_path is not None:
        ckpt.save(checkpoint_path)
    return TrainResult(ckpt, history, initial)


# -- fusion -------------------------------------------------------------------

@dataclass(frozen=True)
class FusionParams:
    W_x: np.ndarray
    W_y: np.ndarray

    def __post_init__(self) -> None:
        if np.ndim(self.W_x) != 2 or np.ndim(self.W_y) != 2:
            raise ValueError("fusion weights must be matrices")
        if np.shape(self.W_x)[0] != np.shape(self.W_y)[0]:
            raise ValueError(f"output dims differ: {np.shape(self.W_x)} vs {np.shape(self.W_y)}")


def _project(x: np.ndarray, y: np.ndarray, p: FusionParams) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape[-1] != p.W_x.shape[1] or y.shape[-1] != p.W_y.shape[1]:
        raise ValueError(
            f"input dims {x.shape[-1]}, {y.shape[-1]} do not match weights {p.W_x.shape}, {p.W_y.shape}"
        )
    return x @ p.W_x.T, y @ p.W_y.T


def gated_fusion(x: np.ndarray, y: np.ndarray, p: FusionParams) -> np.ndarray:
    px, py = _project(x, y, p)
    return np.maximum(px + py, 0.0) - (px - py) ** 2


def gated_fusion_grad(x, y, p: FusionParams, upstream) -> dict[str, np.ndarray]:
    """Gradients of ``sum(upstream * gated_fusion(x, y, p))`` for single vectors ``x``, ``y``."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    px, py = _project(x, y, p)
    g = np.asarray(upstream, dtype=np.float64)
    relu = (px + py > 0.0).astype(np.float64)
    d_px = g * relu - 2.0 * g * (px - py)
    d_py = g * relu + 2.0 * g * (px - py)
    return {
        "x": p.W_x.T @ d_px,
        "y": p.W_y.T @ d_py,
        "W_x": np.outer(d_px, x),
        "W_y": np.outer(d_py, y),
    }
