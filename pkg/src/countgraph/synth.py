"""Synthetic counting scenes: square objects on the unit square, duplicated proposals, noisy attention."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Iterator

import numpy as np

from .counting import Scene
from .geometry import Box


@dataclass(frozen=True)
class SynthConfig:
    n: int = 10
    max_objects: int = 5
    side: float = 0.15
    dup_prob: float = 0.5
    jitter: float = 0.0
    q: float = 0.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValueError(f"n must be >= 1, got {self.n}")
        if not 0 <= self.max_objects <= self.n:
            raise ValueError(f"max_objects must lie in 0..n={self.n}, got {self.max_objects}")
        if not 0.05 <= self.side <= 0.5:
            raise ValueError(f"side must lie in [0.05, 0.5], got {self.side}")
        if not 0.0 <= self.dup_prob <= 1.0:
            raise ValueError(f"dup_prob must lie in [0, 1], got {self.dup_prob}")
        if self.jitter < 0:
            raise ValueError(f"jitter must be >= 0, got {self.jitter}")
        if not 0.0 <= self.q <= 1.0:
            raise ValueError(f"q must lie in [0, 1], got {self.q}")
        # a full grid of relevant objects still needs a cell for distractors
        needed = self.max_objects + (self.max_objects < self.n)
        if needed > self.cells ** 2:
            raise ValueError(
                f"side {self.side} leaves room for {self.cells ** 2} disjoint objects, "
                f"need {needed} for max_objects={self.max_objects}"
            )

    @property
    def cells(self) -> int:
        """Grid resolution; one object per cell keeps distinct objects disjoint."""
        return int(math.floor(1.0 / self.side + 1e-9))


def _jittered(base: np.ndarray, jitter: float, rng: np.random.Generator) -> Box:
    if jitter == 0:
        return Box(*base.tolist())
    x0, y0, x1, y1 = (base + rng.uniform(-jitter, jitter, 4)).tolist()
    return Box(min(x0, x1), min(y0, y1), max(x0, x1), max(y0, y1))


def generate_scene(cfg: SynthConfig, rng: np.random.Generator) -> Scene:
    """Draw one labelled scene.

    The relevant object count is uniform on ``0..max_objects``.  Each relevant
    object emits one proposal plus, with probability ``dup_prob``, a duplicate
    sharing its base box; leftover proposals go to distractor objects.
    """
    k = int(rng.integers(0, cfg.max_objects + 1))
    extra = rng.random(k) < cfg.dup_prob
    owners = []
    for obj in range(k):
        owners.append(obj)
        if extra[obj] and len(owners) + (k - obj - 1) < cfg.n:
            owners.append(obj)
    n_relevant = len(owners)
    free = cfg.n - n_relevant
    n_distractors = min(free, cfg.cells ** 2 - k)
    for j in range(free):
        # once every grid cell is taken, distractors repeat
        owners.append(k + (j % n_distractors))
    n_objects = k + (n_distractors if free else 0)

    cell = 1.0 / cfg.cells
    slots = rng.choice(cfg.cells ** 2, size=n_objects, replace=False)
    offsets = rng.uniform(0.0, cell - cfg.side, size=(n_objects, 2))
    corners = np.stack([slots % cfg.cells, slots // cfg.cells], axis=1) * cell + offsets
    bases = np.concatenate([corners, corners + cfg.side], axis=1)

    truth = np.array([1.0] * n_relevant + [0.0] * free)
    order = rng.permutation(cfg.n)
    noise = rng.random(cfg.n)
    attention = (1.0 - cfg.q) * truth[order] + cfg.q * noise
    boxes = [_jittered(bases[owners[i]], cfg.jitter, rng) for i in order]
    return Scene(tuple(boxes), tuple(np.clip(attention, 0.0, 1.0).tolist()), k)


def iter_scenes(cfg: SynthConfig, count: int) -> Iterator[Scene]:
    rng = np.random.default_rng(cfg.seed)
    for _ in range(count):
        yield generate_scene(cfg, rng)


def scene_line(scene: Scene) -> str:
    return json.dumps(scene.to_json(), separators=(",", ":"))


def generate_dataset(cfg: SynthConfig, count: int, path: str | Path) -> Path:
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    path = Path(path)
    try:
        with path.open("w", encoding="utf-8") as fh:
            for scene in iter_scenes(cfg, count):
                fh.write(scene_line(scene) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write dataset {path}: {exc}") from exc
    return path


def load_dataset(path: str | Path) -> list[Scene]:
    path = Path(path)
    scenes = []
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                scenes.append(Scene.from_json(json.loads(line)))
            except (ValueError, KeyError, TypeError) as exc:
                raise ValueError(f"{path}:{lineno}: bad scene record: {exc}") from exc
    return scenes


def config_dict(cfg: SynthConfig) -> dict:
    return asdict(cfg)
