"""Axis-aligned box arithmetic and the pairwise proposal distance matrix."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np


@dataclass(frozen=True)
class Box:
    """Corner-form box ``(x_min, y_min, x_max, y_max)``; no clipping to the unit square."""

    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def __post_init__(self) -> None:
        if not (self.x_min <= self.x_max and self.y_min <= self.y_max):
            raise ValueError(f"invalid box corners: {self.as_tuple()}")

    @property
    def area(self) -> float:
        return (self.x_max - self.x_min) * (self.y_max - self.y_min)

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.x_min, self.y_min, self.x_max, self.y_max)

    @classmethod
    def from_seq(cls, coords: Sequence[float]) -> "Box":
        if len(coords) != 4:
            raise ValueError(f"box needs 4 coordinates, got {len(coords)}")
        return cls(*(float(c) for c in coords))


def iou(b1: Box, b2: Box) -> float:
    """Intersection over union; 0 when both boxes are degenerate (zero union)."""
    w = min(b1.x_max, b2.x_max) - max(b1.x_min, b2.x_min)
    h = min(b1.y_max, b2.y_max) - max(b1.y_min, b2.y_min)
    inter = max(w, 0.0) * max(h, 0.0)
    union = b1.area + b2.area - inter
    if union <= 0.0:
        return 0.0
    return min(max(inter / union, 0.0), 1.0)


def boxes_to_array(boxes: Sequence[Box]) -> np.ndarray:
    return np.array([b.as_tuple() for b in boxes], dtype=np.float64).reshape(-1, 4)


def iou_matrix(coords: np.ndarray) -> np.ndarray:
    """Pairwise IoU for an ``(..., n, 4)`` array of corner-form boxes."""
    coords = np.asarray(coords, dtype=np.float64)
    lo = np.maximum(coords[..., :, None, :2], coords[..., None, :, :2])
    hi = np.minimum(coords[..., :, None, 2:], coords[..., None, :, 2:])
    wh = np.clip(hi - lo, 0.0, None)
    inter = wh[..., 0] * wh[..., 1]
    area = (coords[..., 2] - coords[..., 0]) * (coords[..., 3] - coords[..., 1])
    union = area[..., :, None] + area[..., None, :] - inter
    safe = np.where(union > 0.0, union, 1.0)
    out = np.where(union > 0.0, inter / safe, 0.0)
    return np.clip(out, 0.0, 1.0)


def distance_matrix(boxes: Sequence[Box] | np.ndarray) -> np.ndarray:
    """``D_ij = 1 - IoU(b_i, b_j)`` with the diagonal pinned to 0.

    Accepts a list of :class:`Box` or an ``(n, 4)`` / ``(batch, n, 4)`` array.
    """
    coords = boxes if isinstance(boxes, np.ndarray) else boxes_to_array(boxes)
    if coords.shape[-2] == 0:
        raise ValueError("distance_matrix needs at least one box")
    dist = 1.0 - iou_matrix(coords)
    n = coords.shape[-2]
    # degenerate boxes have IoU 0 with themselves; distance to self is still 0
    dist[..., np.arange(n), np.arange(n)] = 0.0
    return dist
