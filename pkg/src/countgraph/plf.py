"""Learnable monotone piecewise-linear maps of [0, 1] onto itself.

A function with ``d`` segments is parameterised by ``d`` unconstrained raw
weights.  Segment ``i`` rises by ``(|w_i| + eps/d) / (sum_j |w_j| + eps)``, so
the increments are non-negative and sum to one: every weight vector realises a
non-decreasing function with ``f(0) = 0`` and ``f(1) = 1``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Iterable

import numpy as np

logger = logging.getLogger(__name__)

EPS = 1e-12
DEFAULT_SEGMENTS = 16

# inputs outside [0, 1] seen by any PLF since import (or the last reset)
clamp_count = 0


def reset_clamp_count() -> None:
    global clamp_count
    clamp_count = 0


def _clamp_unit(x: np.ndarray) -> np.ndarray:
    global clamp_count
    outside = int(np.count_nonzero((x < 0.0) | (x > 1.0)))
    if outside:
        clamp_count += outside
        logger.debug("clamped %d PLF inputs into [0, 1]", outside)
        x = np.clip(x, 0.0, 1.0)
    return x


@dataclass(frozen=True, eq=False)
class PLF:
    weights: np.ndarray

    def __post_init__(self) -> None:
        w = np.array(self.weights, dtype=np.float64).reshape(-1)
        if w.size < 1:
            raise ValueError("a PLF needs at least one segment")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @property
    def d(self) -> int:
        return int(self.weights.size)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PLF):
            return NotImplemented
        return np.array_equal(self.weights, other.weights)

    def __repr__(self) -> str:
        return f"PLF(d={self.d}, weights={self.weights.tolist()})"

    def _norm(self) -> float:
        return float(np.abs(self.weights).sum()) + EPS

    def increments(self) -> np.ndarray:
        return (np.abs(self.weights) + EPS / self.d) / self._norm()

    def _locate(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        # segment index under the left-segment convention: x in ((i-1)/d, i/d] -> i-1
        y = x * self.d
        idx = np.clip(np.ceil(y).astype(np.int64) - 1, 0, self.d - 1)
        return idx, y - idx

    def __call__(self, x) -> np.ndarray:
        x = _clamp_unit(np.asarray(x, dtype=np.float64))
        inc = self.increments()
        left = np.concatenate(([0.0], np.cumsum(inc)[:-1]))
        idx, frac = self._locate(x)
        # rounding in the cumulative sum can overshoot 1 by an ulp or two
        return np.minimum(left[idx] + inc[idx] * frac, 1.0)

    def slope(self, x) -> np.ndarray:
        """df/dx, zero where the input was clamped."""
        x = np.asarray(x, dtype=np.float64)
        inside = (x >= 0.0) & (x <= 1.0)
        idx, _ = self._locate(np.clip(x, 0.0, 1.0))
        return np.where(inside, self.d * self.increments()[idx], 0.0)

    def hinge(self, x) -> np.ndarray:
        """Per-segment fill ``clamp(d*x - i, 0, 1)``, shape ``x.shape + (d,)``."""
        x = np.clip(np.asarray(x, dtype=np.float64), 0.0, 1.0)
        return np.clip(x[..., None] * self.d - np.arange(self.d), 0.0, 1.0)

    def weight_vjp(self, x, upstream) -> np.ndarray:
        """``sum(upstream * df/dw)`` over all entries of ``x``.

        Uses ``df/dw_k = sign(w_k) * (hinge_k(x) - f(x)) / norm``.
        """
        x = np.clip(np.asarray(x, dtype=np.float64), 0.0, 1.0)
        g = np.asarray(upstream, dtype=np.float64)
        fx = self(x)
        # sum_k-wise: sum(g * hinge_k) computed without materialising x.shape x d
        idx, frac = self._locate(x)
        flat_idx = idx.reshape(-1)
        flat_g = np.broadcast_to(g, x.shape).reshape(-1)
        flat_frac = frac.reshape(-1)
        # entries in segment idx fill segments < idx completely and segment idx by frac
        full = np.bincount(flat_idx, weights=flat_g, minlength=self.d)
        part = np.bincount(flat_idx, weights=flat_g * flat_frac, minlength=self.d)
        # segment k is full for every entry with idx > k
        above = np.concatenate((np.cumsum(full[::-1])[::-1][1:], [0.0]))
        hinge_sum = above + part
        return np.sign(self.weights) * (hinge_sum - float(np.sum(flat_g * fx.reshape(-1)))) / self._norm()

    def with_weights(self, weights: np.ndarray) -> "PLF":
        return PLF(weights)


def plf_init_identity(d: int = DEFAULT_SEGMENTS) -> PLF:
    if d < 1:
        raise ValueError(f"segment count must be positive, got {d}")
    return PLF(np.ones(d))


def plf_eval(f: PLF, x: float) -> float:
    return float(f(x))


def plf_grad(f: PLF, x: float) -> tuple[float, np.ndarray]:
    """Return ``(df/dx, df/dw)`` at a single point."""
    xc = float(np.clip(x, 0.0, 1.0))
    dfdw = np.sign(f.weights) * (f.hinge(xc) - f(xc)) / f._norm()
    return float(f.slope(x)), dfdw


def plf_sample(f: PLF, k: int) -> list[tuple[float, float]]:
    if k < 2:
        raise ValueError(f"need at least 2 sample points, got {k}")
    xs = np.arange(k) / (k - 1)
    return [(float(x), float(y)) for x, y in zip(xs, f(xs))]


def to_dict(f: PLF) -> dict:
    return {"d": f.d, "raw_weights": f.weights.tolist()}


def from_dict(obj: dict) -> PLF:
    weights = obj["raw_weights"]
    if int(obj["d"]) != len(weights):
        raise ValueError(f"PLF record says d={obj['d']} but has {len(weights)} weights")
    return PLF(np.array(weights, dtype=np.float64))


def stack_weights(fs: Iterable[PLF]) -> np.ndarray:
    return np.concatenate([f.weights for f in fs])
