"""Independent ground truth: graph-theoretic counts for ideal scenes and finite-difference gradients."""

from __future__ import annotations

from typing import Callable

import numpy as np

from .counting import CountGrads, CountParams, Scene, backward, forward_arrays
from .geometry import Box, distance_matrix, iou
from .plf import PLF

IDEAL_TOL = 1e-9


class NotIdealError(ValueError):
    """Scene has fractional attention or partially overlapping boxes."""


class UnionFind:
    def __init__(self, n: int) -> None:
        self.parent = list(range(n))
        self.rank = [0] * n

    def find(self, x: int) -> int:
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, x: int, y: int) -> None:
        rx, ry = self.find(x), self.find(y)
        if rx == ry:
            return
        if self.rank[rx] < self.rank[ry]:
            rx, ry = ry, rx
        self.parent[ry] = rx
        if self.rank[rx] == self.rank[ry]:
            self.rank[rx] += 1


def is_ideal(scene: Scene, tol: float = IDEAL_TOL) -> bool:
    try:
        _ideal_classes(scene, tol)
    except NotIdealError:
        return False
    return True


def _ideal_classes(scene: Scene, tol: float) -> UnionFind:
    for i, v in enumerate(scene.attention):
        if min(abs(v), abs(v - 1.0)) > tol:
            raise NotIdealError(f"attention[{i}] = {v} is not binary")
    uf = UnionFind(scene.n)
    for i in range(scene.n):
        for j in range(i + 1, scene.n):
            overlap = iou(scene.boxes[i], scene.boxes[j])
            if overlap >= 1.0 - tol:
                uf.union(i, j)
            elif overlap > tol:
                raise NotIdealError(f"boxes {i} and {j} partially overlap (IoU {overlap:.6g})")
    return uf


def exact_count(scene: Scene, tol: float = IDEAL_TOL) -> int:
    """Number of distinct boxes (IoU-1 equivalence classes) holding a relevant proposal."""
    uf = _ideal_classes(scene, tol)
    relevant = {uf.find(i) for i, v in enumerate(scene.attention) if v > 0.5}
    return len(relevant)


def fd_gradient(
    params: CountParams,
    scene: Scene,
    loss: Callable[[np.ndarray], float],
    h: float = 1e-6,
) -> CountGrads:
    """Central differences of ``loss(o_gated)`` w.r.t. every raw weight and attention entry."""
    if h <= 0:
        raise ValueError(f"step must be positive, got {h}")
    a0 = scene.attention_array()
    D = distance_matrix(scene.coords())

    def at(p: CountParams, a: np.ndarray) -> float:
        return float(loss(forward_arrays(p, a, D).o_gated))

    flat = params.flat()
    d_flat = np.zeros_like(flat)
    for i in range(flat.size):
        up, down = flat.copy(), flat.copy()
        up[i] += h
        down[i] -= h
        d_flat[i] = (at(params.with_flat(up), a0) - at(params.with_flat(down), a0)) / (2 * h)

    d_a = np.zeros_like(a0)
    for i in range(a0.size):
        up, down = a0.copy(), a0.copy()
        up[i] += h
        down[i] -= h
        d_a[i] = (at(params, up) - at(params, down)) / (2 * h)

    d_fs, start = [], 0
    for f in params.fs:
        d_fs.append(d_flat[start:start + f.d])
        start += f.d
    return CountGrads(d_fs, d_a)


def _knot_gap(x: np.ndarray, d: int) -> float:
    y = np.asarray(x, dtype=np.float64).reshape(-1) * d
    interior = (y > 0) & (y < d)
    if not interior.any():
        return np.inf
    return float(np.min(np.abs(y[interior] - np.round(y[interior])))) / d


def kink_distance(params: CountParams, scene: Scene) -> float:
    """Smallest distance from any attention-dependent quantity to a non-differentiable point.

    Finite differences are only meaningful when this comfortably exceeds the step.
    """
    trace = forward_arrays(params, scene.attention_array(), distance_matrix(scene.coords()))
    k = trace.cache
    n = trace.n
    d = params.fs[0].d
    gaps = [
        _knot_gap(trace.A, d),
        _knot_gap(k["aa"], d),
        _knot_gap(k["u"][~np.eye(n, dtype=bool)], d),
        _knot_gap(trace.a, params.f(6).d),
        float(np.min(np.abs(params.flat()))),
    ]
    off = ~np.eye(n, dtype=bool)
    if off.any():
        gaps.append(float(np.min(np.abs(k["delta"][off]))))
    f6a = params.f(6)(trace.a)
    gaps.append(float(np.min(np.abs(f6a - params.theta))))
    z = float(trace.p_a + trace.p_D)
    gaps.append(min(abs(z), abs(1.0 - z)))
    gaps.append(_knot_gap(np.clip(z, 0, 1), params.f(8).d))
    c = float(trace.c)
    gaps.append(abs(c - round(c)))
    return min(gaps)


def rel_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = 1e-5) -> float:
    """Max elementwise ``|a - b| / max(|a|, |b|, floor)``.

    The floor keeps exactly-zero gradients from turning finite-difference
    round-off (about 1e-10 at h = 1e-6) into a relative blow-up.
    """
    analytic = np.asarray(analytic, dtype=np.float64)
    numeric = np.asarray(numeric, dtype=np.float64)
    if analytic.size == 0:
        return 0.0
    scale = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return float(np.max(np.abs(analytic - numeric) / scale))


def random_params(rng: np.random.Generator, d: int = 16, theta: float = 0.5) -> CountParams:
    fs = tuple(PLF(rng.uniform(0.2, 2.0, d) * rng.choice([-1.0, 1.0], d)) for _ in range(8))
    return CountParams(fs, theta)


def random_scene(rng: np.random.Generator, n_max: int = 6) -> Scene:
    n = int(rng.integers(1, n_max + 1))
    corner = rng.uniform(0.0, 0.7, (n, 2))
    size = rng.uniform(0.1, 0.4, (n, 2))
    # some exact copies so the duplicate paths are exercised
    for i in range(1, n):
        if rng.random() < 0.25:
            j = int(rng.integers(0, i))
            corner[i], size[i] = corner[j], size[j]
    boxes = tuple(Box(*corner[i], *(corner[i] + size[i])) for i in range(n))
    return Scene(boxes, tuple(rng.uniform(0.02, 0.98, n).tolist()))


def squared_output_loss(o_gated: np.ndarray) -> float:
    return float(np.sum(o_gated ** 2))


def gradient_check(
    draws: int = 50,
    seed: int = 0,
    h: float = 1e-6,
    n_max: int = 6,
    margin: float = 1e-4,
    backward_fn=None,
) -> list[float]:
    """Relative error of analytic vs central-difference gradients for ``draws`` random draws.

    Draws whose attention-dependent quantities sit within ``margin`` of a kink are redrawn.
    """
    if draws < 1:
        raise ValueError(f"draws must be >= 1, got {draws}")
    backward_fn = backward_fn or backward
    rng = np.random.default_rng(seed)
    errors = []
    while len(errors) < draws:
        params, scene = random_params(rng), random_scene(rng, n_max)
        if kink_distance(params, scene) < margin:
            continue
        trace = forward_arrays(params, scene.attention_array(), distance_matrix(scene.coords()))
        analytic = backward_fn(params, scene, trace, 2.0 * trace.o_gated)
        numeric = fd_gradient(params, scene, squared_output_loss, h)
        errors.append(
            rel_error(
                np.concatenate([analytic.flat(), analytic.d_attention]),
                np.concatenate([numeric.flat(), numeric.d_attention]),
            )
        )
    return errors
