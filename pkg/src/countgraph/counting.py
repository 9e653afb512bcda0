"""The counting module: proposal graph, deduplication, k-hot count and confidence gate.

Every array routine accepts optional leading batch axes: attention ``(..., n)``,
distances ``(..., n, n)``.  Parameter gradients from :func:`backward_arrays`
are summed over the batch.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .geometry import Box, boxes_to_array, distance_matrix
from .plf import DEFAULT_SEGMENTS, PLF, plf_init_identity

NUM_FUNCTIONS = 8
SQRT_GUARD = 1e-8


@dataclass(frozen=True)
class CountParams:
    """The eight learnable functions ``f1..f8`` (stored 0-based) and the confidence center."""

    fs: tuple[PLF, ...]
    theta: float = 0.5

    def __post_init__(self) -> None:
        if len(self.fs) != NUM_FUNCTIONS:
            raise ValueError(f"expected {NUM_FUNCTIONS} functions, got {len(self.fs)}")
        if not 0.0 < self.theta < 1.0:
            raise ValueError(f"theta must lie in (0, 1), got {self.theta}")
        object.__setattr__(self, "fs", tuple(self.fs))

    @classmethod
    def identity(cls, d: int = DEFAULT_SEGMENTS, theta: float = 0.5) -> "CountParams":
        return cls(tuple(plf_init_identity(d) for _ in range(NUM_FUNCTIONS)), theta)

    def f(self, k: int) -> PLF:
        """1-based accessor matching the usual ``f1..f8`` naming."""
        return self.fs[k - 1]

    def flat(self) -> np.ndarray:
        return np.concatenate([f.weights for f in self.fs])

    def with_flat(self, flat: np.ndarray) -> "CountParams":
        out, start = [], 0
        for f in self.fs:
            out.append(PLF(flat[start:start + f.d]))
            start += f.d
        return CountParams(tuple(out), self.theta)


@dataclass(frozen=True)
class Scene:
    boxes: tuple[Box, ...]
    attention: tuple[float, ...]
    true_count: int | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "boxes", tuple(self.boxes))
        object.__setattr__(self, "attention", tuple(float(v) for v in self.attention))
        n = len(self.boxes)
        if n < 1:
            raise ValueError("a scene needs at least one proposal")
        if len(self.attention) != n:
            raise ValueError(f"{n} boxes but {len(self.attention)} attention weights")
        if any(not 0.0 <= v <= 1.0 for v in self.attention):
            raise ValueError("attention weights must lie in [0, 1]")
        if self.true_count is not None and not 0 <= self.true_count <= n:
            raise ValueError(f"true_count {self.true_count} outside 0..{n}")

    @property
    def n(self) -> int:
        return len(self.boxes)

    def coords(self) -> np.ndarray:
        return boxes_to_array(self.boxes)

    def attention_array(self) -> np.ndarray:
        return np.array(self.attention, dtype=np.float64)

    def to_json(self) -> dict:
        return {
            "boxes": [list(b.as_tuple()) for b in self.boxes],
            "attention": list(self.attention),
            "true_count": self.true_count,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "Scene":
        return cls(
            boxes=tuple(Box.from_seq(b) for b in obj["boxes"]),
            attention=tuple(obj["attention"]),
            true_count=obj.get("true_count"),
        )


@dataclass
class ForwardTrace:
    a: np.ndarray
    A: np.ndarray
    D: np.ndarray
    A_tilde: np.ndarray
    sim: np.ndarray
    s: np.ndarray
    C: np.ndarray
    c: np.ndarray
    o: np.ndarray
    p_a: np.ndarray
    p_D: np.ndarray
    gate: np.ndarray
    o_gated: np.ndarray
    # intermediates kept only for the backward pass
    cache: dict = field(default_factory=dict, repr=False)

    @property
    def n(self) -> int:
        return int(self.a.shape[-1])

    def prediction(self) -> np.ndarray:
        return np.argmax(self.o_gated, axis=-1)


@dataclass
class CountGrads:
    d_fs: list[np.ndarray]
    d_attention: np.ndarray

    def flat(self) -> np.ndarray:
        return np.concatenate(self.d_fs)


def adjacency(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    return a[..., :, None] * a[..., None, :]


def dedup_intra(A: np.ndarray, D: np.ndarray, f1: PLF, f2: PLF) -> np.ndarray:
    """Remove intra-object edges: ``f1(A) * f2(D)``; the diagonal vanishes since ``f2(0) = 0``."""
    return f1(A) * f2(D)


def similarity(a: np.ndarray, D: np.ndarray, f3: PLF, f4: PLF) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    diff = np.abs(a[..., :, None] - a[..., None, :])
    return f3(1.0 - diff) * f4(1.0 - D)


def scaling(sim: np.ndarray) -> np.ndarray:
    rows = np.sum(sim, axis=-1)
    assert np.all(rows >= 1.0 - 1e-12), "similarity diagonal must be 1"
    return 1.0 / rows


def assemble_C(A_tilde: np.ndarray, s: np.ndarray, a: np.ndarray, f1: PLF) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    C = A_tilde * (s[..., :, None] * s[..., None, :])
    n = a.shape[-1]
    C[..., np.arange(n), np.arange(n)] += s * f1(a * a)
    return C


def count_from_C(C: np.ndarray) -> np.ndarray:
    total = np.sum(C, axis=(-2, -1))
    return np.sqrt(np.maximum(total, 0.0))


def to_khot(c, n: int) -> np.ndarray:
    """Linear interpolation between the one-hot vectors of the integers around ``c``."""
    c = np.clip(np.asarray(c, dtype=np.float64), 0.0, n)
    ks = np.arange(n + 1)
    return np.maximum(0.0, 1.0 - np.abs(c[..., None] - ks))


def confidence(a: np.ndarray, D: np.ndarray, params: CountParams):
    """Return ``(p_a, p_D, gate)``: mean distances of ``f6(a)``, ``f7(D)`` from theta, and ``f8`` of their sum."""
    theta = params.theta
    p_a = np.mean(np.abs(params.f(6)(a) - theta), axis=-1)
    p_D = np.mean(np.abs(params.f(7)(D) - theta), axis=(-2, -1))
    gate = params.f(8)(np.clip(p_a + p_D, 0.0, 1.0))
    return p_a, p_D, gate


def forward_arrays(params: CountParams, a: np.ndarray, D: np.ndarray) -> ForwardTrace:
    a = np.asarray(a, dtype=np.float64)
    D = np.asarray(D, dtype=np.float64)
    n = a.shape[-1]
    f1, f2, f3, f4 = (params.f(k) for k in (1, 2, 3, 4))

    A = adjacency(a)
    f1A, f2D = f1(A), f2(D)
    A_tilde = f1A * f2D

    delta = a[..., :, None] - a[..., None, :]
    u = 1.0 - np.abs(delta)
    v = 1.0 - D
    f3u, f4v = f3(u), f4(v)
    sim = f3u * f4v
    s = scaling(sim)

    aa = a * a
    f1aa = f1(aa)
    C = assemble_C(A_tilde, s, a, f1)
    c = count_from_C(C)
    o = to_khot(c, n)

    p_a, p_D, gate = confidence(a, D, params)
    o_gated = gate[..., None] * o

    cache = dict(f1A=f1A, f2D=f2D, delta=delta, u=u, v=v, f3u=f3u, f4v=f4v, aa=aa, f1aa=f1aa)
    return ForwardTrace(a, A, D, A_tilde, sim, s, C, c, o, p_a, p_D, gate, o_gated, cache)


def forward(params: CountParams, scene: Scene) -> ForwardTrace:
    return forward_arrays(params, scene.attention_array(), distance_matrix(scene.coords()))


def _khot_slope(c: np.ndarray, n: int, d_o: np.ndarray) -> np.ndarray:
    # right-segment convention: on [m, m+1) the mass moves from index m to m+1
    m = np.clip(np.floor(c).astype(np.int64), 0, n - 1)
    lo = np.take_along_axis(d_o, m[..., None], axis=-1)[..., 0]
    hi = np.take_along_axis(d_o, (m + 1)[..., None], axis=-1)[..., 0]
    return hi - lo


def backward_arrays(params: CountParams, trace: ForwardTrace, d_o_gated: np.ndarray) -> CountGrads:
    """Reverse-mode gradients of ``sum(d_o_gated * o_gated)``."""
    t, k = trace, trace.cache
    n = t.n
    d_o_gated = np.asarray(d_o_gated, dtype=np.float64)
    if d_o_gated.shape != t.o_gated.shape:
        raise ValueError(f"upstream gradient shape {d_o_gated.shape} != output shape {t.o_gated.shape}")
    f = params.f
    theta = params.theta
    d_fs = [np.zeros(fn.d) for fn in params.fs]
    a = t.a

    # confidence gate
    d_gate = np.sum(d_o_gated * t.o, axis=-1)
    z = t.p_a + t.p_D
    d_z = np.where((z > 0.0) & (z < 1.0), d_gate * f(8).slope(np.clip(z, 0.0, 1.0)), 0.0)
    d_fs[7] += f(8).weight_vjp(np.clip(z, 0.0, 1.0), d_gate)
    f6a = f(6)(a)
    d_f6a = d_z[..., None] * np.sign(f6a - theta) / n
    d_fs[5] += f(6).weight_vjp(a, d_f6a)
    d_a = d_f6a * f(6).slope(a)
    f7D = f(7)(t.D)
    d_f7D = d_z[..., None, None] * np.sign(f7D - theta) / (n * n)
    d_fs[6] += f(7).weight_vjp(t.D, d_f7D)

    # k-hot interpolation and sqrt
    d_o = d_o_gated * t.gate[..., None]
    d_c = np.where(t.c < n, _khot_slope(t.c, n, d_o), 0.0)
    safe_c = np.where(t.c >= SQRT_GUARD, t.c, 1.0)
    d_total = np.where(t.c >= SQRT_GUARD, d_c / (2.0 * safe_c), 0.0)

    # C = A_tilde * s s^T + diag(s * f1(a*a)); every entry of C receives d_total
    s = t.s
    d_At = d_total[..., None, None] * (s[..., :, None] * s[..., None, :])
    At_s = t.A_tilde @ s[..., None]
    At_T_s = np.swapaxes(t.A_tilde, -1, -2) @ s[..., None]
    d_s = d_total[..., None] * (At_s[..., 0] + At_T_s[..., 0] + k["f1aa"])
    d_f1aa = d_total[..., None] * s

    # s = 1 / rowsum(sim)
    d_rows = -d_s * s * s
    d_sim = np.broadcast_to(d_rows[..., :, None], t.sim.shape)
    d_f3u = d_sim * k["f4v"]
    d_f4v = d_sim * k["f3u"]
    d_fs[2] += f(3).weight_vjp(k["u"], d_f3u)
    d_fs[3] += f(4).weight_vjp(k["v"], d_f4v)
    d_delta = -(d_f3u * f(3).slope(k["u"])) * np.sign(k["delta"])
    d_a = d_a + np.sum(d_delta, axis=-1) - np.sum(d_delta, axis=-2)

    # A_tilde = f1(A) * f2(D)
    d_f1A = d_At * k["f2D"]
    d_fs[0] += f(1).weight_vjp(t.A, d_f1A)
    d_fs[1] += f(2).weight_vjp(t.D, d_At * k["f1A"])
    d_A = d_f1A * f(1).slope(t.A)
    d_a = d_a + (d_A @ a[..., None])[..., 0] + (np.swapaxes(d_A, -1, -2) @ a[..., None])[..., 0]

    d_fs[0] += f(1).weight_vjp(k["aa"], d_f1aa)
    d_a = d_a + 2.0 * a * d_f1aa * f(1).slope(k["aa"])

    return CountGrads(d_fs, d_a)


def backward(params: CountParams, scene: Scene, trace: ForwardTrace, d_o_gated) -> CountGrads:
    if trace.a.shape != (scene.n,):
        raise ValueError(f"trace is for {trace.a.shape} proposals, scene has {scene.n}")
    return backward_arrays(params, trace, d_o_gated)


def stack_scenes(scenes: Sequence[Scene]) -> tuple[np.ndarray, np.ndarray]:
    """Batch scenes of equal size into ``(attention, distances)`` arrays."""
    sizes = {sc.n for sc in scenes}
    if len(sizes) != 1:
        raise ValueError(f"cannot batch scenes of different sizes {sorted(sizes)}")
    a = np.stack([sc.attention_array() for sc in scenes])
    D = distance_matrix(np.stack([sc.coords() for sc in scenes]))
    return a, D
