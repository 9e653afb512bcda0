import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from countgraph.counting import (
    CountParams,
    Scene,
    adjacency,
    assemble_C,
    backward,
    backward_arrays,
    confidence,
    count_from_C,
    dedup_intra,
    forward,
    forward_arrays,
    scaling,
    similarity,
    stack_scenes,
    to_khot,
)
from countgraph.geometry import Box, distance_matrix
from countgraph.oracle import exact_count, random_params, random_scene

from strategies import ideal_scenes, random_boxes

ID = CountParams.identity()
f = ID.f


def test_adjacency_examples():
    np.testing.assert_array_equal(adjacency([1, 1, 0]), [[1, 1, 0], [1, 1, 0], [0, 0, 0]])
    np.testing.assert_array_equal(adjacency([0, 0, 0]), np.zeros((3, 3)))
    np.testing.assert_allclose(adjacency([0.5, 0.2]), [[0.25, 0.1], [0.1, 0.04]], atol=1e-15)


def test_dedup_intra_examples():
    A = adjacency([1, 1])
    same = np.zeros((2, 2))
    np.testing.assert_array_equal(dedup_intra(A, same, f(1), f(2)), np.zeros((2, 2)))
    apart = np.array([[0.0, 1.0], [1.0, 0.0]])
    np.testing.assert_allclose(dedup_intra(A, apart, f(1), f(2)), [[0, 1], [1, 0]], atol=1e-12)


def test_dedup_intra_zero_diagonal_any_functions(rng):
    p = random_params(rng)
    a = rng.uniform(0, 1, 5)
    D = distance_matrix(random_boxes(rng, 5))
    np.testing.assert_array_equal(np.diag(dedup_intra(adjacency(a), D, p.f(1), p.f(2))), 0.0)


def test_similarity_examples(rng):
    p = random_params(rng)
    a = rng.uniform(0, 1, 6)
    D = distance_matrix(random_boxes(rng, 6))
    np.testing.assert_allclose(np.diag(similarity(a, D, p.f(3), p.f(4))), 1.0, atol=1e-12)
    np.testing.assert_allclose(similarity([1, 1], np.zeros((2, 2)), f(3), f(4)), np.ones((2, 2)), atol=1e-12)
    apart = np.array([[0.0, 1.0], [1.0, 0.0]])
    np.testing.assert_allclose(similarity([1, 0], apart, f(3), f(4)), np.eye(2), atol=1e-12)


def test_scaling_examples():
    np.testing.assert_array_equal(scaling(np.eye(3)), np.ones(3))
    np.testing.assert_allclose(scaling(np.ones((3, 3))), [1 / 3] * 3)
    np.testing.assert_allclose(scaling(np.array([[1, 1, 0], [1, 1, 0], [0, 0, 1.0]])), [0.5, 0.5, 1])


def test_scaling_rejects_missing_self_similarity():
    with pytest.raises(AssertionError):
        scaling(np.zeros((2, 2)))


def test_assemble_C_examples():
    C = assemble_C(np.zeros((2, 2)), np.ones(2), np.array([1.0, 1.0]), f(1))
    np.testing.assert_allclose(C, np.eye(2), atol=1e-12)
    C = assemble_C(np.zeros((2, 2)), np.ones(2), np.zeros(2), f(1))
    np.testing.assert_array_equal(C, np.zeros((2, 2)))


def test_count_from_C_examples():
    assert count_from_C(np.zeros((3, 3))) == 0.0
    assert count_from_C(np.eye(1)) == 1.0


def test_to_khot_examples():
    np.testing.assert_array_equal(to_khot(2.0, 4), [0, 0, 1, 0, 0])
    np.testing.assert_allclose(to_khot(2.3, 4), [0, 0, 0.7, 0.3, 0], atol=1e-12)
    np.testing.assert_array_equal(to_khot(7.0, 4), [0, 0, 0, 0, 1])


@given(st.floats(0, 50), st.integers(1, 20))
def test_khot_sums_to_one_with_two_nonzeros(c, n):
    o = to_khot(c, n)
    assert o.shape == (n + 1,)
    assert abs(o.sum() - 1.0) <= 1e-12
    assert np.count_nonzero(o) <= 2


def test_confidence_examples():
    a = np.array([1.0, 0.0, 1.0])
    D = np.array([[0, 1, 1], [1, 0, 0], [1, 0, 0.0]])
    p_a, p_D, gate = confidence(a, D, ID)
    assert (p_a, p_D) == pytest.approx((0.5, 0.5))
    assert gate == pytest.approx(1.0)
    p_a, _, _ = confidence(np.full(3, 0.5), D, ID)
    assert p_a == pytest.approx(0.0, abs=1e-12)


def test_confidence_center_shift():
    a = np.array([1.0, 1.0, 0.6])
    D = np.zeros((3, 3))
    low = CountParams.identity(theta=0.2)
    p_a, p_D, gate = confidence(a, D, low)
    assert p_a == pytest.approx((0.8 + 0.8 + 0.4) / 3)
    assert p_D == pytest.approx(0.2)
    assert gate == pytest.approx(p_a + p_D)
    # off-diagonal distances of 1 push the sum past 1; clamped before f8
    p_a, p_D, gate = confidence(np.ones(3), 1.0 - np.eye(3), low)
    assert (p_a, p_D) == pytest.approx((0.8, (6 * 0.8 + 3 * 0.2) / 9))
    assert gate == pytest.approx(1.0)


def test_worked_scene(worked_scene):
    t = forward(ID, worked_scene)
    np.testing.assert_allclose(t.s, [0.5, 0.5, 1.0, 1.0], atol=1e-12)
    assert t.C.sum() == pytest.approx(4.0, abs=1e-12)
    assert t.c == pytest.approx(2.0, abs=1e-12)
    np.testing.assert_allclose(t.o, [0, 0, 1, 0, 0], atol=1e-12)
    assert t.gate == pytest.approx(1.0)
    np.testing.assert_allclose(t.o_gated, t.o, atol=1e-12)


def test_zero_attention_scene(rng):
    sc = Scene(random_boxes(rng, 4), (0.0,) * 4)
    t = forward(ID, sc)
    assert t.c == 0.0
    np.testing.assert_array_equal(t.o, [1, 0, 0, 0, 0])


def test_single_proposal():
    t = forward(ID, Scene((Box(0.2, 0.2, 0.5, 0.6),), (1.0,)))
    assert t.c == pytest.approx(1.0, abs=1e-12)


def test_trace_invariants(rng):
    for _ in range(50):
        p, sc = random_params(rng), random_scene(rng, 8)
        t = forward(p, sc)
        np.testing.assert_array_equal(t.A, t.A.T)
        assert np.all((t.A >= 0) & (t.A <= 1))
        assert np.all(t.C >= 0)
        assert abs(t.o.sum() - 1) <= 1e-12
        assert np.count_nonzero(t.o) <= 2
        assert 0 <= t.p_a <= 0.5 and 0 <= t.p_D <= 0.5
        np.testing.assert_array_equal(t.o_gated, t.gate * t.o)


@settings(max_examples=200)
@given(ideal_scenes())
def test_ideal_exactness(scene):
    assert forward(ID, scene).c == pytest.approx(exact_count(scene), abs=1e-9)


@settings(max_examples=100)
@given(ideal_scenes(max_n=9), st.data())
def test_duplicate_insensitive(scene, data):
    relevant = [i for i, v in enumerate(scene.attention) if v == 1.0]
    if not relevant:
        return
    i = data.draw(st.sampled_from(relevant))
    bigger = Scene(scene.boxes + (scene.boxes[i],), scene.attention + (1.0,))
    assert forward(ID, bigger).c == pytest.approx(forward(ID, scene).c, abs=1e-9)


def test_permutation_equivariance(rng):
    for _ in range(30):
        p, sc = random_params(rng), random_scene(rng, 8)
        perm = rng.permutation(sc.n)
        shuffled = Scene(tuple(sc.boxes[i] for i in perm), tuple(sc.attention[i] for i in perm))
        t, u = forward(p, sc), forward(p, shuffled)
        for name in ("c", "p_a", "p_D", "gate"):
            assert getattr(u, name) == pytest.approx(getattr(t, name), abs=1e-12)
        np.testing.assert_allclose(u.o_gated, t.o_gated, atol=1e-12)
        np.testing.assert_allclose(u.C, t.C[np.ix_(perm, perm)], atol=1e-12)


def test_edge_cases_finite():
    box = Box(0.1, 0.1, 0.3, 0.3)
    for sc in (
        Scene((box,), (0.0,)),
        Scene((box,), (1.0,)),
        Scene((box, box), (0.0, 0.0)),
        Scene((Box(0.5, 0.5, 0.5, 0.5),) * 3, (1.0, 0.3, 0.0)),
    ):
        for p in (ID, CountParams.identity(theta=0.2)):
            t = forward(p, sc)
            for v in (t.A, t.C, t.s, t.sim, t.o, t.o_gated, t.c, t.p_a, t.p_D):
                assert np.all(np.isfinite(v))


def test_backward_zero_upstream(rng):
    p, sc = random_params(rng), random_scene(rng)
    t = forward(p, sc)
    g = backward(p, sc, t, np.zeros(sc.n + 1))
    assert not np.any(g.flat())
    assert not np.any(g.d_attention)


def test_backward_finite_at_zero_attention(rng):
    sc = Scene(random_boxes(rng, 5), (0.0,) * 5)
    t = forward(ID, sc)
    g = backward(ID, sc, t, np.ones(6))
    assert np.all(np.isfinite(g.d_attention))
    assert np.all(np.isfinite(g.flat()))


def test_backward_rejects_mismatched_shapes(rng):
    sc = random_scene(rng, 4)
    t = forward(ID, sc)
    with pytest.raises(ValueError):
        backward(ID, sc, t, np.zeros(sc.n + 3))


def test_batched_matches_single(rng):
    params = random_params(rng)
    scenes = [Scene(random_boxes(rng, 6), tuple(rng.uniform(0, 1, 6))) for _ in range(5)]
    a, D = stack_scenes(scenes)
    batch = forward_arrays(params, a, D)
    up = rng.normal(size=(5, 7))
    bg = backward_arrays(params, batch, up)
    total = np.zeros_like(bg.flat())
    for i, sc in enumerate(scenes):
        t = forward(params, sc)
        np.testing.assert_allclose(batch.o_gated[i], t.o_gated, atol=1e-14)
        g = backward(params, sc, t, up[i])
        np.testing.assert_allclose(bg.d_attention[i], g.d_attention, atol=1e-12)
        total += g.flat()
    np.testing.assert_allclose(bg.flat(), total, atol=1e-10)


def test_stack_rejects_mixed_sizes(rng):
    with pytest.raises(ValueError):
        stack_scenes([random_scene(rng, 1), Scene(random_boxes(rng, 3), (0.5,) * 3)])


def test_scene_validation():
    b = Box(0, 0, 1, 1)
    with pytest.raises(ValueError):
        Scene((), ())
    with pytest.raises(ValueError):
        Scene((b,), (0.5, 0.5))
    with pytest.raises(ValueError):
        Scene((b,), (1.5,))
    with pytest.raises(ValueError):
        Scene((b,), (1.0,), true_count=2)


def test_params_validation():
    with pytest.raises(ValueError):
        CountParams(ID.fs[:7])
    with pytest.raises(ValueError):
        CountParams.identity(theta=1.0)
