import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from countgraph import plf as plf_mod
from countgraph.plf import PLF, from_dict, plf_eval, plf_grad, plf_init_identity, plf_sample, to_dict

weight_vectors = st.lists(
    st.floats(-1e6, 1e6, allow_nan=False), min_size=1, max_size=24
).map(np.array)


def test_identity_quarter():
    assert plf_eval(plf_init_identity(16), 0.25) == pytest.approx(0.25, abs=1e-15)


def test_identity_examples():
    assert plf_eval(plf_init_identity(16), 0.7) == pytest.approx(0.7, abs=1e-12)
    f1 = plf_init_identity(1)
    for x in (0.0, 0.13, 0.5, 1.0):
        assert plf_eval(f1, x) == pytest.approx(x, abs=1e-15)
    f = plf_init_identity(16)
    assert plf_eval(f, 0.2) <= plf_eval(f, 0.9)


def test_two_segment_example():
    # increments (0.25, 0.75); first segment saturates at x = 0.5
    assert plf_eval(PLF([1.0, 3.0]), 0.5) == pytest.approx(0.25, abs=1e-12)


def test_zero_segments_rejected():
    with pytest.raises(ValueError):
        plf_init_identity(0)


def test_sample():
    np.testing.assert_allclose(plf_sample(plf_init_identity(16), 3), [(0, 0), (0.5, 0.5), (1, 1)], atol=1e-12)
    np.testing.assert_allclose(plf_sample(PLF([0.3, -2.0, 5.0]), 2), [(0, 0), (1, 1)], atol=1e-12)
    np.testing.assert_allclose(plf_sample(PLF([1.0, 3.0]), 3), [(0, 0), (0.5, 0.25), (1, 1)], atol=1e-12)
    with pytest.raises(ValueError):
        plf_sample(plf_init_identity(4), 1)


def test_out_of_range_inputs_clamped():
    f = PLF([1.0, 3.0])
    plf_mod.reset_clamp_count()
    assert plf_eval(f, -0.5) == 0.0
    assert plf_eval(f, 1.5) == pytest.approx(1.0)
    assert plf_mod.clamp_count == 2


@given(weight_vectors)
def test_boundaries(w):
    f = PLF(w)
    assert abs(plf_eval(f, 0.0)) <= 1e-12
    assert abs(plf_eval(f, 1.0) - 1.0) <= 1e-12


@given(weight_vectors, st.floats(0, 1), st.floats(0, 1))
def test_monotone(w, x, y):
    f = PLF(w)
    lo, hi = min(x, y), max(x, y)
    assert plf_eval(f, lo) <= plf_eval(f, hi) + 1e-15


def test_identity_slope():
    f = plf_init_identity(16)
    for x in (0.01, 0.3, 0.77):
        assert plf_grad(f, x)[0] == pytest.approx(1.0, abs=1e-12)


def test_left_segment_slope_at_knot():
    f = PLF([1.0, 3.0])
    assert plf_grad(f, 0.5)[0] == pytest.approx(0.5)
    assert plf_grad(f, 0.5 + 1e-9)[0] == pytest.approx(1.5)


@given(weight_vectors)
def test_weight_grad_vanishes_at_one(w):
    _, dw = plf_grad(PLF(w), 1.0)
    assert np.max(np.abs(dw)) <= 1e-12 * max(1.0, 1.0 / (np.abs(w).sum() + 1e-12))


def _fd(f, x, h=1e-6):
    dx = (plf_eval(f, x + h) - plf_eval(f, x - h)) / (2 * h)
    dw = np.zeros(f.d)
    for k in range(f.d):
        up, down = f.weights.copy(), f.weights.copy()
        up[k] += h
        down[k] -= h
        dw[k] = (plf_eval(PLF(up), x) - plf_eval(PLF(down), x)) / (2 * h)
    return dx, dw


def _rel(a, b):
    a, b = np.atleast_1d(a), np.atleast_1d(b)
    return np.max(np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), 1e-8))


def test_gradients_match_finite_differences(rng):
    checked = 0
    while checked < 100:
        d = int(rng.integers(1, 20))
        w = rng.uniform(0.05, 3.0, d) * rng.choice([-1, 1], d)
        x = rng.uniform(0, 1)
        if np.min(np.abs(x * d - np.round(x * d))) / d < 1e-3:
            continue
        f = PLF(w)
        dx, dw = plf_grad(f, x)
        fdx, fdw = _fd(f, x)
        assert _rel(dx, fdx) < 1e-5
        assert _rel(dw, fdw) < 1e-5
        checked += 1


def test_weight_vjp_matches_pointwise(rng):
    f = PLF(rng.normal(size=9))
    x = rng.uniform(0, 1, (4, 5))
    g = rng.normal(size=(4, 5))
    expected = sum(g[i, j] * plf_grad(f, x[i, j])[1] for i in range(4) for j in range(5))
    np.testing.assert_allclose(f.weight_vjp(x, g), expected, rtol=1e-12, atol=1e-14)


def test_all_zero_weights_give_identity():
    f = PLF(np.zeros(8))
    assert plf_eval(f, 0.3) == pytest.approx(0.3, abs=1e-12)


def test_dict_round_trip():
    f = PLF([0.1, -2.5, 3.0])
    assert from_dict(to_dict(f)) == f
    with pytest.raises(ValueError):
        from_dict({"d": 2, "raw_weights": [1.0]})


@settings(max_examples=50)
@given(weight_vectors)
def test_vectorised_matches_scalar(w):
    f = PLF(w)
    xs = np.linspace(0, 1, 37)
    np.testing.assert_array_equal(f(xs), [plf_eval(f, x) for x in xs])
