import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from stylecast import nn


def test_affine_identity_weight():
    out = nn.affine(np.array([[1.0, 2.0]]), np.eye(2), np.zeros(2))
    np.testing.assert_array_equal(out, [[1.0, 2.0]])


def test_affine_hand_arithmetic():
    out = nn.affine(np.array([[1.0, 1.0]]), np.array([[2.0, 3.0], [4.0, 5.0]]), np.ones(2))
    np.testing.assert_array_equal(out, [[7.0, 9.0]])


def test_affine_zero_input_gives_bias():
    b = np.array([0.5, -1.0, 2.0])
    out = nn.affine(np.zeros((4, 2)), np.random.default_rng(0).normal(size=(2, 3)), b)
    np.testing.assert_array_equal(out, np.tile(b, (4, 1)))


def test_affine_shape_mismatch_names_shapes():
    with pytest.raises(nn.DimensionError, match=r"\(1, 3\).*\(2, 2\)"):
        nn.affine(np.zeros((1, 3)), np.zeros((2, 2)), np.zeros(2))


def test_affine_backward_matches_finite_differences():
    rng = np.random.default_rng(1)
    x, w, b = rng.normal(size=(3, 4)), rng.normal(size=(4, 2)), rng.normal(size=2)
    up = rng.normal(size=(3, 2))

    def f():
        return float((nn.affine(x, w, b) * up).sum())

    dx, dw, db = nn.affine_backward(up, x, w)
    np.testing.assert_allclose(dx, nn.numerical_gradient(f, x), atol=1e-7)
    np.testing.assert_allclose(dw, nn.numerical_gradient(f, w), atol=1e-7)
    np.testing.assert_allclose(db, nn.numerical_gradient(f, b), atol=1e-7)


def test_cross_entropy_uniform():
    loss, _ = nn.softmax_cross_entropy(np.zeros(2), 0)
    assert loss == pytest.approx(math.log(2))


def test_cross_entropy_confident():
    loss, _ = nn.softmax_cross_entropy(np.array([10.0, -10.0]), 0)
    assert loss < 1e-8


def test_cross_entropy_hand_value():
    loss, _ = nn.softmax_cross_entropy(np.array([1.0, 2.0, 3.0]), 2)
    expected = -math.log(math.exp(3) / (math.exp(1) + math.exp(2) + math.exp(3)))
    assert loss == pytest.approx(expected, abs=1e-12)
    assert loss == pytest.approx(0.40761, abs=1e-5)


def test_cross_entropy_gradient_is_probs_minus_onehot():
    logits = np.array([0.3, -1.2, 2.0, 0.0])
    loss, probs = nn.softmax_cross_entropy(logits, 1)
    grad = nn.softmax_cross_entropy_backward(np.array(1.0), probs, np.array(1))
    onehot = np.eye(4)[1]
    np.testing.assert_allclose(grad, nn.softmax(logits) - onehot, atol=1e-12)


def test_cross_entropy_index_out_of_range():
    with pytest.raises(IndexError):
        nn.softmax_cross_entropy(np.zeros(3), 3)


@given(arrays(np.float64, st.integers(1, 12), elements=st.floats(-50, 50)))
def test_softmax_is_a_distribution(logits):
    p = nn.softmax(logits)
    assert np.all(p >= 0)
    assert abs(p.sum() - 1.0) <= 1e-6


def test_layer_norm_constant_vector():
    out, _ = nn.layer_norm(np.array([5.0, 5.0, 5.0]), np.ones(3), np.zeros(3))
    np.testing.assert_allclose(out, 0.0, atol=1e-12)


def test_layer_norm_hand_value():
    out, _ = nn.layer_norm(np.array([1.0, 2.0, 3.0]), np.ones(3), np.zeros(3), eps=1e-12)
    z = 1.0 / math.sqrt(2.0 / 3.0)
    np.testing.assert_allclose(out, [-z, 0.0, z], atol=1e-9)
    np.testing.assert_allclose(out, [-1.22474, 0.0, 1.22474], atol=1e-5)


def test_layer_norm_zero_gain_gives_bias():
    b = np.array([0.1, 0.2, 0.3, 0.4])
    out, _ = nn.layer_norm(np.random.default_rng(2).normal(size=(3, 4)), np.zeros(4), b)
    np.testing.assert_allclose(out, np.tile(b, (3, 1)))


def test_layer_norm_backward_matches_finite_differences():
    rng = np.random.default_rng(3)
    x, g, b = rng.normal(size=(2, 5)), rng.normal(size=5), rng.normal(size=5)
    up = rng.normal(size=(2, 5))

    def f():
        return float((nn.layer_norm(x, g, b)[0] * up).sum())

    dx, dg, db = nn.layer_norm_backward(up, nn.layer_norm(x, g, b)[1])
    for analytic, param in ((dx, x), (dg, g), (db, b)):
        np.testing.assert_allclose(analytic, nn.numerical_gradient(f, param), rtol=1e-4, atol=1e-7)


def _reference_lstm_step(h, c, x, wx, wh, b):
    """Scalar-loop LSTM step written independently of the vectorised one."""
    hidden = len(h)
    z = [sum(x[k] * wx[k][j] for k in range(len(x))) + sum(h[k] * wh[k][j] for k in range(hidden)) + b[j]
         for j in range(4 * hidden)]
    sig = lambda v: 1.0 / (1.0 + math.exp(-v))
    h_new, c_new = [], []
    for j in range(hidden):
        i, f = sig(z[j]), sig(z[hidden + j])
        g, o = math.tanh(z[2 * hidden + j]), sig(z[3 * hidden + j])
        cj = f * c[j] + i * g
        c_new.append(cj)
        h_new.append(o * math.tanh(cj))
    return h_new, c_new


def test_cell_zero_params_give_zero_hidden():
    h, c, _ = nn.recurrent_cell_step(np.zeros(3), np.zeros(3), np.array([1.0, -2.0]),
                                     np.zeros((2, 12)), np.zeros((3, 12)), np.zeros(12))
    np.testing.assert_array_equal(h, 0.0)


def test_cell_matches_independent_implementation():
    rng = nn.make_rng(7)
    h0, c0, x = rng.normal(size=2), rng.normal(size=2), rng.normal(size=3)
    wx, wh, b = rng.normal(size=(3, 8)), rng.normal(size=(2, 8)), rng.normal(size=8)
    h, c, _ = nn.recurrent_cell_step(h0, c0, x, wx, wh, b)
    ref_h, ref_c = _reference_lstm_step(h0.tolist(), c0.tolist(), x.tolist(), wx.tolist(), wh.tolist(), b.tolist())
    np.testing.assert_allclose(h, ref_h, atol=1e-12)
    np.testing.assert_allclose(c, ref_c, atol=1e-12)


def test_cell_dimension_mismatch():
    with pytest.raises(nn.DimensionError):
        nn.recurrent_cell_step(np.zeros(3), np.zeros(3), np.zeros(2), np.zeros((2, 8)), np.zeros((3, 12)), np.zeros(12))


def test_cell_gradients_match_finite_differences():
    rng = np.random.default_rng(4)
    h0, c0, x = rng.normal(size=3), rng.normal(size=3), rng.normal(size=2)
    wx, wh, b = rng.normal(size=(2, 12)), rng.normal(size=(3, 12)), rng.normal(size=12)
    uh, uc = rng.normal(size=3), rng.normal(size=3)

    def f():
        h, c, _ = nn.recurrent_cell_step(h0, c0, x, wx, wh, b)
        return float(h @ uh + c @ uc)

    _, _, cache = nn.recurrent_cell_step(h0, c0, x, wx, wh, b)
    grads = nn.recurrent_cell_step_backward(uh, uc, cache, h0, x, wx, wh)
    for analytic, param in zip(grads, (h0, c0, x, wx, wh, b)):
        numeric = nn.numerical_gradient(f, param)
        frac, ok = nn.gradient_agreement(analytic.reshape(param.shape), numeric, rtol=1e-4)
        assert ok and frac == 1.0


def test_lstm_sequence_gradients_with_padding():
    rng = np.random.default_rng(5)
    xw = rng.normal(size=(2, 4, 8))
    mask = np.array([[1, 1, 1, 1], [1, 1, 0, 0]], dtype=float)
    h0, c0, wh = rng.normal(size=(2, 2)), rng.normal(size=(2, 2)), rng.normal(size=(2, 8))
    up = rng.normal(size=(2, 4, 2))
    for reverse in (False, True):
        def f():
            return float((nn.lstm_sequence(xw, mask, h0, c0, wh, reverse)[0] * up).sum())

        hs, cache = nn.lstm_sequence(xw, mask, h0, c0, wh, reverse)
        dxw, dh0, dc0, dwh = nn.lstm_sequence_backward(up, cache)
        for analytic, param in ((dxw, xw), (dh0, h0), (dc0, c0), (dwh, wh)):
            np.testing.assert_allclose(analytic, nn.numerical_gradient(f, param), rtol=1e-4, atol=1e-7)


def _attention_params(rng, hq, hm, a):
    return rng.normal(size=(hq, a)), rng.normal(size=(hm, a)), rng.normal(size=a), rng.normal(size=a)


def test_attention_singleton():
    rng = np.random.default_rng(6)
    s = rng.normal(size=(1, 3))
    ctx, w, _ = nn.mlp_attention(rng.normal(size=3), s, *_attention_params(rng, 3, 3, 4))
    np.testing.assert_allclose(w, [1.0])
    np.testing.assert_allclose(ctx, s[0])


def test_attention_identical_states_split_evenly():
    rng = np.random.default_rng(7)
    s = np.tile(rng.normal(size=3), (2, 1))
    ctx, w, _ = nn.mlp_attention(rng.normal(size=3), s, *_attention_params(rng, 3, 3, 4))
    np.testing.assert_allclose(w, [0.5, 0.5])
    assert abs(w.sum() - 1.0) <= 1e-6


def test_attention_empty_memory():
    rng = np.random.default_rng(8)
    with pytest.raises(ValueError):
        nn.mlp_attention(np.zeros(3), np.zeros((0, 3)), *_attention_params(rng, 3, 3, 4))


def test_attention_gradients_match_finite_differences():
    rng = np.random.default_rng(9)
    q, mem = rng.normal(size=(2, 3, 4)), rng.normal(size=(2, 5, 4))
    wq, wk, b, v = _attention_params(rng, 4, 4, 3)
    mask = np.array([[1, 1, 1, 1, 1], [1, 1, 1, 0, 0]], dtype=float)
    up = rng.normal(size=(2, 3, 4))

    def f():
        return float((nn.mlp_attention(q, mem, wq, wk, b, v, mask)[0] * up).sum())

    _, _, cache = nn.mlp_attention(q, mem, wq, wk, b, v, mask)
    grads = nn.mlp_attention_backward(up, cache)
    for analytic, param in zip(grads, (q, mem, wq, wk, b, v)):
        np.testing.assert_allclose(analytic, nn.numerical_gradient(f, param), rtol=1e-4, atol=1e-7)


def test_dropout_zero_is_identity():
    assert nn.dropout_mask(nn.make_rng(0), (3, 4), 0.0) is None
    x = np.arange(6.0)
    assert nn.apply_mask(x, None) is x


def test_dropout_preserves_expectation():
    mask = nn.dropout_mask(nn.make_rng(0), (200_000,), 0.2)
    assert set(np.unique(mask)) == {0.0, 1.25}
    assert mask.mean() == pytest.approx(1.0, abs=0.01)


def _store(value):
    store = nn.ParamStore()
    store.add("p", np.array(value, dtype=float))
    return store


def test_adam_zero_gradient_leaves_params():
    store = _store([1.0, -2.0])
    store.adam_step(0.1)
    np.testing.assert_array_equal(store["p"], [1.0, -2.0])
    np.testing.assert_array_equal(store.m["p"], 0.0)
    assert store.step == 1


def test_adam_zero_gradient_decays_moments():
    store = _store([1.0])
    store.grads["p"][:] = 2.0
    store.adam_step(0.1)
    m, v = store.m["p"].copy(), store.v["p"].copy()
    store.zero_grad()
    store.adam_step(0.1)
    np.testing.assert_allclose(store.m["p"], 0.9 * m)
    np.testing.assert_allclose(store.v["p"], 0.999 * v)


def test_adam_first_step_hand_value():
    store = _store([1.0])
    store.grads["p"][:] = 1.0
    store.adam_step(0.1)
    # m_hat = 1, v_hat = 1, step = lr * 1 / (1 + eps)
    assert store["p"][0] == pytest.approx(1.0 - 0.1 / (1.0 + 1e-8), abs=1e-12)
    assert store["p"][0] == pytest.approx(0.9, abs=1e-6)


def test_adam_is_deterministic():
    def run():
        store = _store(nn.make_rng(3).normal(size=5))
        for _ in range(3):
            store.grads["p"][:] = np.sin(store["p"])
            store.adam_step(0.01)
        return store["p"].copy()

    assert run().tobytes() == run().tobytes()


def test_adam_non_finite_gradient_names_param():
    store = _store([1.0])
    store.grads["p"][:] = np.nan
    with pytest.raises(nn.NonFiniteGradientError, match="'p'"):
        store.adam_step(0.1)


def test_rng_reproducible():
    assert nn.make_rng(11).random(5).tobytes() == nn.make_rng(11).random(5).tobytes()


@settings(max_examples=30)
@given(st.integers(1, 6))
def test_clip_grads_bounds_norm(n):
    store = _store(np.zeros(n))
    store.grads["p"][:] = 10.0
    store.clip_grads(5.0)
    assert store.grad_norm() <= 5.0 + 1e-9
