"""Autodiff engine: gradient correctness against finite differences."""

import numpy as np
import pytest

from macronas import numerics as nm

from helpers import assert_grads_close, central_diff_grads


def grad_of(build, arrays):
    """Analytic gradients of build(list of Tensors) -> scalar Tensor."""
    params = [nm.parameter(a.copy()) for a in arrays]
    out = build(params)
    grads = nm.backward(out)
    return [grads.get(p, np.zeros_like(p.data)) for p in params]


def check_against_fd(build, arrays, rel=1e-4):
    analytic = grad_of(build, arrays)

    def f(arrs):
        with nm.no_grad():
            return build([nm.constant(a) for a in arrs]).item()

    numeric = central_diff_grads(f, [a.copy() for a in arrays])
    for a, n in zip(analytic, numeric):
        assert_grads_close(a, n, rel=rel)


def test_square_gradient():
    x = nm.parameter(np.array(3.0))
    out = nm.mul(x, x)
    grads = nm.backward(out)
    assert grads[x] == pytest.approx(6.0)


def test_abs_subgradient():
    x = nm.parameter(np.array(-2.0))
    grads = nm.backward(nm.absolute(x))
    assert grads[x] == pytest.approx(-1.0)
    zero = nm.parameter(np.array(0.0))
    grads = nm.backward(nm.absolute(zero))
    assert grads[zero] == pytest.approx(0.0)


def test_leaky_relu_at_zero_uses_negative_slope():
    x = nm.parameter(np.array(0.0))
    grads = nm.backward(nm.leaky_relu(x, 0.2))
    assert grads[x] == pytest.approx(0.2)


def test_matmul_sum_matches_finite_differences():
    rng = np.random.default_rng(7)
    a = rng.normal(size=(3, 4))
    b = rng.normal(size=(4, 2))
    check_against_fd(lambda t: nm.reduce_sum(nm.matmul(t[0], t[1])), [a, b])


def test_backward_rejects_non_scalar():
    x = nm.parameter(np.ones((2, 2)))
    with pytest.raises(ValueError):
        nm.backward(nm.mul(x, x))


def test_forward_rejects_non_finite():
    x = nm.constant(np.array([1.0, 0.0]))
    with pytest.raises(nm.NonFiniteError):
        nm.div(1.0, x)
    with pytest.raises(nm.NonFiniteError):
        nm.log(nm.constant(np.array([0.0])))


def test_gradient_accumulates_over_shared_nodes():
    x = nm.parameter(np.array(2.0))
    y = nm.add(nm.mul(x, x), nm.mul(3.0, x))  # x^2 + 3x -> 2x + 3 = 7
    grads = nm.backward(y)
    assert grads[x] == pytest.approx(7.0)


@pytest.mark.parametrize("seed", range(5))
def test_primitive_suite_matches_finite_differences(seed):
    """Every differentiable primitive, composed, against central differences."""
    rng = np.random.default_rng(seed)
    h = rng.normal(size=(6, 3))
    w = rng.normal(size=(3, 3))
    bias = rng.normal(size=(3,))
    vec = rng.normal(size=(3, 1))

    def build(t):
        hh, ww, bb, vv = t
        z = nm.add(nm.matmul(hh, ww), bb)
        z = nm.leaky_relu(z, 0.2)
        z = nm.relu(nm.add(z, 0.3))
        q = nm.matmul(z, vv)
        q = nm.div(q, nm.add(nm.absolute(q), 1.0))
        e = nm.exp(nm.mul(q, 0.1))
        s = nm.sqrt(nm.add(nm.mul(e, e), 1.0))
        lg = nm.log(nm.add(s, 1.0))
        p = nm.power(nm.add(nm.absolute(lg), 0.5), 1.7)
        return nm.reduce_mean(p)

    check_against_fd(build, [h, w, bias, vec])


@pytest.mark.parametrize("seed", range(3))
def test_segment_and_gather_ops_match_finite_differences(seed):
    rng = np.random.default_rng(100 + seed)
    h = rng.normal(size=(5, 2))
    idx = np.array([0, 1, 1, 2, 3, 4, 4, 0])
    seg = np.array([0, 0, 1, 1, 2, 2, 2, 3])

    def build(t):
        rows = nm.take_rows(t[0], idx)
        pooled = nm.segment_sum(nm.mul(rows, rows), seg, 4)
        m = nm.segment_mean(nm.take_rows(t[0], np.array([0, 2, 4])), np.array([0, 0, 1]), 2)
        return nm.add(nm.reduce_sum(pooled), nm.reduce_sum(nm.mul(m, 2.0)))

    check_against_fd(build, [h])


def test_concat_cols_gradient():
    rng = np.random.default_rng(3)
    a = rng.normal(size=(4, 2))
    b = rng.normal(size=(4, 1))

    def build(t):
        cat = nm.concat_cols([t[0], t[1]])
        return nm.reduce_sum(nm.mul(cat, cat))

    check_against_fd(build, [a, b])


def test_hundred_random_points_elementwise_chain():
    """Spec-level bound: gradients within relative 1e-4 at 100 random points."""
    rng = np.random.default_rng(42)
    for _ in range(100):
        x = rng.normal(size=(3,)) * 2.0 + 0.1

        def build(t):
            z = nm.mul(nm.exp(nm.mul(t[0], 0.3)), nm.absolute(t[0]))
            return nm.reduce_sum(nm.sqrt(nm.add(nm.mul(z, z), 0.7)))

        check_against_fd(build, [x])


def test_no_grad_blocks_recording():
    x = nm.parameter(np.array([1.0, 2.0]))
    with nm.no_grad():
        y = nm.reduce_sum(nm.mul(x, x))
    assert not y.requires_grad
    assert nm.backward(y) == {}


class TestAdamW:
    def test_zero_grad_zero_decay_is_identity(self):
        state = nm.OptimState(lr=0.01, weight_decay=0.0)
        params = {"w": np.array([1.0, -2.0])}
        out = nm.adamw_step(params, {}, state)
        np.testing.assert_array_equal(out["w"], params["w"])
        assert state.step == 1

    def test_decoupled_decay(self):
        state = nm.OptimState(lr=1.0, weight_decay=0.1)
        out = nm.adamw_step({"w": np.array([1.0])}, {}, state)
        assert out["w"][0] == pytest.approx(0.9)

    def test_single_step_matches_hand_evaluation(self):
        # m_hat = g, v_hat = g^2 after bias correction at t=1, so the step
        # is -lr * g / (|g| + eps) = -lr for g=1.
        state = nm.OptimState(lr=1e-4, weight_decay=0.0)
        out = nm.adamw_step({"w": np.array([0.0])}, {"w": np.array([1.0])}, state)
        assert out["w"][0] == pytest.approx(-1e-4, rel=1e-6)

    def test_shape_mismatch_rejected(self):
        state = nm.OptimState()
        with pytest.raises(ValueError):
            nm.adamw_step({"w": np.zeros(2)}, {"w": np.zeros(3)}, state)

    def test_moments_track_shapes_and_step_increases(self):
        state = nm.OptimState(lr=0.1)
        params = {"a": np.zeros((2, 3)), "b": np.zeros(4)}
        grads = {"a": np.ones((2, 3)), "b": np.ones(4)}
        params = nm.adamw_step(params, grads, state)
        params = nm.adamw_step(params, grads, state)
        assert state.step == 2
        assert state.m["a"].shape == (2, 3)
        assert state.v["b"].shape == (4,)
