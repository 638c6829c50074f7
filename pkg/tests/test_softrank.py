"""Soft ranking and the differentiable rank correlation."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from macronas import numerics as nm

from helpers import assert_grads_close, central_diff_grads, closed_form_spearman, hard_ranks


def soft_rank_values(scores, eps):
    with nm.no_grad():
        return nm.soft_rank(nm.constant(np.asarray(scores, dtype=np.float64)), eps).data


class TestSoftRank:
    def test_hard_rank_limit(self):
        out = soft_rank_values([0.3, 0.1, 0.2], eps=1e-6)
        np.testing.assert_allclose(out, [3.0, 1.0, 2.0], atol=1e-3)

    def test_sorted_identity(self):
        out = soft_rank_values([1.0, 2.0, 3.0, 4.0], eps=1e-9)
        np.testing.assert_allclose(out, [1.0, 2.0, 3.0, 4.0], atol=1e-6)

    def test_tie_symmetry_any_eps(self):
        for eps in (1e-6, 0.5, 10.0):
            out = soft_rank_values([5.0, 5.0], eps=eps)
            np.testing.assert_allclose(out, [1.5, 1.5], atol=1e-12)

    def test_large_eps_pulls_to_midpoint(self):
        out = soft_rank_values([3.0, 1.0, 2.0], eps=1e9)
        np.testing.assert_allclose(out, [2.0, 2.0, 2.0], atol=1e-6)

    def test_rejects_bad_args(self):
        with pytest.raises(ValueError):
            soft_rank_values([1.0, 2.0], eps=0.0)
        with pytest.raises(ValueError):
            soft_rank_values([1.0], eps=1.0)

    @given(
        st.lists(st.floats(-50, 50), min_size=2, max_size=20),
        st.sampled_from([1e-3, 0.1, 1.0, 10.0]),
    )
    @settings(max_examples=200, deadline=None)
    def test_output_in_permutahedron(self, scores, eps):
        n = len(scores)
        out = soft_rank_values(scores, eps)
        assert abs(out.sum() - n * (n + 1) / 2) < 1e-9
        desc = np.sort(out)[::-1]
        bound = np.arange(n, 0, -1, dtype=float)
        assert np.all(np.cumsum(desc) <= np.cumsum(bound) + 1e-9)

    @pytest.mark.parametrize("eps", [0.05, 0.5, 2.0])
    def test_gradient_matches_finite_differences(self, eps):
        rng = np.random.default_rng(11)
        for _ in range(20):
            z = rng.normal(size=8)

            def build(t):
                r = nm.soft_rank(t[0], eps)
                return nm.reduce_sum(nm.mul(r, nm.constant(np.arange(8.0))))

            params = [nm.parameter(z.copy())]
            out = build(params)
            analytic = nm.backward(out)[params[0]]

            def f(arrs):
                with nm.no_grad():
                    return build([nm.constant(arrs[0])]).item()

            # abs floor covers central-difference roundoff (~1e-16 * |f| / step)
            (numeric,) = central_diff_grads(f, [z.copy()], step=1e-7)
            assert_grads_close(analytic, numeric, rel=1e-4, abs_tol=1e-6)


class TestSoftSrcc:
    def srcc(self, pred, targets, eps):
        with nm.no_grad():
            return nm.soft_srcc(nm.constant(np.asarray(pred, float)), targets, eps).item()

    def test_perfect_positive(self):
        assert self.srcc([1, 2, 3], [10, 20, 30], eps=1e-6) == pytest.approx(1.0, abs=1e-9)

    def test_perfect_negative(self):
        assert self.srcc([1, 2, 3], [30, 20, 10], eps=1e-6) == pytest.approx(-1.0, abs=1e-9)

    def test_partial_closed_form(self):
        # d^2 sum = 2 -> rho = 1 - 12/60 = 0.8
        assert self.srcc([1, 3, 2, 4], [1, 2, 3, 4], eps=1e-8) == pytest.approx(0.8, abs=1e-6)

    def test_degenerate_targets_rejected(self):
        with pytest.raises(nm.DegenerateTargetsError):
            self.srcc([1.0, 2.0], [5.0, 5.0], eps=0.1)

    def test_length_mismatch_rejected(self):
        with pytest.raises(ValueError):
            self.srcc([1.0, 2.0, 3.0], [1.0, 2.0], eps=0.1)

    def test_converges_to_exact_spearman_on_random_vectors(self):
        rng = np.random.default_rng(0)
        for _ in range(100):
            n = int(rng.integers(4, 30))
            pred = rng.normal(size=n)
            targ = rng.normal(size=n)
            got = self.srcc(pred, targ, eps=1e-6)
            want = closed_form_spearman(pred, targ)
            assert got == pytest.approx(want, abs=1e-3)

    def test_self_correlation_is_one(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            x = rng.normal(size=12)
            assert self.srcc(x, x, eps=1e-7) == pytest.approx(1.0, abs=1e-6)

    @given(st.permutations(list(range(8))))
    @settings(max_examples=100, deadline=None)
    def test_permutation_equivariance(self, perm):
        rng = np.random.default_rng(123)
        pred = rng.normal(size=8)
        targ = rng.normal(size=8)
        base = self.srcc(pred, targ, eps=0.3)
        p = np.array(perm)
        assert self.srcc(pred[p], targ[p], eps=0.3) == pytest.approx(base, abs=1e-12)

    def test_value_in_unit_interval(self):
        rng = np.random.default_rng(9)
        for eps in (1e-5, 0.1, 1.0, 50.0):
            pred = rng.normal(size=16)
            targ = rng.normal(size=16)
            v = self.srcc(pred, targ, eps)
            assert -1.0 - 1e-12 <= v <= 1.0 + 1e-12

    def test_gradient_flows_into_predictions(self):
        rng = np.random.default_rng(21)
        pred = nm.parameter(rng.normal(size=10))
        targ = rng.normal(size=10)
        loss = nm.sub(1.0, nm.soft_srcc(pred, targ, eps=0.5))
        grads = nm.backward(loss)
        assert np.any(grads[pred] != 0.0)


class TestExactSpearman:
    def test_matches_brute_force_with_ties(self):
        rng = np.random.default_rng(77)
        for _ in range(50):
            a = rng.integers(0, 5, size=12).astype(float)
            b = rng.normal(size=12)
            ra, rb = hard_ranks(a), hard_ranks(b)
            ra -= ra.mean()
            rb -= rb.mean()
            want = float((ra * rb).sum() / np.sqrt((ra * ra).sum() * (rb * rb).sum()))
            assert nm.spearman(a, b) == pytest.approx(want, abs=1e-12)

    def test_constant_input_rejected(self):
        with pytest.raises(nm.DegenerateTargetsError):
            nm.spearman([1.0, 1.0, 1.0], [1.0, 2.0, 3.0])
