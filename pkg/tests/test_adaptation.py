import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from shiftscope.adaptation import (_project_box_sum, adjust_posteriors,
                                   confusion_matrix_prior,
                                   cortes_covariate_bound, em_prior_adjust,
                                   kernel_mean_matching, zhao_js_lower_bound)
from shiftscope.datamodel import LabelSpace


def gaussian_mixture_posteriors(x, prior_pos, mu_pos=1.0, mu_neg=-1.0):
    # exact two-class posterior for unit-variance components
    log_pos = np.log(prior_pos) - 0.5 * (x - mu_pos) ** 2
    log_neg = np.log(1.0 - prior_pos) - 0.5 * (x - mu_neg) ** 2
    m = np.maximum(log_pos, log_neg)
    p = np.exp(log_pos - m)
    q = np.exp(log_neg - m)
    return np.column_stack([p, q]) / (p + q)[:, None]


class TestEmPriorAdjust:

    def test_recovers_shifted_prior(self):
        rng = np.random.default_rng(7)
        true_target = 0.8
        n = 5000
        labels = rng.random(n) < true_target
        x = np.where(labels, 1.0, -1.0) + rng.standard_normal(n)
        post = gaussian_mixture_posteriors(x, prior_pos=0.5)
        r = em_prior_adjust(post, np.array([0.5, 0.5]))
        assert r.converged
        assert r.estimated_target_prior[0] == pytest.approx(true_target,
                                                            abs=0.03)

    def test_identity_when_no_shift(self):
        rng = np.random.default_rng(3)
        n = 4000
        labels = rng.random(n) < 0.5
        x = np.where(labels, 1.0, -1.0) + rng.standard_normal(n)
        post = gaussian_mixture_posteriors(x, prior_pos=0.5)
        r = em_prior_adjust(post, np.array([0.5, 0.5]))
        assert r.estimated_target_prior[0] == pytest.approx(0.5, abs=0.03)

    def test_log_likelihood_nondecreasing(self):
        rng = np.random.default_rng(11)
        x = rng.normal(0.6, 1.2, 600)
        post = gaussian_mixture_posteriors(x, prior_pos=0.5)
        r = em_prior_adjust(post, np.array([0.5, 0.5]))
        ll = np.asarray(r.log_likelihoods)
        assert np.all(np.diff(ll) >= -1e-9)

    def test_estimate_stays_on_simplex(self):
        rng = np.random.default_rng(5)
        post = rng.dirichlet(np.ones(3), size=300)
        r = em_prior_adjust(post, np.array([0.2, 0.3, 0.5]))
        p = np.asarray(r.estimated_target_prior)
        assert np.all(p >= 0)
        assert p.sum() == pytest.approx(1.0, abs=1e-9)
        assert np.asarray(r.trajectory).shape[1] == 3

    def test_bad_posteriors_rejected(self):
        with pytest.raises(ValueError):
            em_prior_adjust(np.array([[0.9, 0.3]]), np.array([0.5, 0.5]))
        with pytest.raises(ValueError):
            em_prior_adjust(np.array([[0.9, 0.1]]), np.array([0.7, 0.7]))


class TestAdjustPosteriors:

    def test_identity_at_equal_priors(self):
        rng = np.random.default_rng(0)
        post = rng.dirichlet(np.ones(2), size=50)
        out = adjust_posteriors(post, np.array([0.4, 0.6]),
                                np.array([0.4, 0.6]))
        assert_allclose(out, post, atol=1e-12)

    def test_hand_reweighting(self):
        # uninformative posterior tilts straight to the target prior
        post = np.array([[0.5, 0.5]])
        out = adjust_posteriors(post, np.array([0.5, 0.5]),
                                np.array([0.8, 0.2]))
        assert_allclose(out, [[0.8, 0.2]], atol=1e-12)

    @given(st.integers(min_value=0, max_value=2 ** 32 - 1))
    @settings(max_examples=30, deadline=None)
    def test_rows_stay_distributions(self, seed):
        rng = np.random.default_rng(seed)
        post = rng.dirichlet(np.ones(3), size=20)
        src = rng.dirichlet(np.ones(3)) + 0.01
        src /= src.sum()
        tgt = rng.dirichlet(np.ones(3)) + 0.01
        tgt /= tgt.sum()
        out = adjust_posteriors(post, src, tgt)
        assert np.all(out >= 0)
        assert_allclose(out.sum(axis=1), 1.0, atol=1e-9)


class TestConfusionMatrixPrior:

    def test_perfect_predictor_reads_frequencies(self):
        space = LabelSpace(("a", "b"))
        val = ("a",) * 10 + ("b",) * 10
        target = ("a",) * 30 + ("b",) * 70
        p = confusion_matrix_prior(val, val, target, space)
        assert_allclose(p, [0.3, 0.7], atol=1e-12)

    def test_noisy_predictor_inverted_exactly(self):
        # C = [[0.9, 0.2], [0.1, 0.8]] from counts; q_a = 0.62 solves to
        # p_a = 0.6 under C p = q
        space = LabelSpace(("a", "b"))
        val_true = ("a",) * 10 + ("b",) * 10
        val_pred = ("a",) * 9 + ("b",) + ("a",) * 2 + ("b",) * 8
        target = ("a",) * 62 + ("b",) * 38
        p = confusion_matrix_prior(val_true, val_pred, target, space)
        assert_allclose(p, [0.6, 0.4], atol=1e-9)

    def test_result_is_a_distribution_three_class(self):
        rng = np.random.default_rng(4)
        space = LabelSpace(("a", "b", "c"))
        val_true = tuple(rng.choice(space.labels, 300))
        flip = rng.random(300) < 0.2
        val_pred = tuple(rng.choice(space.labels) if f else t
                         for t, f in zip(val_true, flip))
        target = tuple(rng.choice(space.labels, 200, p=[0.6, 0.3, 0.1]))
        p = confusion_matrix_prior(val_true, val_pred, target, space)
        assert np.all(p >= 0)
        assert p.sum() == pytest.approx(1.0, abs=1e-9)


class TestKernelMeanMatching:

    def test_identical_domains_give_unit_weights(self):
        rng = np.random.default_rng(0)
        x = rng.normal(0, 1, (80, 2))
        r = kernel_mean_matching(x, x.copy())
        assert r.converged
        assert_allclose(r.weights.values, 1.0, atol=0.05)

    def test_constraints_respected_under_shift(self):
        rng = np.random.default_rng(2)
        x = rng.normal(0, 1, (150, 1))
        y = rng.normal(1.0, 1, (150, 1))
        r = kernel_mean_matching(x, y, upper_bound=50.0)
        w = r.weights.values
        assert np.all(w >= 0)
        assert np.all(w <= 50.0 + 1e-9)
        assert abs(w.mean() - 1.0) <= r.epsilon + 1e-9
        # weights must tilt toward the target's side of the support
        assert np.corrcoef(w, x[:, 0])[0, 1] > 0.1

    def test_objective_trajectory_decreases(self):
        rng = np.random.default_rng(9)
        x = rng.normal(0, 1, (100, 1))
        y = rng.normal(0.8, 1, (100, 1))
        r = kernel_mean_matching(x, y)
        obj = np.asarray(r.objective_trajectory)
        assert obj[-1] <= obj[0] + 1e-12

    def test_dimension_mismatch_rejected(self):
        with pytest.raises(ValueError):
            kernel_mean_matching(np.zeros((5, 2)), np.zeros((5, 3)))

    def test_bad_upper_bound_rejected(self):
        with pytest.raises(ValueError):
            kernel_mean_matching(np.zeros((5, 1)), np.ones((5, 1)),
                                 upper_bound=0.0)


class TestProjectBoxSum:

    @given(st.integers(min_value=0, max_value=2 ** 32 - 1))
    @settings(max_examples=50, deadline=None)
    def test_output_feasible(self, seed):
        rng = np.random.default_rng(seed)
        n = rng.integers(2, 40)
        v = rng.normal(0, 10, n)
        upper = 5.0
        lo, hi = 0.8 * n, 1.2 * n
        out = _project_box_sum(v, upper, lo, hi)
        assert np.all(out >= -1e-9)
        assert np.all(out <= upper + 1e-9)
        assert lo - 1e-6 <= out.sum() <= hi + 1e-6

    @given(st.integers(min_value=0, max_value=2 ** 32 - 1))
    @settings(max_examples=50, deadline=None)
    def test_feasible_point_is_fixed(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(2, 40))
        v = rng.uniform(0.5, 1.5, n)
        out = _project_box_sum(v, 5.0, 0.0, 10.0 * n)
        assert_allclose(out, v, atol=1e-9)


class TestBounds:

    def test_zhao_examples(self):
        assert zhao_js_lower_bound(0.5, 0.1).value == pytest.approx(0.08)
        assert zhao_js_lower_bound(0.9, 0.1).value == pytest.approx(0.32)
        assert zhao_js_lower_bound(0.4, 0.1).value == pytest.approx(0.045)

    def test_zhao_clamps_when_representation_covers_labels(self):
        assert zhao_js_lower_bound(0.1, 0.5).value == 0.0

    def test_zhao_rejects_out_of_range(self):
        with pytest.raises(ValueError):
            zhao_js_lower_bound(1.5, 0.1)
        with pytest.raises(ValueError):
            zhao_js_lower_bound(0.5, -0.1)

    def test_cortes_frozen_value(self):
        # zero divergence, c = 1, n = 10^4, delta = 0.05
        r = cortes_covariate_bound(0.0, 1.0, 10000, 0.05)
        assert r.value == pytest.approx(0.209118528501305, abs=1e-12)
        assert r.bound_name == "cortes_covariate"

    def test_cortes_monotone_in_divergence(self):
        vals = [cortes_covariate_bound(b, 1.0, 10000, 0.05).value
                for b in (0.0, 0.5, 1.0, 2.0)]
        assert vals == sorted(vals)
        assert vals[-1] > vals[0]

    def test_cortes_shrinks_with_sample_size(self):
        small = cortes_covariate_bound(0.5, 1.0, 100, 0.05).value
        big = cortes_covariate_bound(0.5, 1.0, 100000, 0.05).value
        assert big < small

    def test_cortes_rejects_bad_inputs(self):
        with pytest.raises(ValueError):
            cortes_covariate_bound(-0.1, 1.0, 100, 0.05)
        with pytest.raises(ValueError):
            cortes_covariate_bound(0.5, 1.0, 100, 1.5)
