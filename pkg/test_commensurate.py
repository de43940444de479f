import math

import numpy as np
import pytest
from pydantic import ValidationError

from commensurate import (
    BasketDesign,
    SubtrialDesign,
    WeightMatrix,
    collective_prior,
    collective_prior_variances,
    commensurate_prior_variance,
    commensurate_prior_variance_matrix,
    complementary_posterior,
    complementary_posterior_means,
    full_posterior,
    hellinger_weight_matrix,
    synthesis_weight_matrix,
    synthesis_weights,
)
from utils.errors import DomainError, SubtrialIndexError

SUMMIT_MEANS = [-0.489, 0.226, -0.181, 0.293, 0.329, -0.275, -0.136]
SUMMIT_SDS = [0.587, 0.345, 0.380, 0.347, 0.344, 0.392, 0.392]


class TestWeightMatrix:

    def test_accepts_oacs_matrix(self, oacs):
        assert oacs.weights.K == 3

    @pytest.mark.parametrize("entries", [
        [[0.0, 0.2], [0.3, 0.0]],
        [[0.1, 0.2], [0.2, 0.0]],
        [[0.0, 1.2], [1.2, 0.0]],
        [[0.0]],
        [[0.0, 0.2, 0.1], [0.2, 0.0, 0.1]],
    ])
    def test_rejects_invalid(self, entries):
        with pytest.raises(ValidationError):
            WeightMatrix(entries=entries)

    def test_asymmetry_message(self):
        with pytest.raises(ValidationError, match="not symmetric"):
            WeightMatrix(entries=[[0.0, 0.2], [0.3, 0.0]])


class TestBasketDesign:

    def test_requires_two_subtrials(self, hyper):
        with pytest.raises(ValidationError, match="at least 2 required"):
            BasketDesign(subtrials=[SubtrialDesign(sigma2=1.0, R=0.5)], weights=WeightMatrix.zeros(2), hyper=hyper)

    def test_weight_size_must_match(self, hyper):
        subtrials = [SubtrialDesign(sigma2=1.0, R=0.5) for _ in range(3)]
        with pytest.raises(ValidationError):
            BasketDesign(subtrials=subtrials, weights=WeightMatrix.zeros(2), hyper=hyper)

    def test_component_ordering_enforced(self):
        from stats_core import GammaMixtureHyper
        swapped = GammaMixtureHyper(a1=54.0, b1=3.0, a2=1.1, b2=1.1)
        subtrials = [SubtrialDesign(sigma2=1.0, R=0.5) for _ in range(2)]
        with pytest.raises(ValidationError, match="substantial"):
            BasketDesign(subtrials=subtrials, weights=WeightMatrix.zeros(2), hyper=swapped)

    def test_subtrial_ranges(self):
        with pytest.raises(ValidationError):
            SubtrialDesign(sigma2=0.0, R=0.5)
        with pytest.raises(ValidationError):
            SubtrialDesign(sigma2=1.0, R=1.0)

    def test_default_labels(self, homoscedastic):
        assert homoscedastic.labels[0] == "subtrial 1"


class TestSynthesisWeights:

    def test_equal_weights_give_uniform(self):
        weights = WeightMatrix(entries=[[0.0 if q == k else 0.4 for k in range(4)] for q in range(4)])
        assert np.allclose(synthesis_weights(weights, 0.05, 2), 1.0 / 3.0)

    def test_oacs_first_column(self, oacs):
        p = synthesis_weights(oacs.weights, 0.05, 0)
        assert p == pytest.approx([0.912, 0.088], abs=1e-3)

    def test_sum_to_one(self, summit):
        for k in range(summit.K):
            p = synthesis_weights(summit.weights, summit.c0, k)
            assert len(p) == summit.K - 1
            assert abs(p.sum() - 1.0) < 1e-12
            assert np.all(p > 0)

    def test_large_concentration_flattens(self, oacs):
        for k in range(3):
            assert np.allclose(synthesis_weights(oacs.weights, 1e6, k), 0.5, atol=1e-4)

    def test_domain_errors(self, oacs):
        with pytest.raises(DomainError):
            synthesis_weights(oacs.weights, 0.0, 0)
        with pytest.raises(SubtrialIndexError):
            synthesis_weights(oacs.weights, 0.05, 3)

    def test_matrix_layout(self, oacs):
        P = synthesis_weight_matrix(oacs.weights, oacs.c0)
        assert np.all(np.diag(P) == 0.0)
        assert np.allclose(P.sum(axis=0), 1.0)
        assert P[[1, 2], 0] == pytest.approx(synthesis_weights(oacs.weights, oacs.c0, 0))


class TestHellingerMatrix:

    def test_summit_matrix(self):
        weights = hellinger_weight_matrix(SUMMIT_MEANS, SUMMIT_SDS)
        w = weights.as_array()
        assert w.shape == (7, 7)
        assert np.allclose(w, w.T)
        assert np.all(np.diag(w) == 0.0)
        off_diagonal = w[np.triu_indices(7, k=1)]
        assert np.all((off_diagonal > 0.0) & (off_diagonal < 1.0))
        # most pairs discount substantially
        assert np.sum(off_diagonal > 0.30) > len(off_diagonal) / 2

    def test_identical_distributions(self):
        weights = hellinger_weight_matrix([0.1] * 4, [0.5] * 4)
        assert np.all(weights.as_array() == 0.0)
        assert np.allclose(synthesis_weights(weights, 0.05, 1), 1.0 / 3.0)

    def test_length_mismatch(self):
        with pytest.raises(DomainError):
            hellinger_weight_matrix([0.0, 1.0], [1.0])


class TestCommensuratePriorVariance:

    def test_no_data_full_commensurability(self, homoscedastic):
        assert commensurate_prior_variance(homoscedastic, 0.0, 1, 0) == pytest.approx(100.0 + 3.0 / 53.0, abs=1e-9)

    def test_self_pair_rejected(self, oacs):
        with pytest.raises(SubtrialIndexError):
            commensurate_prior_variance(oacs, 10.0, 1, 1)
        with pytest.raises(SubtrialIndexError):
            commensurate_prior_variance(oacs, 10.0, 5, 1)

    def test_decreasing_in_sample_size(self, oacs):
        values = [commensurate_prior_variance(oacs, n, 1, 0) for n in (0.0, 1.0, 10.0, 100.0)]
        assert all(a > b for a, b in zip(values, values[1:]))

    def test_increasing_in_weight(self, oacs):
        base = commensurate_prior_variance(oacs, 20.0, 1, 0)
        raised = oacs.with_weights(WeightMatrix(entries=[[0.0, 0.6, 0.417], [0.6, 0.0, 0.145], [0.417, 0.145, 0.0]]))
        assert commensurate_prior_variance(raised, 20.0, 1, 0) > base

    def test_matrix_agrees_with_scalar(self, oacs):
        n = [30.0, 12.0, 18.0]
        xi2 = commensurate_prior_variance_matrix(oacs, n)
        for q in range(3):
            for k in range(3):
                if q != k:
                    assert xi2[q, k] == pytest.approx(commensurate_prior_variance(oacs, n[q], q, k))

    def test_collective_variance(self, oacs):
        n = [30.0, 12.0, 18.0]
        P = synthesis_weight_matrix(oacs.weights, oacs.c0)
        xi2 = commensurate_prior_variance_matrix(oacs, n)
        expected = sum(P[q, 0] ** 2 * xi2[q, 0] for q in (1, 2))
        assert collective_prior_variances(oacs, n)[0] == pytest.approx(expected)

    def test_collective_prior_mean(self, oacs):
        n = [30.0, 12.0, 18.0]
        lambdas = [9.0, 2.0, 3.0]
        prior = collective_prior(oacs, n, lambdas, 0)
        p = synthesis_weights(oacs.weights, oacs.c0, 0)
        assert prior.mean == pytest.approx(p[0] * 2.0 + p[1] * 3.0)


class TestPosteriors:

    def test_complementary_posterior_without_data(self, oacs):
        posterior = complementary_posterior(oacs.subtrials[0], 0.0, 5.0)
        assert posterior.mean == oacs.subtrials[0].m0
        assert posterior.variance == oacs.subtrials[0].s02

    def test_complementary_posterior_precision_additivity(self, oacs):
        sub = oacs.subtrials[1]
        posterior = complementary_posterior(sub, 25.0, 1.7)
        assert posterior.precision == pytest.approx(1.0 / sub.s02 + 25.0 * sub.info_per_patient)

    def test_complementary_posterior_shrinks_towards_prior_mean(self):
        sub = SubtrialDesign(sigma2=4.0, R=0.5, m0=1.0, s02=2.0)
        posterior = complementary_posterior(sub, 10.0, 3.0)
        assert 1.0 < posterior.mean < 3.0
        with pytest.raises(DomainError):
            complementary_posterior(sub, -1.0, 3.0)

    def test_complementary_posterior_worked_example(self):
        sub = SubtrialDesign(sigma2=4.0, R=0.5, m0=0.0, s02=100.0)
        posterior = complementary_posterior(sub, 16.0, 1.0)
        assert posterior.mean == pytest.approx(0.990099, abs=1e-6)
        assert posterior.variance == pytest.approx(0.990099, abs=1e-6)

    def test_vectorised_means(self, oacs):
        n = [30.0, 12.0, 18.0]
        diffs = np.array([[1.0, 2.0, 3.0], [-1.0, 0.5, 4.0]])
        lambdas = complementary_posterior_means(oacs, n, diffs)
        for r in range(2):
            for q in range(3):
                expected = complementary_posterior(oacs.subtrials[q], n[q], diffs[r, q]).mean
                assert lambdas[r, q] == pytest.approx(expected)

    def test_full_posterior_precision_additivity(self, oacs):
        n = [30.0, 12.0, 18.0]
        lambdas = [2.0, 2.5, 1.0]
        posterior = full_posterior(oacs, n, 0, 2.2, lambdas)
        prior = collective_prior(oacs, n, lambdas, 0)
        expected = 1.0 / prior.variance + n[0] * oacs.subtrials[0].info_per_patient
        assert posterior.precision == pytest.approx(expected)
        assert min(prior.mean, 2.2) <= posterior.mean <= max(prior.mean, 2.2)

    def test_full_posterior_needs_data(self, oacs):
        with pytest.raises(DomainError):
            full_posterior(oacs, [0.0, 12.0, 18.0], 0, 2.2, [0.0, 1.0, 1.0])


class TestMonotonicity:

    @pytest.mark.parametrize("q", [1, 2])
    def test_synthesis_weight_decreasing_in_own_weight(self, q):
        values = []
        for w in (0.0, 0.1, 0.2, 0.35, 0.5, 0.8, 1.0):
            entries = [[0.0, 0.15, 0.3], [0.15, 0.0, 0.25], [0.3, 0.25, 0.0]]
            entries[q][0] = entries[0][q] = w
            values.append(synthesis_weights(WeightMatrix(entries=entries), 0.5, 0)[q - 1])
        assert all(a > b for a, b in zip(values, values[1:]))


def _importance_posterior(prior_mean, prior_variance, data_variance, xbar, rng, size=400_000):
    """Posterior moments of the collective-prior/likelihood model by likelihood weighting"""
    theta = prior_mean + math.sqrt(prior_variance) * rng.standard_normal(size)
    log_w = -0.5 * (xbar - theta) ** 2 / data_variance
    w = np.exp(log_w - log_w.max())
    w /= w.sum()
    mean = float(w @ theta)
    centred = (theta - mean) ** 2
    variance = float(w @ centred)
    mean_se = math.sqrt(float(w ** 2 @ centred))
    variance_se = math.sqrt(float(w ** 2 @ (centred - variance) ** 2))
    return mean, mean_se, variance, variance_se


class TestFullPosteriorMonteCarlo:

    @pytest.mark.parametrize("fixture,n,k,xbar,lambdas", [
        ("oacs", [30.0, 12.0, 18.0], 0, 2.2, [2.0, 2.5, 1.0]),
        ("oacs", [10.0, 40.0, 5.0], 2, -0.5, [0.3, 0.1, 0.0]),
        ("homoscedastic", [9.0] * 7, 3, -0.4, [-0.4, -0.1, -0.6, 0.0, -0.3, -0.5, -0.2]),
    ])
    def test_agrees_with_weighted_simulation(self, request, fixture, n, k, xbar, lambdas):
        design = request.getfixturevalue(fixture)
        prior = collective_prior(design, n, lambdas, k)
        data_variance = 1.0 / (n[k] * design.subtrials[k].info_per_patient)
        rng = np.random.default_rng(20 + k)

        mean, mean_se, variance, variance_se = _importance_posterior(
            prior.mean, prior.variance, data_variance, xbar, rng
        )
        posterior = full_posterior(design, n, k, xbar, lambdas)
        assert abs(posterior.mean - mean) < 3 * mean_se
        assert abs(posterior.variance - variance) < 3 * variance_se
