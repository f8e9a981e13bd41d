import itertools
import math

import numpy as np
import pytest
from scipy import stats as scipy_stats

from ppgrank.plackett_luce import (
    PlModel,
    pl_log_prob_gradient,
    pl_log_probability,
    pl_probability,
    pl_sample,
)


class TestProbability:
    def test_uniform(self):
        m = PlModel.uniform(3)
        for perm in itertools.permutations(range(3)):
            assert pl_probability(m, perm) == pytest.approx(1 / 6)

    def test_two_to_one(self):
        m = PlModel.from_theta([2, 1])
        assert pl_probability(m, [0, 1]) == pytest.approx(2 / 3)
        assert pl_probability(m, [1, 0]) == pytest.approx(1 / 3)

    def test_single_item(self):
        assert pl_probability(PlModel.from_theta([5.0]), [0]) == 1.0

    def test_scale_invariance(self, rng):
        theta = rng.uniform(0.2, 4.0, 5)
        perm = tuple(rng.permutation(5))
        p1 = pl_probability(PlModel.from_theta(theta), perm)
        p2 = pl_probability(PlModel.from_theta(17.3 * theta), perm)
        assert p1 == pytest.approx(p2, rel=1e-12)

    @pytest.mark.parametrize("n", [2, 3, 4, 5, 6])
    def test_normalization(self, n, rng):
        m = PlModel.from_theta(rng.uniform(0.2, 4.0, n))
        total = math.fsum(pl_probability(m, p) for p in itertools.permutations(range(n)))
        assert abs(total - 1.0) < 1e-10

    def test_nonpositive_theta_rejected(self):
        with pytest.raises(ValueError):
            PlModel.from_theta([1.0, 0.0])


class TestSampler:
    def test_uniform_frequencies(self, rng):
        m = PlModel.uniform(3)
        draws = 30_000
        counts = {}
        for _ in range(draws):
            p = pl_sample(m, rng)
            counts[p] = counts.get(p, 0) + 1
        sigma = math.sqrt(draws * (1 / 6) * (5 / 6))
        for perm in itertools.permutations(range(3)):
            assert abs(counts.get(perm, 0) - draws / 6) <= 4.5 * sigma

    def test_dominant_item_first(self, rng):
        m = PlModel.from_theta([1e6, 1.0])
        hits = sum(pl_sample(m, rng)[0] == 0 for _ in range(2000))
        assert hits / 2000 >= 0.999

    def test_single_item(self, rng):
        assert pl_sample(PlModel.uniform(1), rng) == (0,)

    def test_chi_square_against_density(self, rng):
        m = PlModel.from_theta(rng.uniform(0.3, 3.0, 4))
        draws = 50_000
        counts = {}
        for _ in range(draws):
            p = pl_sample(m, rng)
            counts[p] = counts.get(p, 0) + 1
        perms = list(itertools.permutations(range(4)))
        observed = np.array([counts.get(p, 0) for p in perms])
        expected = np.array([pl_probability(m, p) * draws for p in perms])
        result = scipy_stats.chisquare(observed, expected)
        assert result.pvalue > 1e-3


class TestGradient:
    def test_two_item_value(self):
        grad = pl_log_prob_gradient(PlModel.from_theta([1, 1]), [0, 1])
        assert grad[0] == pytest.approx(0.5)
        assert grad[1] == pytest.approx(-0.5)

    @pytest.mark.parametrize("n", [2, 3, 4, 5, 6])
    def test_finite_difference(self, n, rng):
        for _ in range(20):
            theta = rng.uniform(0.3, 3.0, n)
            perm = tuple(rng.permutation(n))
            analytic = pl_log_prob_gradient(PlModel.from_theta(theta), perm)
            for k in range(n):
                h = 1e-6 * theta[k]
                up, down = theta.copy(), theta.copy()
                up[k] += h
                down[k] -= h
                fd = (
                    pl_log_probability(PlModel.from_theta(up), perm)
                    - pl_log_probability(PlModel.from_theta(down), perm)
                ) / (2 * h)
                assert abs(analytic[k] - fd) <= 1e-5 * max(1.0, abs(analytic[k]))

    def test_homogeneity(self, rng):
        theta = rng.uniform(0.3, 3.0, 5)
        perm = tuple(rng.permutation(5))
        grad = pl_log_prob_gradient(PlModel.from_theta(theta), perm)
        assert float(theta @ grad) == pytest.approx(0.0, abs=1e-10)


class TestDeterministicOutput:
    def test_sorts_by_strength(self):
        m = PlModel.from_theta([0.5, 3.0, 1.0])
        assert m.deterministic_permutation() == (1, 2, 0)

    def test_ties_keep_index_order(self):
        assert PlModel.uniform(4).deterministic_permutation() == (0, 1, 2, 3)
