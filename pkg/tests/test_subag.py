"""Subsample ensembles: exact aggregation, seeded Monte Carlo, brute-force truth.

The dataset-enumeration oracle in this file recomputes ensemble moments
with nothing but itertools and a weighted sum, independent of the
vectorised implementation under test.
"""

import itertools
import math
from fractions import Fraction

import numpy as np
import pytest

from subspect.anova import CapExceededError, DiscreteDistribution, HoeffdingDecomposer
from subspect.kernels import (
    additive_kernel,
    constant_kernel,
    pairwise_max_kernel,
    product_kernel,
    random_symmetric_kernel,
)
from subspect.subag import (
    SubagPlan,
    bias_of_subag,
    colex_combinations,
    ensemble_variance_bruteforce,
    member_indices,
    single_draw_variance_bruteforce,
    subag_predict,
    verify_exact_identity,
)


def oracle_ensemble_moments(kernel, dist, n, k):
    """Mean and variance of the exact ensemble, by plain nested loops."""
    m = len(dist.atoms)
    subsets = list(itertools.combinations(range(n), k))
    mean = 0.0
    second = 0.0
    for dataset in itertools.product(range(m), repeat=n):
        w = 1.0
        for i in dataset:
            w *= dist.probs[i]
        f = math.fsum(
            kernel([dist.atoms[dataset[i]] for i in s]) for s in subsets
        ) / len(subsets)
        mean += w * f
        second += w * f * f
    return mean, second - mean**2


class TestColexOrder:
    def test_four_choose_two_golden_sequence(self):
        assert list(colex_combinations(4, 2)) == [
            (0, 1), (0, 2), (1, 2), (0, 3), (1, 3), (2, 3),
        ]

    def test_matches_bitmask_order(self):
        """Colex on fixed-size subsets is increasing indicator-bitmask order."""
        for n, k in [(5, 2), (6, 3), (7, 4), (8, 1), (4, 4)]:
            seq = list(colex_combinations(n, k))
            masks = [sum(1 << i for i in s) for s in seq]
            assert masks == sorted(masks)
            assert len(seq) == math.comb(n, k)
            assert len(set(seq)) == len(seq)

    def test_empty_subset(self):
        assert list(colex_combinations(3, 0)) == [()]


class TestSubagPlan:
    def test_exact_cap_enforced(self):
        with pytest.raises(ValueError, match="monte-carlo"):
            SubagPlan(n=40, k=20, mode="exact")

    def test_monte_carlo_needs_members_and_seed(self):
        with pytest.raises(ValueError):
            SubagPlan(n=10, k=3, mode="monte-carlo", seed=1)
        with pytest.raises(ValueError):
            SubagPlan(n=10, k=3, mode="monte-carlo", n_members=50)
        SubagPlan(n=10, k=3, mode="monte-carlo", n_members=50, seed=1)

    def test_subsample_size_bounds(self):
        with pytest.raises(ValueError):
            SubagPlan(n=4, k=5)
        with pytest.raises(ValueError):
            SubagPlan(n=4, k=0)


class TestSubagPredictExact:
    def test_sign_pair_anchor(self):
        """Products over the six pairs of (+1, +1, -1, -1) average to -1/3."""
        plan = SubagPlan(n=4, k=2)
        value = subag_predict(plan, product_kernel(2), [1.0, 1.0, -1.0, -1.0])
        assert value == pytest.approx(-1 / 3, abs=1e-15)

    def test_hand_enumeration_cross_check(self):
        rows = [0.5, -1.0, 2.0, 1.5, -0.25]
        plan = SubagPlan(n=5, k=3)
        kern = pairwise_max_kernel(3)
        truth = math.fsum(
            kern([rows[i] for i in s]) for s in itertools.combinations(range(5), 3)
        ) / math.comb(5, 3)
        assert subag_predict(plan, kern, rows) == pytest.approx(truth, rel=1e-13)

    def test_shuffling_rows_is_bit_identical(self):
        rng = np.random.default_rng(42)
        rows = list(rng.normal(size=8))
        plan = SubagPlan(n=8, k=3)
        kern = random_symmetric_kernel(3, seed=5)
        base = subag_predict(plan, kern, rows)
        for _ in range(10):
            shuffled = list(rows)
            rng.shuffle(shuffled)
            assert subag_predict(plan, kern, shuffled) == base

    def test_row_count_must_match_plan(self):
        with pytest.raises(ValueError):
            subag_predict(SubagPlan(n=3, k=2), product_kernel(2), [1.0, -1.0])


class TestSubagPredictMonteCarlo:
    def test_same_seed_reproduces(self):
        rows = list(np.random.default_rng(0).normal(size=30))
        plan = SubagPlan(n=30, k=10, mode="monte-carlo", n_members=64, seed=123)
        kern = additive_kernel(10)
        assert subag_predict(plan, kern, rows) == subag_predict(plan, kern, rows)

    def test_seed_matters(self):
        rows = list(np.random.default_rng(0).normal(size=30))
        a = SubagPlan(n=30, k=10, mode="monte-carlo", n_members=64, seed=1)
        b = SubagPlan(n=30, k=10, mode="monte-carlo", n_members=64, seed=2)
        kern = additive_kernel(10)
        assert subag_predict(a, kern, rows) != subag_predict(b, kern, rows)

    def test_member_draws_are_uniform_subsets(self):
        """Every size-k subset should appear with about equal frequency."""
        plan = SubagPlan(n=5, k=2, mode="monte-carlo", n_members=20000, seed=7)
        counts: dict[tuple, int] = {}
        for b in range(plan.n_members):
            key = tuple(sorted(member_indices(plan, b)))
            assert len(set(key)) == 2
            counts[key] = counts.get(key, 0) + 1
        assert len(counts) == 10
        freqs = np.array(list(counts.values())) / plan.n_members
        np.testing.assert_allclose(freqs, 0.1, atol=0.01)

    def test_error_shrinks_at_root_member_rate(self):
        """Monte Carlo error falls like members^(-1/2): slope -0.5 +/- 0.15."""
        rng = np.random.default_rng(42)
        rows = list(rng.normal(size=12))
        kern = pairwise_max_kernel(4)
        exact = subag_predict(SubagPlan(n=12, k=4), kern, rows)
        sizes = [100, 1000, 10000]
        rms = []
        for n_members in sizes:
            errs = []
            for seed in range(40):
                plan = SubagPlan(
                    n=12, k=4, mode="monte-carlo", n_members=n_members, seed=seed
                )
                errs.append(subag_predict(plan, kern, rows) - exact)
            rms.append(float(np.sqrt(np.mean(np.square(errs)))))
        slope = np.polyfit(np.log(sizes), np.log(rms), 1)[0]
        assert slope == pytest.approx(-0.5, abs=0.15)


class TestBruteForce:
    def test_sign_pair_variance_anchor(self):
        """Centred sign products, four rows, pairs: ensemble variance 1/6."""
        report = ensemble_variance_bruteforce(
            product_kernel(2), DiscreteDistribution.rademacher(), n=4, k=2
        )
        assert report.mean == pytest.approx(0.0, abs=1e-14)
        assert report.variance == pytest.approx(1 / 6, abs=1e-12)
        assert report.n_datasets == 16

    def test_sign_pair_variance_by_fractions(self):
        """Same number from exact rational enumeration, no floats anywhere."""
        half = Fraction(1, 2)
        atoms = [Fraction(-1), Fraction(1)]
        mean = Fraction(0)
        second = Fraction(0)
        for dataset in itertools.product(atoms, repeat=4):
            w = half**4
            pairs = list(itertools.combinations(range(4), 2))
            f = sum(dataset[i] * dataset[j] for i, j in pairs) / len(pairs)
            mean += w * f
            second += w * f * f
        assert mean == 0
        assert second - mean**2 == Fraction(1, 6)

    def test_matches_loop_oracle(self):
        dist = DiscreteDistribution([-1.0, 0.5, 2.0], [0.5, 0.3, 0.2])
        for build in (additive_kernel, product_kernel, pairwise_max_kernel):
            for n, k in [(4, 2), (5, 3), (6, 2)]:
                kern = build(k)
                mean, var = oracle_ensemble_moments(kern, dist, n, k)
                report = ensemble_variance_bruteforce(kern, dist, n, k)
                np.testing.assert_allclose(report.mean, mean, rtol=1e-11, atol=1e-13)
                np.testing.assert_allclose(report.variance, var, rtol=1e-10, atol=1e-13)

    def test_dataset_cap(self):
        dist = DiscreteDistribution.uniform(list(range(10)))
        with pytest.raises(CapExceededError) as err:
            ensemble_variance_bruteforce(constant_kernel(2), dist, n=9, k=2)
        assert err.value.required == 10**9

    def test_single_draw_variance_matches_spectrum_sum(self):
        dist = DiscreteDistribution([-1.0, 0.5, 2.0], [0.5, 0.3, 0.2])
        kern = pairwise_max_kernel(3)
        spec = HoeffdingDecomposer(kern, dist).spectrum()
        np.testing.assert_allclose(
            single_draw_variance_bruteforce(kern, dist),
            spec.single_draw_variance(),
            rtol=1e-11,
        )


class TestExactIdentity:
    def test_identity_on_small_grid(self):
        """Attenuated spectrum sums reproduce brute-force variance everywhere."""
        dist = DiscreteDistribution([-1.0, 0.5, 2.0], [0.5, 0.3, 0.2])
        builders = [
            additive_kernel,
            product_kernel,
            pairwise_max_kernel,
            lambda k: random_symmetric_kernel(k, seed=3),
        ]
        for build in builders:
            for n in (3, 4, 5, 6):
                for k in (1, 2, 3):
                    if k > n:
                        continue
                    report = verify_exact_identity(build(k), dist, n, k)
                    assert report.residual <= 1e-10, (build, n, k, report.residual)
                    assert report.ok

    def test_full_sample_keeps_single_draw_variance(self):
        """With k = n there is one subset, so the ensemble is one draw."""
        dist = DiscreteDistribution.rademacher()
        kern = pairwise_max_kernel(3)
        report = verify_exact_identity(kern, dist, n=3, k=3)
        np.testing.assert_allclose(
            report.brute_variance,
            single_draw_variance_bruteforce(kern, dist),
            rtol=1e-11,
        )

    def test_per_order_terms_sum_to_closed_form(self):
        dist = DiscreteDistribution.rademacher()
        report = verify_exact_identity(pairwise_max_kernel(2), dist, n=5, k=2)
        np.testing.assert_allclose(
            math.fsum(report.per_order), report.closed_form_variance, rtol=1e-13
        )


class TestBias:
    def test_bias_ignores_dataset_size(self):
        """The ensemble mean is the single-draw mean for every n."""
        dist = DiscreteDistribution([-1.0, 0.5, 2.0], [0.5, 0.3, 0.2])
        kern = pairwise_max_kernel(2)
        theta = HoeffdingDecomposer(kern, dist).theta()
        for n in (2, 3, 7):
            report = ensemble_variance_bruteforce(kern, dist, n=n, k=2)
            assert report.mean == pytest.approx(theta, abs=1e-12)

    def test_bias_subtracts_target(self):
        dist = DiscreteDistribution.rademacher()
        kern = additive_kernel(2)
        assert bias_of_subag(kern, dist, k=2, target=0.25) == pytest.approx(-0.25)
