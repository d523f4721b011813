"""Learner tests: deterministic fits, tie rules, and spectrum ordering."""

import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from subspect.anova import DiscreteDistribution, hoeffding_spectrum
from subspect.data import (
    Dataset,
    Standardizer,
    canonical_order,
    friedman1,
    ingest_csv,
    inject_label_noise,
)
from subspect.learners import (
    FittedTree,
    KnnConfig,
    TreeConfig,
    fit_knn,
    fit_tree,
    learner_as_kernel,
)


def leaf_assignments(tree: FittedTree, features: np.ndarray) -> dict[int, int]:
    """Count training rows per leaf by walking the tree in plain Python."""
    counts: dict[int, int] = {}
    for row in features:
        node = 0
        while tree.feature[node] >= 0:
            if row[tree.feature[node]] <= tree.threshold[node]:
                node = int(tree.left[node])
            else:
                node = int(tree.right[node])
        counts[node] = counts.get(node, 0) + 1
    return counts


def oracle_knn_predict(train_x, train_y, query, n_neighbors):
    """Reference KNN: sort by distance, break ties by canonical row order."""
    pos = {int(i): p for p, i in enumerate(canonical_order(train_x, train_y))}
    ranked = sorted(
        range(len(train_y)),
        key=lambda i: (float(np.sum((train_x[i] - query) ** 2)), pos[i]),
    )
    chosen = ranked[:n_neighbors]
    return sum(train_y[i] for i in chosen) / n_neighbors


class TestDataset:
    def test_validation(self):
        with pytest.raises(ValueError, match="2-D"):
            Dataset(np.zeros(3), np.zeros(3))
        with pytest.raises(ValueError, match="rows but"):
            Dataset(np.zeros((3, 2)), np.zeros(4))
        with pytest.raises(ValueError, match="NaN"):
            Dataset(np.array([[np.nan]]), np.array([1.0]))
        with pytest.raises(ValueError, match="at least one row"):
            Dataset(np.zeros((0, 2)), np.zeros(0))

    def test_subset_keeps_names(self):
        ds = Dataset(np.arange(6.0).reshape(3, 2), np.arange(3.0),
                     feature_names=("a", "b"), target_name="y")
        sub = ds.subset([2, 0])
        assert sub.feature_names == ("a", "b")
        assert sub.targets.tolist() == [2.0, 0.0]

    def test_canonical_order_first_column_primary(self):
        x = np.array([[1.0, 0.0], [0.0, 9.0], [1.0, -1.0], [0.0, 9.0]])
        y = np.array([5.0, 2.0, 0.0, 1.0])
        idx = canonical_order(x, y)
        # rows with feature 0 == 0 first (target breaks the duplicate), then
        # feature 1 orders the rest
        assert idx.tolist() == [3, 1, 2, 0]


class TestGeneratorsAndIngestion:
    def test_friedman1_formula_noiseless(self):
        ds = friedman1(50, seed=4, noise_sd=0.0)
        x = ds.features
        expected = (
            10 * np.sin(np.pi * x[:, 0] * x[:, 1])
            + 20 * (x[:, 2] - 0.5) ** 2
            + 10 * x[:, 3]
            + 5 * x[:, 4]
        )
        assert np.array_equal(ds.targets, expected)
        assert ds.n_features == 10

    def test_friedman1_seeded(self):
        a = friedman1(30, seed=9)
        b = friedman1(30, seed=9)
        c = friedman1(30, seed=10)
        assert np.array_equal(a.features, b.features)
        assert np.array_equal(a.targets, b.targets)
        assert not np.array_equal(a.targets, c.targets)

    def test_csv_round_trip(self, tmp_path):
        path = tmp_path / "toy.csv"
        path.write_text("a,b,y\n1,2,3\n4,5,6\n")
        ds = ingest_csv(path)
        assert ds.feature_names == ("a", "b")
        assert ds.target_name == "y"
        assert ds.features.tolist() == [[1.0, 2.0], [4.0, 5.0]]
        assert ds.targets.tolist() == [3.0, 6.0]
        by_name = ingest_csv(path, target="a")
        assert by_name.feature_names == ("b", "y")
        assert by_name.targets.tolist() == [1.0, 4.0]

    def test_csv_errors_name_the_cell(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("a,y\n1,2\n3,oops\n")
        with pytest.raises(ValueError, match="row 3, column 2"):
            ingest_csv(path)
        path.write_text("a,y\n1\n")
        with pytest.raises(ValueError, match="row 2 has 1 cells"):
            ingest_csv(path)
        path.write_text("a,y\n1,2\n")
        with pytest.raises(ValueError, match="no column named 'z'"):
            ingest_csv(path, target="z")


class TestStandardizer:
    def test_train_statistics_only(self):
        train = Dataset(np.array([[0.0], [2.0]]), np.array([1.0, 3.0]))
        test = Dataset(np.array([[4.0]]), np.array([9.0]))
        scaler = Standardizer.fit(train)
        scaled = scaler.transform(test)
        # train mean 1, sd 1; target mean 2, sd 1
        assert scaled.features[0, 0] == pytest.approx(3.0)
        assert scaled.targets[0] == pytest.approx(7.0)
        assert scaler.transform_targets_back(scaled.targets)[0] == pytest.approx(9.0)

    def test_zero_variance_feature_dropped(self):
        train = Dataset(
            np.array([[1.0, 5.0], [2.0, 5.0]]), np.array([0.0, 1.0]),
            feature_names=("keep", "flat"),
        )
        with pytest.warns(UserWarning, match="flat"):
            scaler = Standardizer.fit(train)
        assert scaler.transform(train).n_features == 1

    def test_constant_target_rejected(self):
        train = Dataset(np.array([[1.0], [2.0]]), np.array([3.0, 3.0]))
        with pytest.raises(ValueError, match="target has zero variance"):
            Standardizer.fit(train)


class TestLabelNoise:
    def test_sigma_from_fit_rows_only(self):
        ds = Dataset(np.zeros((4, 1)), np.array([0.0, 2.0, 1000.0, -1000.0]))
        _, sigma = inject_label_noise(ds, 1.5, seed=0, fit_indices=[0, 1])
        assert sigma == pytest.approx(1.0)

    def test_deterministic_and_scaled(self):
        ds = friedman1(40, seed=1)
        fit_idx = np.arange(30)
        noisy_a, sigma = inject_label_noise(ds, 1.5, seed=7, fit_indices=fit_idx)
        noisy_b, _ = inject_label_noise(ds, 1.5, seed=7, fit_indices=fit_idx)
        assert np.array_equal(noisy_a.targets, noisy_b.targets)
        assert not np.array_equal(noisy_a.targets, ds.targets)
        resid = noisy_a.targets - ds.targets
        assert np.std(resid) == pytest.approx(1.5 * sigma, rel=0.5)

    def test_zero_multiplier_is_identity(self):
        ds = friedman1(20, seed=2)
        noisy, _ = inject_label_noise(ds, 0.0, seed=3, fit_indices=np.arange(10))
        assert np.array_equal(noisy.targets, ds.targets)

    def test_apply_subset(self):
        ds = friedman1(20, seed=5)
        noisy, _ = inject_label_noise(
            ds, 1.0, seed=3, fit_indices=np.arange(10), apply_indices=np.arange(10)
        )
        assert not np.array_equal(noisy.targets[:10], ds.targets[:10])
        assert np.array_equal(noisy.targets[10:], ds.targets[10:])


class TestTree:
    def test_depth_zero_is_the_mean(self):
        ds = friedman1(25, seed=3)
        tree = fit_tree(ds, TreeConfig(max_depth=0))
        assert tree.n_nodes == 1
        assert tree.predict_one(np.zeros(10)) == pytest.approx(
            ds.targets.mean(), rel=1e-15
        )

    def test_threshold_tie_takes_lower(self):
        # splits at 0.5 and 2.5 reduce the error equally; 0.5 must win
        ds = Dataset(np.array([[0.0], [1.0], [2.0], [3.0]]),
                     np.array([0.0, 1.0, 1.0, 0.0]))
        tree = fit_tree(ds, TreeConfig(max_depth=1))
        assert tree.feature[0] == 0
        assert tree.threshold[0] == 0.5

    def test_feature_tie_takes_lower(self):
        x = np.array([[0.0], [1.0], [2.0], [3.0]])
        ds = Dataset(np.hstack([x, x]), np.array([0.0, 1.0, 1.0, 0.0]))
        tree = fit_tree(ds, TreeConfig(max_depth=1))
        assert tree.feature[0] == 0

    def test_interpolates_distinct_rows(self):
        rng = np.random.default_rng(11)
        ds = Dataset(rng.normal(size=(60, 3)), rng.normal(size=60))
        tree = fit_tree(ds)
        assert np.array_equal(tree.predict(ds.features), ds.targets)
        assert tree.n_leaves == 60

    def test_constant_target_never_splits(self):
        rng = np.random.default_rng(4)
        ds = Dataset(rng.normal(size=(30, 2)), np.full(30, 2.5))
        tree = fit_tree(ds)
        assert tree.n_nodes == 1

    def test_min_leaf_respected(self):
        ds = friedman1(80, seed=6)
        tree = fit_tree(ds, TreeConfig(min_leaf=7))
        counts = leaf_assignments(tree, ds.features)
        assert len(counts) == tree.n_leaves
        assert min(counts.values()) >= 7

    def test_depth_cap_respected(self):
        ds = friedman1(200, seed=8)
        tree = fit_tree(ds, TreeConfig(max_depth=3))
        assert tree.depth <= 3
        assert tree.n_leaves <= 8

    def test_permutation_invariance_bit_exact(self):
        ds = friedman1(90, seed=12)
        base = fit_tree(ds, TreeConfig(max_depth=4))
        grid = friedman1(25, seed=13).features
        rng = np.random.default_rng(0)
        for _ in range(5):
            perm = rng.permutation(ds.n_rows)
            refit = fit_tree(ds.subset(perm), TreeConfig(max_depth=4))
            assert np.array_equal(base.feature, refit.feature)
            assert np.array_equal(base.threshold, refit.threshold)
            assert np.array_equal(base.value, refit.value)
            assert np.array_equal(base.predict(grid), refit.predict(grid))

    def test_predict_rejects_vectors(self):
        ds = friedman1(10, seed=1)
        tree = fit_tree(ds)
        with pytest.raises(ValueError, match="2-D"):
            tree.predict(np.zeros(10))

    def test_config_validation(self):
        with pytest.raises(ValueError):
            TreeConfig(max_depth=-1)
        with pytest.raises(ValueError):
            TreeConfig(min_leaf=0)


class TestKnn:
    def test_matches_oracle_with_duplicates(self):
        rng = np.random.default_rng(21)
        x = rng.integers(0, 3, size=(25, 2)).astype(float)
        y = rng.normal(size=25)
        queries = rng.normal(size=(8, 2))
        for k in (1, 3, 6):
            model = fit_knn(Dataset(x, y), KnnConfig(k))
            got = model.predict(queries)
            for q, g in zip(queries, got):
                assert g == pytest.approx(oracle_knn_predict(x, y, q, k), rel=1e-12)

    def test_distance_tie_breaks_by_canonical_position(self):
        # query 1.0 is equidistant from both rows; the canonically first
        # row (feature 0.0) must win
        ds = Dataset(np.array([[2.0], [0.0]]), np.array([5.0, -5.0]))
        model = fit_knn(ds, KnnConfig(1))
        assert model.predict_one([1.0]) == -5.0

    def test_clamps_oversized_k(self):
        ds = Dataset(np.array([[0.0], [1.0]]), np.array([1.0, 3.0]))
        with pytest.warns(UserWarning, match="clamping"):
            model = fit_knn(ds, KnnConfig(5))
        assert model.n_neighbors == 2
        assert model.predict_one([0.0]) == pytest.approx(2.0)

    def test_permutation_invariance_bit_exact(self):
        rng = np.random.default_rng(30)
        x = rng.normal(size=(40, 2))
        y = rng.normal(size=40)
        queries = rng.normal(size=(12, 2))
        base = fit_knn(Dataset(x, y), KnnConfig(4)).predict(queries)
        for _ in range(5):
            perm = rng.permutation(40)
            refit = fit_knn(Dataset(x[perm], y[perm]), KnnConfig(4))
            assert np.array_equal(base, refit.predict(queries))


@settings(max_examples=40, deadline=None)
@given(
    seed=st.integers(0, 10_000),
    n_rows=st.integers(5, 30),
    depth=st.sampled_from([None, 1, 3]),
)
def test_tree_fit_ignores_row_order(seed, n_rows, depth):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(n_rows, 2))
    y = rng.normal(size=n_rows)
    queries = rng.normal(size=(6, 2))
    perm = rng.permutation(n_rows)
    a = fit_tree(Dataset(x, y), TreeConfig(max_depth=depth))
    b = fit_tree(Dataset(x[perm], y[perm]), TreeConfig(max_depth=depth))
    assert np.array_equal(a.predict(queries), b.predict(queries))


class TestLearnerKernel:
    ATOMS = (((0.0,), 1.0), ((1.0,), -1.0), ((2.0,), 2.0), ((3.0,), 0.0))

    def test_symmetric_and_matches_direct_fit(self):
        kernel = learner_as_kernel(TreeConfig(max_depth=2), [1.2], 4)
        value = kernel(self.ATOMS)
        ds = Dataset(np.array([[a] for (a,), _ in self.ATOMS]),
                     np.array([y for _, y in self.ATOMS]))
        direct = fit_tree(ds, TreeConfig(max_depth=2)).predict_one([1.2])
        assert value == direct
        rng = np.random.default_rng(2)
        for _ in range(6):
            shuffled = tuple(self.ATOMS[i] for i in rng.permutation(4))
            assert kernel(shuffled) == value

    def test_knn_kernel_silences_clamp_warning(self):
        kernel = learner_as_kernel(KnnConfig(9), [0.5], 4)
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            value = kernel(self.ATOMS)
        assert value == pytest.approx(0.5)

    def test_rejects_unknown_config(self):
        with pytest.raises(TypeError, match="unsupported learner config"):
            learner_as_kernel(object(), [0.0], 3)

    def test_capacity_orders_high_order_mass(self):
        # richer learners push more variance into the interaction orders;
        # the flat mean has none at all
        dist = DiscreteDistribution(list(self.ATOMS), [0.25] * 4)
        tails = {}
        for name, cfg in [
            ("depth0", TreeConfig(max_depth=0)),
            ("depth1", TreeConfig(max_depth=1)),
            ("deep", TreeConfig()),
            ("knn1", KnnConfig(1)),
            ("knn3", KnnConfig(3)),
        ]:
            kernel = learner_as_kernel(cfg, [1.2], 4)
            tails[name] = hoeffding_spectrum(kernel, dist).tail_mass(2)
        assert tails["depth0"] == pytest.approx(0.0, abs=1e-12)
        assert tails["deep"] > tails["depth1"] > 0.01
        assert tails["knn1"] > tails["knn3"] > 0.0

    def test_deep_tree_equals_nearest_neighbor_in_one_dim(self):
        # with distinct 1-D features both learners are the same
        # nearest-midpoint interpolant, so their kernels agree pointwise
        tree_kernel = learner_as_kernel(TreeConfig(), [1.7], 4)
        knn_kernel = learner_as_kernel(KnnConfig(1), [1.7], 4)
        assert tree_kernel(self.ATOMS) == knn_kernel(self.ATOMS)
