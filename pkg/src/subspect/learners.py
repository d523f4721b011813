"""Base learners with bit-reproducible fits: a CART regressor and KNN.

Both learners sort their training rows into canonical order before
fitting, so two calls that receive the same rows in different orders
produce byte-identical models.  That property is what lets a learner
stand in for a symmetric kernel: the ensemble machinery can feed it
subsets in any order it likes.

The tree deliberately avoids any library implementation.  Off-the-shelf
trees break ties by row position and sum in input order, which destroys
the exact permutation invariance everything downstream leans on.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from numba import njit

from .data import Dataset, canonical_order
from .kernels import SymmetricKernel

__all__ = [
    "FittedKnn",
    "FittedTree",
    "KnnConfig",
    "TreeConfig",
    "fit_knn",
    "fit_tree",
    "learner_as_kernel",
]


@dataclass(frozen=True)
class TreeConfig:
    """Depth cap (None = grow until pure) and minimum rows per leaf."""

    max_depth: int | None = None
    min_leaf: int = 1

    def __post_init__(self) -> None:
        if self.max_depth is not None and self.max_depth < 0:
            raise ValueError("max_depth must be None or >= 0")
        if self.min_leaf < 1:
            raise ValueError("min_leaf must be >= 1")


@dataclass(frozen=True)
class KnnConfig:
    n_neighbors: int

    def __post_init__(self) -> None:
        if self.n_neighbors < 1:
            raise ValueError("n_neighbors must be >= 1")


@njit(cache=True)
def _build_tree(x, y, max_depth, min_leaf):  # pragma: no cover - jitted
    n, d = x.shape
    cap = 2 * n + 1
    feat = np.full(cap, -1, dtype=np.int64)
    thr = np.zeros(cap, dtype=np.float64)
    left = np.full(cap, -1, dtype=np.int64)
    right = np.full(cap, -1, dtype=np.int64)
    value = np.zeros(cap, dtype=np.float64)

    order = np.empty(n, dtype=np.int64)
    for i in range(n):
        order[i] = i
    scratch = np.empty(n, dtype=np.int64)

    # Each stack entry is a contiguous slice [lo, hi) of `order` plus the
    # node id it will fill and its depth.
    stack_lo = np.empty(cap, dtype=np.int64)
    stack_hi = np.empty(cap, dtype=np.int64)
    stack_node = np.empty(cap, dtype=np.int64)
    stack_depth = np.empty(cap, dtype=np.int64)
    stack_lo[0] = 0
    stack_hi[0] = n
    stack_node[0] = 0
    stack_depth[0] = 0
    top = 1
    n_nodes = 1
    deepest = 0

    while top > 0:
        top -= 1
        lo = stack_lo[top]
        hi = stack_hi[top]
        node = stack_node[top]
        depth = stack_depth[top]
        m = hi - lo
        if depth > deepest:
            deepest = depth

        total = 0.0
        for i in range(lo, hi):
            total += y[order[i]]
        value[node] = total / m

        if m < 2 * min_leaf or (max_depth >= 0 and depth >= max_depth):
            continue

        parent_score = total * total / m
        best_score = parent_score
        best_feat = -1
        best_thr = 0.0
        for f in range(d):
            col = np.empty(m, dtype=np.float64)
            for i in range(m):
                col[i] = x[order[lo + i], f]
            idx = np.argsort(col)
            csum = 0.0
            for pos in range(m - 1):
                row = order[lo + idx[pos]]
                csum += y[row]
                cnt = pos + 1
                # A boundary only exists where the sorted column strictly
                # increases; equal values must stay on one side.
                if col[idx[pos]] == col[idx[pos + 1]]:
                    continue
                if cnt < min_leaf or m - cnt < min_leaf:
                    continue
                rsum = total - csum
                score = csum * csum / cnt + rsum * rsum / (m - cnt)
                if score > best_score:
                    best_score = score
                    best_feat = f
                    best_thr = 0.5 * (col[idx[pos]] + col[idx[pos + 1]])

        if best_feat < 0:
            continue

        # Stable partition keeps canonical order within each child.
        n_left = 0
        for i in range(lo, hi):
            if x[order[i], best_feat] <= best_thr:
                scratch[n_left] = order[i]
                n_left += 1
        n_right = 0
        for i in range(lo, hi):
            if x[order[i], best_feat] > best_thr:
                scratch[n_left + n_right] = order[i]
                n_right += 1
        for i in range(m):
            order[lo + i] = scratch[i]

        feat[node] = best_feat
        thr[node] = best_thr
        left[node] = n_nodes
        right[node] = n_nodes + 1
        stack_lo[top] = lo
        stack_hi[top] = lo + n_left
        stack_node[top] = n_nodes
        stack_depth[top] = depth + 1
        stack_lo[top + 1] = lo + n_left
        stack_hi[top + 1] = hi
        stack_node[top + 1] = n_nodes + 1
        stack_depth[top + 1] = depth + 1
        top += 2
        n_nodes += 2

    return feat[:n_nodes], thr[:n_nodes], left[:n_nodes], right[:n_nodes], value[:n_nodes], deepest


@njit(cache=True)
def _tree_predict(xq, feat, thr, left, right, value):  # pragma: no cover - jitted
    out = np.empty(len(xq), dtype=np.float64)
    for r in range(len(xq)):
        node = 0
        while feat[node] >= 0:
            if xq[r, feat[node]] <= thr[node]:
                node = left[node]
            else:
                node = right[node]
        out[r] = value[node]
    return out


@dataclass(frozen=True)
class FittedTree:
    """Flat-array decision tree; node 0 is the root, feature -1 marks a leaf.

    Queries with feature value <= threshold descend left.  Split ties are
    broken toward the lowest feature index, then the lowest threshold, so
    the fitted structure is a pure function of the training multiset.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    depth: int

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    @property
    def n_leaves(self) -> int:
        return int(np.sum(self.feature < 0))

    def predict(self, features) -> np.ndarray:
        xq = np.ascontiguousarray(np.asarray(features, dtype=float))
        if xq.ndim != 2:
            raise ValueError(f"expected a 2-D query matrix, got shape {xq.shape}")
        return _tree_predict(
            xq, self.feature, self.threshold, self.left, self.right, self.value
        )

    def predict_one(self, point) -> float:
        return float(self.predict(np.asarray(point, dtype=float).reshape(1, -1))[0])


def fit_tree(train: Dataset, config: TreeConfig = TreeConfig()) -> FittedTree:
    """Grow a least-squares regression tree on canonically ordered rows.

    A node splits only when some boundary strictly reduces the sum of
    squared errors, so constant-target regions become leaves no matter the
    depth budget.  With unlimited depth and min_leaf 1 the tree reproduces
    each training target exactly whenever the feature rows are distinct.
    """
    idx = canonical_order(train.features, train.targets)
    x = np.ascontiguousarray(train.features[idx])
    y = np.ascontiguousarray(train.targets[idx])
    depth_cap = -1 if config.max_depth is None else config.max_depth
    feat, thr, left, right, value, deepest = _build_tree(
        x, y, depth_cap, config.min_leaf
    )
    return FittedTree(
        feature=feat, threshold=thr, left=left, right=right, value=value,
        depth=int(deepest),
    )


@dataclass(frozen=True)
class FittedKnn:
    """Exact nearest neighbours over the canonically ordered training rows."""

    features: np.ndarray
    targets: np.ndarray
    n_neighbors: int

    def predict(self, features) -> np.ndarray:
        xq = np.asarray(features, dtype=float)
        if xq.ndim != 2:
            raise ValueError(f"expected a 2-D query matrix, got shape {xq.shape}")
        out = np.empty(len(xq))
        row_ids = np.arange(len(self.targets))
        for r in range(len(xq)):
            d2 = np.sum((self.features - xq[r]) ** 2, axis=1)
            # Distance ties resolve by canonical row position.
            nearest = np.lexsort((row_ids, d2))[: self.n_neighbors]
            out[r] = float(np.sum(self.targets[nearest])) / self.n_neighbors
        return out

    def predict_one(self, point) -> float:
        return float(self.predict(np.asarray(point, dtype=float).reshape(1, -1))[0])


def fit_knn(train: Dataset, config: KnnConfig) -> FittedKnn:
    k = config.n_neighbors
    if k > train.n_rows:
        warnings.warn(
            f"n_neighbors={k} exceeds the {train.n_rows} training rows; clamping",
            stacklevel=2,
        )
        k = train.n_rows
    idx = canonical_order(train.features, train.targets)
    return FittedKnn(
        features=np.ascontiguousarray(train.features[idx]),
        targets=np.ascontiguousarray(train.targets[idx]),
        n_neighbors=k,
    )


def learner_as_kernel(
    config: TreeConfig | KnnConfig, query, subset_size: int
) -> SymmetricKernel:
    """Wrap fit-then-predict-at-a-point as a symmetric kernel of the rows.

    Atoms are (feature tuple, target) pairs.  Because the fit itself is
    order-invariant the resulting kernel is exactly symmetric, which makes
    the whole spectrum and variance machinery applicable to real learners.
    """
    point = np.asarray(query, dtype=float).reshape(1, -1)

    if isinstance(config, TreeConfig):
        def evaluate(atoms: tuple) -> float:
            x = np.array([a[0] for a in atoms], dtype=float)
            y = np.array([a[1] for a in atoms], dtype=float)
            model = fit_tree(Dataset(x, y), config)
            return float(model.predict(point)[0])

        depth = "none" if config.max_depth is None else config.max_depth
        name = f"tree(depth={depth},min_leaf={config.min_leaf})"
    elif isinstance(config, KnnConfig):
        def evaluate(atoms: tuple) -> float:
            x = np.array([a[0] for a in atoms], dtype=float)
            y = np.array([a[1] for a in atoms], dtype=float)
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                model = fit_knn(Dataset(x, y), config)
            return float(model.predict(point)[0])

        name = f"knn(neighbors={config.n_neighbors})"
    else:
        raise TypeError(f"unsupported learner config: {type(config).__name__}")

    return SymmetricKernel(arity=subset_size, fn=evaluate, name=name)
