"""Adaptive choice of the subsampling ratio, guided by learner complexity.

The selector works in three phases: restrict the candidate ratio grid
using a complexity proxy (tree depth, or the neighbour count for KNN),
pick the grid ratio minimizing internal cross-validated MSE, then train
the final ensemble at that ratio.  High-complexity learners get the
small-ratio grid because their variance dominates; low-complexity
learners get the large-ratio grid because bias does.

Everything is seeded: fold splits, pilot subsamples, and final member
subsamples all derive from the one master seed, so a run is exactly
repeatable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .data import Dataset
from .learners import FittedKnn, FittedTree, KnnConfig, TreeConfig, fit_knn, fit_tree

__all__ = [
    "CgasConfig",
    "CgasResult",
    "HIGH_COMPLEXITY_GRID",
    "LOW_COMPLEXITY_GRID",
    "SubaggedEnsemble",
    "fold_indices",
    "restrict_grid",
    "rf_star",
    "run_cgas",
    "select_alpha",
    "train_final",
]

# Small ratios for learners that interpolate, large ratios for smoothers.
HIGH_COMPLEXITY_GRID = (0.1, 0.2, 0.3, 0.4)
LOW_COMPLEXITY_GRID = (0.6, 0.7, 0.8, 0.9, 0.95)

# Depths above this count as effectively unbounded.
DEPTH_THRESHOLD = 10

# Defensive initial ratio; any nonempty grid scan overrides it.
FALLBACK_ALPHA = 0.632

WITHOUT_REPLACEMENT = "without-replacement"
BOOTSTRAP = "bootstrap"


@dataclass(frozen=True)
class CgasConfig:
    """Knobs for the selector: ensemble sizes, fold count, seed, sampling."""

    b_search: int = 30
    b_final: int = 100
    k_folds: int = 3
    seed: int = 0
    sampling: str = WITHOUT_REPLACEMENT

    def __post_init__(self) -> None:
        if self.b_search < 1 or self.b_final < 1:
            raise ValueError("ensemble sizes must be >= 1")
        if self.k_folds < 2:
            raise ValueError("k_folds must be >= 2")
        if self.sampling not in (WITHOUT_REPLACEMENT, BOOTSTRAP):
            raise ValueError(f"unknown sampling mode {self.sampling!r}")


def restrict_grid(learner: TreeConfig | KnnConfig) -> tuple[float, ...]:
    """Map a learner's complexity proxy to its candidate ratio grid."""
    if isinstance(learner, TreeConfig):
        if learner.max_depth is None or learner.max_depth > DEPTH_THRESHOLD:
            return HIGH_COMPLEXITY_GRID
        return LOW_COMPLEXITY_GRID
    if isinstance(learner, KnnConfig):
        if learner.n_neighbors == 1:
            return HIGH_COMPLEXITY_GRID
        return LOW_COMPLEXITY_GRID
    raise TypeError(f"unsupported learner config: {type(learner).__name__}")


def fold_indices(n_rows: int, k_folds: int, seed: int) -> list[np.ndarray]:
    """Disjoint folds covering every row exactly once, from the seeded stream."""
    if n_rows < k_folds:
        raise ValueError(f"cannot split {n_rows} rows into {k_folds} folds")
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0]))
    perm = rng.permutation(n_rows)
    folds = np.array_split(perm, k_folds)
    for fold in folds:
        if len(fold) == 0:
            raise ValueError("degenerate empty fold")
    return folds


def _fit(learner: TreeConfig | KnnConfig, data: Dataset):
    if isinstance(learner, TreeConfig):
        return fit_tree(data, learner)
    if isinstance(learner, KnnConfig):
        return fit_knn(data, learner)
    raise TypeError(f"unsupported learner config: {type(learner).__name__}")


def _subsample_size(alpha: float, n_rows: int) -> int:
    # tiny epsilon so exact-decimal ratios floor to the intended integer
    return int(math.floor(alpha * n_rows + 1e-9))


@dataclass(frozen=True)
class SubaggedEnsemble:
    """Trained members plus the recipe that produced them."""

    members: tuple
    alpha: float
    sample_size: int
    sampling: str

    @property
    def n_members(self) -> int:
        return len(self.members)

    def predict(self, features) -> np.ndarray:
        stacked = np.stack([m.predict(features) for m in self.members])
        return np.mean(stacked, axis=0)


def _train_ensemble(
    learner,
    data: Dataset,
    alpha: float,
    n_members: int,
    sampling: str,
    seed_prefix: tuple[int, ...],
) -> SubaggedEnsemble:
    size = _subsample_size(alpha, data.n_rows)
    if size < 1:
        raise ValueError(
            f"ratio {alpha} gives an empty subsample from {data.n_rows} rows"
        )
    members = []
    for member in range(n_members):
        rng = np.random.default_rng(np.random.SeedSequence([*seed_prefix, member]))
        if sampling == WITHOUT_REPLACEMENT:
            idx = rng.choice(data.n_rows, size=size, replace=False)
        else:
            idx = rng.choice(data.n_rows, size=size, replace=True)
        members.append(_fit(learner, data.subset(idx)))
    return SubaggedEnsemble(
        members=tuple(members), alpha=alpha, sample_size=size, sampling=sampling
    )


@dataclass(frozen=True)
class CgasResult:
    """Chosen ratio, the cross-validation evidence, and (optionally) the model."""

    alpha_star: float
    grid_used: tuple[float, ...]
    cv_table: tuple[tuple[float, ...], ...]
    ensemble: SubaggedEnsemble | None = None

    def cv_means(self) -> tuple[float, ...]:
        return tuple(float(np.mean(row)) for row in self.cv_table)

    def as_dict(self) -> dict:
        return {
            "alpha_star": self.alpha_star,
            "grid_used": list(self.grid_used),
            "cv_means": list(self.cv_means()),
            "cv_table": {
                f"{alpha:g}": list(row)
                for alpha, row in zip(self.grid_used, self.cv_table)
            },
        }


def select_alpha(
    config: CgasConfig, data: Dataset, learner: TreeConfig | KnnConfig
) -> CgasResult:
    """Pick the ratio minimizing mean held-out MSE over the internal folds.

    Pilot ensembles of b_search members are trained per (ratio, fold) on
    the other folds only.  Equal means resolve toward the larger ratio,
    matching the envelope optimizer's tie rule.
    """
    grid = restrict_grid(learner)
    folds = fold_indices(data.n_rows, config.k_folds, config.seed)
    all_rows = np.arange(data.n_rows)
    cv_table: list[tuple[float, ...]] = []
    for alpha_idx, alpha in enumerate(grid):
        fold_mse = []
        for fold_idx, held_out in enumerate(folds):
            train_mask = np.ones(data.n_rows, dtype=bool)
            train_mask[held_out] = False
            train = data.subset(all_rows[train_mask])
            if _subsample_size(alpha, train.n_rows) < 1:
                raise ValueError(
                    f"ratio {alpha} gives an empty subsample from "
                    f"{train.n_rows} training rows"
                )
            pilot = _train_ensemble(
                learner, train, alpha, config.b_search, config.sampling,
                seed_prefix=(config.seed, 1, alpha_idx, fold_idx),
            )
            pred = pilot.predict(data.features[held_out])
            fold_mse.append(float(np.mean((pred - data.targets[held_out]) ** 2)))
        cv_table.append(tuple(fold_mse))

    alpha_star = FALLBACK_ALPHA
    best = math.inf
    for alpha, row in zip(grid, cv_table):
        mean = float(np.mean(row))
        # <= drifts ties toward the larger ratio as the grid ascends
        if mean <= best:
            best = mean
            alpha_star = alpha
    return CgasResult(alpha_star=alpha_star, grid_used=grid, cv_table=tuple(cv_table))


def train_final(
    config: CgasConfig,
    data: Dataset,
    learner: TreeConfig | KnnConfig,
    alpha_star: float,
) -> SubaggedEnsemble:
    """Train the b_final-member ensemble at the chosen ratio."""
    if not 0.0 < alpha_star <= 1.0:
        raise ValueError(f"alpha_star must lie in (0, 1], got {alpha_star}")
    return _train_ensemble(
        learner, data, alpha_star, config.b_final, config.sampling,
        seed_prefix=(config.seed, 2),
    )


def run_cgas(
    config: CgasConfig, data: Dataset, learner: TreeConfig | KnnConfig
) -> CgasResult:
    """Full pipeline: restrict, select, train."""
    result = select_alpha(config, data, learner)
    ensemble = train_final(config, data, learner, result.alpha_star)
    return CgasResult(
        alpha_star=result.alpha_star,
        grid_used=result.grid_used,
        cv_table=result.cv_table,
        ensemble=ensemble,
    )


def rf_star(
    config: CgasConfig, data: Dataset, learner: TreeConfig | KnnConfig
) -> CgasResult:
    """Bootstrap variant: select without replacement, train with replacement.

    The ratio search runs exactly as in the plain pipeline; only the final
    members switch to bootstrap draws of the same constrained size.
    """
    selection_config = CgasConfig(
        b_search=config.b_search, b_final=config.b_final,
        k_folds=config.k_folds, seed=config.seed, sampling=WITHOUT_REPLACEMENT,
    )
    result = select_alpha(selection_config, data, learner)
    ensemble = _train_ensemble(
        learner, data, result.alpha_star, config.b_final, BOOTSTRAP,
        seed_prefix=(config.seed, 2),
    )
    return CgasResult(
        alpha_star=result.alpha_star,
        grid_used=result.grid_used,
        cv_table=result.cv_table,
        ensemble=ensemble,
    )
