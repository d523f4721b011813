"""Datasets: container, canonical row order, ingestion, scaling, label noise.

Canonical order is the backbone of reproducibility here: learners sort
their training rows by it before doing anything else, which is what makes
every downstream fit invariant to how the caller happened to order the
data.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = [
    "Dataset",
    "Standardizer",
    "canonical_order",
    "friedman1",
    "ingest_csv",
    "inject_label_noise",
]


@dataclass(frozen=True)
class Dataset:
    """A numeric regression dataset: feature matrix plus target vector."""

    features: np.ndarray
    targets: np.ndarray
    feature_names: tuple[str, ...] | None = None
    target_name: str | None = None

    def __post_init__(self) -> None:
        features = np.ascontiguousarray(np.asarray(self.features, dtype=float))
        targets = np.ascontiguousarray(np.asarray(self.targets, dtype=float))
        if features.ndim != 2:
            raise ValueError(f"features must be 2-D, got shape {features.shape}")
        if targets.ndim != 1:
            raise ValueError(f"targets must be 1-D, got shape {targets.shape}")
        if len(features) != len(targets):
            raise ValueError(
                f"{len(features)} feature rows but {len(targets)} targets"
            )
        if len(targets) == 0:
            raise ValueError("dataset must have at least one row")
        if not np.all(np.isfinite(features)):
            raise ValueError("features contain NaN or infinity")
        if not np.all(np.isfinite(targets)):
            raise ValueError("targets contain NaN or infinity")
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "targets", targets)
        if self.feature_names is not None and len(self.feature_names) != features.shape[1]:
            raise ValueError("feature_names length must match the feature count")

    @property
    def n_rows(self) -> int:
        return len(self.targets)

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    def subset(self, indices) -> "Dataset":
        idx = np.asarray(indices)
        return Dataset(
            self.features[idx],
            self.targets[idx],
            feature_names=self.feature_names,
            target_name=self.target_name,
        )


def canonical_order(features: np.ndarray, targets: np.ndarray) -> np.ndarray:
    """Indices sorting rows by features lexicographically, then by target.

    The first feature column is the primary key.  Ties across identical
    rows (features and target both equal) keep their input order, which
    never matters downstream because such rows are interchangeable.
    """
    keys = [np.asarray(targets, dtype=float)]
    feats = np.asarray(features, dtype=float)
    for j in range(feats.shape[1] - 1, -1, -1):
        keys.append(feats[:, j])
    return np.lexsort(keys)


def friedman1(
    n_rows: int, seed: int, n_features: int = 10, noise_sd: float = 1.0
) -> Dataset:
    """Classic nonlinear regression benchmark on uniform features.

    y = 10 sin(pi x1 x2) + 20 (x3 - 1/2)^2 + 10 x4 + 5 x5 + noise.
    Five informative features; the rest are pure distractors.
    """
    if n_features < 5:
        raise ValueError("the generator needs at least five features")
    rng = np.random.default_rng(np.random.SeedSequence([seed]))
    x = rng.uniform(size=(n_rows, n_features))
    y = (
        10.0 * np.sin(np.pi * x[:, 0] * x[:, 1])
        + 20.0 * (x[:, 2] - 0.5) ** 2
        + 10.0 * x[:, 3]
        + 5.0 * x[:, 4]
    )
    if noise_sd > 0:
        y = y + noise_sd * rng.normal(size=n_rows)
    names = tuple(f"x{j + 1}" for j in range(n_features))
    return Dataset(x, y, feature_names=names, target_name="y")


def ingest_csv(path: str | Path, target: str | None = None) -> Dataset:
    """Load a numeric CSV with a header row into a Dataset.

    The target column is chosen by name, defaulting to the last column.
    Any non-numeric or missing cell is an error naming its row and column,
    so silent coercion can never smuggle bad data into a benchmark.
    """
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: file is empty") from None
        header = [h.strip() for h in header]
        if target is None:
            target_idx = len(header) - 1
        else:
            if target not in header:
                raise ValueError(f"{path}: no column named {target!r} in {header}")
            target_idx = header.index(target)
        rows: list[list[float]] = []
        for row_num, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise ValueError(
                    f"{path}: row {row_num} has {len(row)} cells, expected {len(header)}"
                )
            parsed = []
            for col_num, cell in enumerate(row):
                text = cell.strip()
                try:
                    value = float(text)
                except ValueError:
                    raise ValueError(
                        f"{path}: row {row_num}, column {col_num + 1} "
                        f"({header[col_num]!r}): not numeric: {cell!r}"
                    ) from None
                if not math.isfinite(value):
                    raise ValueError(
                        f"{path}: row {row_num}, column {col_num + 1} "
                        f"({header[col_num]!r}): non-finite value {cell!r}"
                    )
                parsed.append(value)
            rows.append(parsed)
    if not rows:
        raise ValueError(f"{path}: no data rows")
    matrix = np.array(rows)
    mask = np.ones(len(header), dtype=bool)
    mask[target_idx] = False
    names = tuple(h for h, keep in zip(header, mask) if keep)
    return Dataset(
        matrix[:, mask],
        matrix[:, target_idx],
        feature_names=names,
        target_name=header[target_idx],
    )


@dataclass(frozen=True)
class Standardizer:
    """Z-scoring fitted on training rows only, reusable on held-out rows.

    Zero-variance feature columns are dropped (with a warning naming them);
    a zero-variance target is an error because the scaled problem would be
    undefined.
    """

    keep: np.ndarray
    feature_mean: np.ndarray
    feature_sd: np.ndarray
    target_mean: float
    target_sd: float

    @classmethod
    def fit(cls, train: Dataset) -> "Standardizer":
        mean = train.features.mean(axis=0)
        sd = train.features.std(axis=0)
        keep = sd > 0.0
        if not np.all(keep):
            dropped = np.nonzero(~keep)[0]
            labels = [
                train.feature_names[j] if train.feature_names else f"column {j}"
                for j in dropped
            ]
            warnings.warn(
                f"dropping zero-variance feature(s): {', '.join(map(str, labels))}",
                stacklevel=2,
            )
        if not np.any(keep):
            raise ValueError("every feature column has zero variance")
        t_mean = float(train.targets.mean())
        t_sd = float(train.targets.std())
        if t_sd == 0.0:
            raise ValueError("target has zero variance on the training rows")
        return cls(
            keep=keep,
            feature_mean=mean[keep],
            feature_sd=sd[keep],
            target_mean=t_mean,
            target_sd=t_sd,
        )

    def transform(self, ds: Dataset) -> Dataset:
        x = (ds.features[:, self.keep] - self.feature_mean) / self.feature_sd
        y = (ds.targets - self.target_mean) / self.target_sd
        names = (
            tuple(n for n, k in zip(ds.feature_names, self.keep) if k)
            if ds.feature_names
            else None
        )
        return Dataset(x, y, feature_names=names, target_name=ds.target_name)

    def transform_targets_back(self, scaled: np.ndarray) -> np.ndarray:
        return scaled * self.target_sd + self.target_mean


def inject_label_noise(
    dataset: Dataset,
    multiplier: float,
    seed: int,
    fit_indices,
    apply_indices=None,
) -> tuple[Dataset, float]:
    """Add centred Gaussian label noise scaled to the training spread.

    The noise standard deviation is multiplier times the pre-noise standard
    deviation of the targets at `fit_indices` (never the held-out rows, so
    nothing leaks).  Noise lands on `apply_indices`, defaulting to every
    row.  Returns the noisy dataset and the training spread used.
    """
    if multiplier < 0:
        raise ValueError("noise multiplier must be >= 0")
    fit_idx = np.asarray(fit_indices)
    sigma = float(dataset.targets[fit_idx].std())
    targets = dataset.targets.copy()
    if multiplier > 0:
        rng = np.random.default_rng(np.random.SeedSequence([seed]))
        rows = (
            np.arange(dataset.n_rows) if apply_indices is None
            else np.asarray(apply_indices)
        )
        targets[rows] = targets[rows] + multiplier * sigma * rng.normal(size=len(rows))
    return (
        Dataset(
            dataset.features,
            targets,
            feature_names=dataset.feature_names,
            target_name=dataset.target_name,
        ),
        sigma,
    )
