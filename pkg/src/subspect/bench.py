"""Two-regime benchmark harness: repeated K-fold comparison of ratio rules.

The protocol per (dataset, regime, repeat, fold) cell: split with seeded
disjoint folds, inject label noise scaled to the pre-noise training
spread, standardize on the training rows only, then fit every method on
the same noisy standardized training data and score the held-out fold.
All randomness derives from the master seed, so a report is byte-identical
across runs.  Metrics are reported in standardized target units.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import platform
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .cgas import (
    BOOTSTRAP,
    CgasConfig,
    fold_indices,
    rf_star,
    run_cgas,
    train_final,
)
from .data import Dataset, Standardizer, friedman1, ingest_csv, inject_label_noise
from .learners import KnnConfig, TreeConfig
from .stats import wilcoxon_one_sided

__all__ = [
    "DEFAULT_METHODS",
    "EvalReport",
    "MethodCell",
    "RegimeSpec",
    "benchmark_from_config",
    "run_benchmark",
    "write_report",
]

DEFAULT_METHODS = ("fixed-0.632", "fixed-0.8", "cgas")
OPTIONAL_METHODS = ("rf", "rf-star")

FIXED_RATIOS = {"fixed-0.632": 0.632, "fixed-0.8": 0.8}


@dataclass(frozen=True)
class RegimeSpec:
    """A complexity regime: learner capacity paired with its noise level.

    The low regime is bias-dominated (shallow trees or heavy-smoothing
    KNN, clean labels); the high regime is variance-dominated (unbounded
    trees or 1-NN, labels corrupted at 1.5 times the training spread).
    """

    regime: str
    learner: TreeConfig | KnnConfig
    noise_multiplier: float
    noise_on_test: bool = True

    def __post_init__(self) -> None:
        if self.regime not in ("low", "high"):
            raise ValueError(f"regime must be 'low' or 'high', got {self.regime!r}")
        if isinstance(self.learner, TreeConfig):
            deep = self.learner.max_depth is None or self.learner.max_depth > 10
            if self.regime == "high" and not deep:
                raise ValueError("high regime requires an effectively unbounded tree")
            if self.regime == "low" and deep:
                raise ValueError("low regime requires a shallow tree")
        elif isinstance(self.learner, KnnConfig):
            if self.regime == "high" and self.learner.n_neighbors != 1:
                raise ValueError("high regime requires 1-NN")
            if self.regime == "low" and self.learner.n_neighbors == 1:
                raise ValueError("low regime requires a smoothing neighbour count")
        else:
            raise TypeError(f"unsupported learner: {type(self.learner).__name__}")
        expected = 0.0 if self.regime == "low" else 1.5
        if self.noise_multiplier != expected:
            raise ValueError(
                f"{self.regime} regime uses noise multiplier {expected}, "
                f"got {self.noise_multiplier}"
            )

    @classmethod
    def tree(cls, regime: str, **kwargs) -> "RegimeSpec":
        learner = TreeConfig(max_depth=3) if regime == "low" else TreeConfig(None)
        return cls(regime, learner, 0.0 if regime == "low" else 1.5, **kwargs)

    @classmethod
    def knn(cls, regime: str, **kwargs) -> "RegimeSpec":
        learner = KnnConfig(20) if regime == "low" else KnnConfig(1)
        return cls(regime, learner, 0.0 if regime == "low" else 1.5, **kwargs)

    @property
    def label(self) -> str:
        return self.regime


def _derive_seed(*parts) -> int:
    """Stable 63-bit seed from a tuple of labels; platform independent."""
    digest = hashlib.blake2b(repr(parts).encode(), digest_size=8).digest()
    return int.from_bytes(digest, "big") >> 1


@dataclass(frozen=True)
class MethodCell:
    """One (repeat, fold) evaluation of one method."""

    repeat: int
    fold: int
    mse: float
    mae: float
    alpha_star: float | None = None


@dataclass
class EvalReport:
    """Everything a benchmark run produced, serializable byte-identically."""

    seed: int
    protocol: dict
    environment: dict
    cells: dict = field(default_factory=dict)
    wilcoxon: list = field(default_factory=list)
    failures: list = field(default_factory=list)

    def method_cells(self, dataset: str, regime: str, method: str) -> list[MethodCell]:
        return self.cells[(dataset, regime, method)]

    def mean_metric(self, dataset, regime, method, metric: str = "mse") -> float:
        values = [getattr(c, metric) for c in self.method_cells(dataset, regime, method)]
        clean = [v for v in values if not math.isnan(v)]
        return float(np.mean(clean)) if clean else math.nan

    def alpha_rows(self) -> list[dict]:
        rows = []
        for (dataset, regime, method), cells in sorted(self.cells.items()):
            for cell in cells:
                if cell.alpha_star is not None:
                    rows.append(
                        {
                            "dataset": dataset,
                            "regime": regime,
                            "method": method,
                            "repeat": cell.repeat,
                            "fold": cell.fold,
                            "alpha_star": cell.alpha_star,
                        }
                    )
        return rows

    def to_dict(self) -> dict:
        results = []
        for (dataset, regime, method), cells in sorted(self.cells.items()):
            results.append(
                {
                    "dataset": dataset,
                    "regime": regime,
                    "method": method,
                    "mean_mse": self.mean_metric(dataset, regime, method, "mse"),
                    "mean_mae": self.mean_metric(dataset, regime, method, "mae"),
                    "cells": [
                        {
                            "repeat": c.repeat,
                            "fold": c.fold,
                            "mse": c.mse,
                            "mae": c.mae,
                            **(
                                {"alpha_star": c.alpha_star}
                                if c.alpha_star is not None
                                else {}
                            ),
                        }
                        for c in cells
                    ],
                }
            )
        return {
            "seed": self.seed,
            "protocol": self.protocol,
            "environment": self.environment,
            "results": results,
            "wilcoxon": self.wilcoxon,
            "failures": self.failures,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"


def _evaluate_method(
    method: str,
    train: Dataset,
    test_x: np.ndarray,
    test_y: np.ndarray,
    learner,
    selector: CgasConfig,
) -> tuple[float, float, float | None]:
    alpha_star = None
    if method in FIXED_RATIOS:
        ensemble = train_final(selector, train, learner, FIXED_RATIOS[method])
    elif method == "cgas":
        result = run_cgas(selector, train, learner)
        ensemble = result.ensemble
        alpha_star = result.alpha_star
    elif method == "rf":
        # plain bagging reference: full-size bootstrap draws
        bootstrap = CgasConfig(
            b_search=selector.b_search, b_final=selector.b_final,
            k_folds=selector.k_folds, seed=selector.seed, sampling=BOOTSTRAP,
        )
        ensemble = train_final(bootstrap, train, learner, 1.0)
    elif method == "rf-star":
        result = rf_star(selector, train, learner)
        ensemble = result.ensemble
        alpha_star = result.alpha_star
    else:
        raise ValueError(f"unknown method {method!r}")
    pred = ensemble.predict(test_x)
    mse = float(np.mean((pred - test_y) ** 2))
    mae = float(np.mean(np.abs(pred - test_y)))
    return mse, mae, alpha_star


def run_benchmark(
    datasets: dict[str, Dataset],
    regimes: list[RegimeSpec],
    methods: tuple[str, ...] = DEFAULT_METHODS,
    repeats: int = 5,
    folds: int = 10,
    seed: int = 0,
    b_search: int = 30,
    b_final: int = 100,
    inner_folds: int = 3,
    progress=None,
) -> EvalReport:
    """Run the full grid and aggregate paired statistics against cgas.

    Every method inside one (dataset, regime, repeat, fold) cell sees the
    identical noisy standardized training data and the identical held-out
    rows, so the per-cell error differences are genuinely paired.  A cell
    failure is recorded as a marker plus NaN metrics rather than aborting
    the run.
    """
    for name in methods:
        if name not in DEFAULT_METHODS + OPTIONAL_METHODS:
            raise ValueError(f"unknown method {name!r}")
    report = EvalReport(
        seed=seed,
        protocol={
            "repeats": repeats,
            "folds": folds,
            "methods": list(methods),
            "b_search": b_search,
            "b_final": b_final,
            "inner_folds": inner_folds,
            "metrics_scale": "standardized target units (training-fold statistics)",
        },
        environment={
            "package": f"subspect {__version__}",
            "python": platform.python_version(),
            "numpy": np.__version__,
        },
    )
    for ds_name, dataset in sorted(datasets.items()):
        if dataset.n_rows < folds:
            raise ValueError(
                f"dataset {ds_name!r} has {dataset.n_rows} rows; needs >= {folds}"
            )
        for regime in regimes:
            key_base = (ds_name, regime.label)
            for method in methods:
                report.cells[(*key_base, method)] = []
            for repeat in range(repeats):
                split = fold_indices(
                    dataset.n_rows, folds,
                    seed=_derive_seed(seed, "folds", ds_name, regime.label, repeat),
                )
                for fold_id, held_out in enumerate(split):
                    train_mask = np.ones(dataset.n_rows, dtype=bool)
                    train_mask[held_out] = False
                    train_rows = np.nonzero(train_mask)[0]
                    noisy, _ = inject_label_noise(
                        dataset,
                        regime.noise_multiplier,
                        seed=_derive_seed(
                            seed, "noise", ds_name, regime.label, repeat, fold_id
                        ),
                        fit_indices=train_rows,
                        apply_indices=None if regime.noise_on_test else train_rows,
                    )
                    with warnings.catch_warnings():
                        warnings.simplefilter("ignore")
                        scaler = Standardizer.fit(noisy.subset(train_rows))
                    train = scaler.transform(noisy.subset(train_rows))
                    test = scaler.transform(noisy.subset(held_out))
                    for method in methods:
                        selector = CgasConfig(
                            b_search=b_search, b_final=b_final, k_folds=inner_folds,
                            seed=_derive_seed(
                                seed, "fit", ds_name, regime.label, repeat,
                                fold_id, method,
                            ),
                        )
                        try:
                            mse, mae, alpha = _evaluate_method(
                                method, train, test.features, test.targets,
                                regime.learner, selector,
                            )
                        except Exception as exc:
                            report.failures.append(
                                {
                                    "dataset": ds_name,
                                    "regime": regime.label,
                                    "method": method,
                                    "repeat": repeat,
                                    "fold": fold_id,
                                    "error": f"{type(exc).__name__}: {exc}",
                                }
                            )
                            mse, mae, alpha = math.nan, math.nan, None
                        report.cells[(*key_base, method)].append(
                            MethodCell(repeat, fold_id, mse, mae, alpha)
                        )
                        if progress is not None:
                            progress(ds_name, regime.label, repeat, fold_id, method)
            _append_wilcoxon(report, ds_name, regime.label, methods)
    return report


def _append_wilcoxon(report: EvalReport, dataset: str, regime: str, methods) -> None:
    if "cgas" not in methods:
        return
    cgas_cells = report.cells[(dataset, regime, "cgas")]
    for method in methods:
        if method == "cgas":
            continue
        cells = report.cells[(dataset, regime, method)]
        for metric in ("mse", "mae"):
            pairs = [
                (getattr(b, metric), getattr(c, metric))
                for b, c in zip(cells, cgas_cells)
                if not (math.isnan(getattr(b, metric)) or math.isnan(getattr(c, metric)))
            ]
            if not pairs:
                continue
            baseline = [p[0] for p in pairs]
            challenger = [p[1] for p in pairs]
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                statistic, p = wilcoxon_one_sided(baseline, challenger)
            report.wilcoxon.append(
                {
                    "dataset": dataset,
                    "regime": regime,
                    "baseline": method,
                    "metric": metric,
                    "statistic": statistic,
                    "p_one_sided": p,
                    "n_pairs": len(pairs),
                }
            )


def write_report(report: EvalReport, out_dir: str | Path) -> dict[str, Path]:
    """Emit report.json plus the two flat CSV views; returns the paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "report": out / "report.json",
        "summary": out / "summary.csv",
        "alpha_shift": out / "alpha_shift.csv",
    }
    paths["report"].write_text(report.to_json())

    p_by_key = {
        (w["dataset"], w["regime"], w["baseline"], w["metric"]): w["p_one_sided"]
        for w in report.wilcoxon
    }
    with paths["summary"].open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(
            ["dataset", "regime", "method", "mean_mse", "mean_mae",
             "p_mse_vs_cgas", "p_mae_vs_cgas"]
        )
        for (dataset, regime, method) in sorted(report.cells):
            writer.writerow(
                [
                    dataset, regime, method,
                    f"{report.mean_metric(dataset, regime, method, 'mse'):.10g}",
                    f"{report.mean_metric(dataset, regime, method, 'mae'):.10g}",
                    _fmt_p(p_by_key.get((dataset, regime, method, "mse"))),
                    _fmt_p(p_by_key.get((dataset, regime, method, "mae"))),
                ]
            )

    with paths["alpha_shift"].open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["dataset", "regime", "method", "repeat", "fold", "alpha_star"])
        for row in report.alpha_rows():
            writer.writerow(
                [
                    row["dataset"], row["regime"], row["method"],
                    row["repeat"], row["fold"], f"{row['alpha_star']:g}",
                ]
            )
    return paths


def _fmt_p(p: float | None) -> str:
    return "" if p is None else f"{p:.6g}"


def _dataset_from_config(name: str, spec: dict) -> Dataset:
    kind = spec.get("type")
    if kind == "friedman1":
        return friedman1(
            int(spec["n_rows"]),
            seed=int(spec.get("seed", 0)),
            n_features=int(spec.get("n_features", 10)),
            noise_sd=float(spec.get("noise_sd", 1.0)),
        )
    if kind == "csv":
        return ingest_csv(spec["path"], target=spec.get("target"))
    raise ValueError(f"dataset {name!r}: unknown type {kind!r}")


def _regime_from_config(spec: dict) -> RegimeSpec:
    regime = spec["regime"]
    learner = spec.get("learner", "tree")
    kwargs = {}
    if "noise_on_test" in spec:
        kwargs["noise_on_test"] = bool(spec["noise_on_test"])
    if learner == "tree":
        return RegimeSpec.tree(regime, **kwargs)
    if learner == "knn":
        return RegimeSpec.knn(regime, **kwargs)
    raise ValueError(f"regime learner must be 'tree' or 'knn', got {learner!r}")


def benchmark_from_config(config: dict, progress=None) -> EvalReport:
    """Run a benchmark described by a declarative config mapping.

    Expected keys: datasets (name -> {type: friedman1|csv, ...}), regimes
    (list of {regime, learner[, noise_on_test]}), and optionally methods,
    repeats, folds, seed, b_search, b_final, inner_folds.
    """
    if "datasets" not in config or "regimes" not in config:
        raise ValueError("config must define 'datasets' and 'regimes'")
    datasets = {
        name: _dataset_from_config(name, spec)
        for name, spec in config["datasets"].items()
    }
    regimes = [_regime_from_config(spec) for spec in config["regimes"]]
    return run_benchmark(
        datasets,
        regimes,
        methods=tuple(config.get("methods", DEFAULT_METHODS)),
        repeats=int(config.get("repeats", 5)),
        folds=int(config.get("folds", 10)),
        seed=int(config.get("seed", 0)),
        b_search=int(config.get("b_search", 30)),
        b_final=int(config.get("b_final", 100)),
        inner_folds=int(config.get("inner_folds", 3)),
        progress=progress,
    )
