"""Subsample-and-aggregate ensembles, exact and Monte Carlo, plus brute-force truth.

An ensemble prediction here is the average of a symmetric member procedure
over size-k subsets of an n-row dataset: every subset in exact mode, B
seeded draws in Monte Carlo mode.  The brute-force routines then treat the
dataset itself as random (finite support) and compute the ensemble's mean
and variance by total enumeration, which is what the closed-form identity
gets checked against.
"""

from __future__ import annotations

import itertools
import math
from collections import Counter
from dataclasses import dataclass
from typing import Callable, Iterator, Literal, Sequence

import numpy as np

from .anova import (
    CapExceededError,
    DiscreteDistribution,
    HoeffdingDecomposer,
    Spectrum,
    _multiset_weight,
)
from .combinatorics import attenuation_profile, binomial
from .kernels import SymmetricKernel, atom_sort_key

__all__ = [
    "BruteForceReport",
    "IdentityReport",
    "SubagPlan",
    "bias_of_subag",
    "colex_combinations",
    "ensemble_variance_bruteforce",
    "member_indices",
    "subag_predict",
    "verify_exact_identity",
]

EXACT_SUBSET_CAP = 1_000_000
BRUTE_FORCE_CAP = 10_000_000

# Enumerating datasets in fixed-size blocks keeps memory flat without
# changing any summation order.
_CHUNK = 1 << 14


def colex_combinations(n: int, k: int) -> Iterator[tuple[int, ...]]:
    """All size-k subsets of range(n) in colexicographic order.

    Colex order sorts subsets by their largest differing element, which is
    the same as ordering their indicator bitmasks as integers.  The fixed
    order makes every exact-mode reduction reproducible bit for bit.
    """
    if k < 0 or k > n:
        raise ValueError(f"need 0 <= k <= n, got n={n} k={k}")
    if k == 0:
        yield ()
        return
    for top in range(k - 1, n):
        for rest in colex_combinations(top, k - 1):
            yield rest + (top,)


@dataclass(frozen=True)
class SubagPlan:
    """How to aggregate: over all subsets, or over seeded random draws.

    Exact mode refuses when the subset count exceeds EXACT_SUBSET_CAP.
    Monte Carlo mode needs a member count and a seed; member b draws its
    subset from an independent stream keyed by (seed, b), so any subset of
    members can be recomputed without replaying the rest.
    """

    n: int
    k: int
    mode: Literal["exact", "monte-carlo"] = "exact"
    n_members: int | None = None
    seed: int | None = None

    def __post_init__(self) -> None:
        if not (1 <= self.k <= self.n):
            raise ValueError(f"need 1 <= k <= n, got n={self.n} k={self.k}")
        if self.mode == "exact":
            count = binomial(self.n, self.k)
            if count > EXACT_SUBSET_CAP:
                raise ValueError(
                    f"exact mode would enumerate {count} subsets "
                    f"(cap {EXACT_SUBSET_CAP}); use monte-carlo mode"
                )
        elif self.mode == "monte-carlo":
            if self.n_members is None or self.n_members < 1:
                raise ValueError("monte-carlo mode needs n_members >= 1")
            if self.seed is None:
                raise ValueError("monte-carlo mode needs an explicit seed")
        else:
            raise ValueError(f"unknown mode {self.mode!r}")


def member_indices(plan: SubagPlan, member: int) -> np.ndarray:
    """Row indices for one Monte Carlo member: a uniform size-k subset.

    Drawn by a partial Fisher-Yates shuffle on the member's own stream, so
    the draw is exchangeable over subsets and independent across members.
    """
    if plan.mode != "monte-carlo":
        raise ValueError("member draws only exist in monte-carlo mode")
    rng = np.random.default_rng(np.random.SeedSequence([plan.seed, member]))
    idx = np.arange(plan.n)
    for i in range(plan.k):
        j = i + int(rng.integers(0, plan.n - i))
        idx[i], idx[j] = idx[j], idx[i]
    return idx[: plan.k].copy()


def subag_predict(
    plan: SubagPlan, member_fn: Callable[[tuple], float], rows: Sequence
) -> float:
    """Aggregate a symmetric member procedure over subsets of the rows.

    `member_fn` receives a tuple of rows and must not care about their
    order.  In exact mode the rows are first put into canonical sorted
    order, so shuffling the input leaves the result bit-identical; the mean
    is a pairwise reduction over the colex subset sequence.
    """
    if len(rows) != plan.n:
        raise ValueError(f"plan expects {plan.n} rows, got {len(rows)}")
    if plan.mode == "exact":
        ordered = sorted(rows, key=atom_sort_key)
        values = np.fromiter(
            (member_fn(tuple(ordered[i] for i in subset))
             for subset in colex_combinations(plan.n, plan.k)),
            dtype=float,
            count=binomial(plan.n, plan.k),
        )
    else:
        rows = list(rows)
        values = np.fromiter(
            (member_fn(tuple(rows[i] for i in member_indices(plan, b)))
             for b in range(plan.n_members)),
            dtype=float,
            count=plan.n_members,
        )
    return float(np.sum(values) / len(values))


@dataclass(frozen=True)
class BruteForceReport:
    """Ensemble moments from total enumeration of datasets."""

    mean: float
    variance: float
    n_datasets: int


def _kernel_table(kernel: SymmetricKernel, dist: DiscreteDistribution, k: int) -> np.ndarray:
    """Kernel values indexed by the base-m code of a sorted index k-tuple."""
    m = len(dist)
    table = np.zeros(m**k)
    powers = m ** np.arange(k)
    for combo in itertools.combinations_with_replacement(range(m), k):
        code = int(np.dot(combo, powers))
        table[code] = kernel([dist.atoms[i] for i in combo])
    return table


def _dataset_digits(start: int, stop: int, n: int, m: int) -> np.ndarray:
    """Datasets start..stop-1 as base-m digit arrays, one row per dataset."""
    t = np.arange(start, stop)
    return (t[:, None] // m ** np.arange(n)[None, :]) % m


def _ensemble_values(
    digits: np.ndarray, subsets: list[tuple[int, ...]], table: np.ndarray, m: int, k: int
) -> np.ndarray:
    """Exact ensemble prediction for each dataset row of `digits`."""
    powers = m ** np.arange(k)
    acc = np.zeros(len(digits))
    for subset in subsets:
        codes = np.sort(digits[:, subset], axis=1) @ powers
        acc += table[codes]
    return acc / len(subsets)


def ensemble_variance_bruteforce(
    kernel: SymmetricKernel,
    dist: DiscreteDistribution,
    n: int,
    k: int,
    eval_cap: int = BRUTE_FORCE_CAP,
) -> BruteForceReport:
    """Mean and variance of the exact ensemble over all m^n datasets.

    Pure enumeration: every dataset is visited with its product weight and
    the ensemble prediction is recomputed from kernel values, so nothing
    here shares logic with the spectral closed form.  Refused above the
    evaluation cap, with the required count reported.
    """
    SubagPlan(n=n, k=k, mode="exact")  # validates n, k and the subset cap
    m = len(dist)
    required = m**n
    if required > eval_cap:
        raise CapExceededError(
            f"brute force over {m}^{n} = {required} datasets exceeds cap {eval_cap}",
            required=required,
        )
    subsets = list(colex_combinations(n, k))
    table = _kernel_table(kernel, dist, k)
    probs = dist.probs

    # two passes: first the mean, then centred second moments
    mean_parts = []
    for start in range(0, required, _CHUNK):
        digits = _dataset_digits(start, min(start + _CHUNK, required), n, m)
        w = np.prod(probs[digits], axis=1)
        mean_parts.append(float(np.sum(w * _ensemble_values(digits, subsets, table, m, k))))
    mean = math.fsum(mean_parts)

    var_parts = []
    for start in range(0, required, _CHUNK):
        digits = _dataset_digits(start, min(start + _CHUNK, required), n, m)
        w = np.prod(probs[digits], axis=1)
        f = _ensemble_values(digits, subsets, table, m, k)
        var_parts.append(float(np.sum(w * (f - mean) ** 2)))
    variance = math.fsum(var_parts)
    return BruteForceReport(mean=mean, variance=variance, n_datasets=required)


@dataclass(frozen=True)
class IdentityReport:
    """Brute-force ensemble variance against its attenuated-spectrum prediction."""

    n: int
    k: int
    brute_variance: float
    closed_form_variance: float
    per_order: tuple[float, ...]
    residual: float
    spectrum: Spectrum

    @property
    def ok(self) -> bool:
        return self.residual <= 1e-10


def verify_exact_identity(
    kernel: SymmetricKernel, dist: DiscreteDistribution, n: int, k: int
) -> IdentityReport:
    """Check that attenuated interaction variances reproduce the true variance.

    The left side enumerates datasets; the right side multiplies each
    spectrum entry by its attenuation factor and subset count.  Agreement
    to 1e-10 on every desk-scale instance is the package's core claim.
    """
    brute = ensemble_variance_bruteforce(kernel, dist, n, k)
    spec = HoeffdingDecomposer(kernel, dist).spectrum()
    prof = attenuation_profile(n, k)
    per_order = tuple(
        prof.gammas[c - 1] * binomial(k, c) * z
        for c, z in enumerate(spec.zetas, start=1)
    )
    closed = math.fsum(per_order)
    return IdentityReport(
        n=n,
        k=k,
        brute_variance=brute.variance,
        closed_form_variance=closed,
        per_order=per_order,
        residual=abs(brute.variance - closed),
        spectrum=spec,
    )


def bias_of_subag(
    kernel: SymmetricKernel,
    dist: DiscreteDistribution,
    k: int,
    target: float,
) -> float:
    """Ensemble bias at a target value: E[one size-k draw] - target.

    The ensemble averages identically distributed members, so its
    expectation is the single-member expectation no matter how many rows
    the dataset has; the signature has no n on purpose.
    """
    deco = HoeffdingDecomposer(kernel, dist)
    return deco.theta() - target


def single_draw_variance_bruteforce(
    kernel: SymmetricKernel, dist: DiscreteDistribution
) -> float:
    """Variance of one draw by direct enumeration; oracle for spectrum sums."""
    k = kernel.arity
    m = len(dist)
    theta_parts = []
    sq_parts = []
    for combo in itertools.combinations_with_replacement(range(m), k):
        w = _multiset_weight(Counter(combo), dist.probs, k)
        val = kernel([dist.atoms[i] for i in combo])
        theta_parts.append(w * val)
        sq_parts.append(w * val * val)
    theta = math.fsum(theta_parts)
    return math.fsum(sq_parts) - theta * theta
