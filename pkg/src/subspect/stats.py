"""One-sided Wilcoxon signed-rank test for paired error comparisons.

Written against the exact enumeration definition rather than lifted from
a stats library: the benchmark needs the exact small-sample branch, the
specific one-sided direction (is the baseline worse than the challenger),
and configurable zero handling, and it must behave identically on every
platform a report is generated on.
"""

from __future__ import annotations

import math
import warnings
from itertools import combinations

import numpy as np

__all__ = ["wilcoxon_one_sided"]

EXACT_LIMIT = 12


def _midranks(magnitudes: np.ndarray) -> np.ndarray:
    order = np.argsort(magnitudes, kind="stable")
    ranks = np.empty(len(magnitudes))
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and magnitudes[order[j + 1]] == magnitudes[order[i]]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def _exact_upper_tail(ranks: np.ndarray, observed: float) -> float:
    """P(W+ >= observed) by enumerating sign subsets of the given ranks."""
    n = len(ranks)
    hits = 0
    total = 2**n
    # W+ for a sign assignment is the sum over the positive subset
    for size in range(n + 1):
        for subset in combinations(range(n), size):
            w = sum(ranks[i] for i in subset)
            if w >= observed - 1e-12:
                hits += 1
    return hits / total


def _normal_upper_tail(ranks: np.ndarray, observed: float) -> float:
    n = len(ranks)
    mean = n * (n + 1) / 4.0
    variance = n * (n + 1) * (2 * n + 1) / 24.0
    # tie correction: deduct (t^3 - t)/48 per group of equal magnitudes
    _, counts = np.unique(ranks, return_counts=True)
    variance -= float(np.sum(counts.astype(float) ** 3 - counts)) / 48.0
    if variance <= 0:
        return 1.0
    z = (observed - mean - 0.5) / math.sqrt(variance)
    return 0.5 * math.erfc(z / math.sqrt(2.0))


def wilcoxon_one_sided(
    errors_baseline, errors_challenger, zero_handling: str = "drop"
) -> tuple[float, float]:
    """Test whether the baseline's paired errors exceed the challenger's.

    The statistic is the positive-rank sum of the differences
    (baseline - challenger); a small p rejects the null that the baseline
    performs equally well or better.  Exact enumeration up to 12 nonzero
    pairs, normal approximation with continuity and tie corrections above
    that.  `zero_handling` is "drop" (discard zero differences) or
    "pratt" (rank them, then discard their ranks).

    Returns (statistic, p) with p in (0, 1].
    """
    a = np.asarray(errors_baseline, dtype=float)
    b = np.asarray(errors_challenger, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("paired error vectors must be 1-D and equal length")
    if len(a) == 0:
        raise ValueError("empty error vectors")
    if zero_handling not in ("drop", "pratt"):
        raise ValueError(f"unknown zero_handling {zero_handling!r}")
    diffs = a - b
    nonzero = diffs != 0.0
    if not np.any(nonzero):
        warnings.warn("all paired differences are zero; p = 1", stacklevel=2)
        return 0.0, 1.0

    if zero_handling == "drop":
        kept = diffs[nonzero]
        ranks = _midranks(np.abs(kept))
    else:
        all_ranks = _midranks(np.abs(diffs))
        kept = diffs[nonzero]
        ranks = all_ranks[nonzero]
    statistic = float(np.sum(ranks[kept > 0]))

    if len(ranks) <= EXACT_LIMIT:
        p = _exact_upper_tail(ranks, statistic)
    else:
        p = _normal_upper_tail(ranks, statistic)
    return statistic, float(min(max(p, math.ulp(0.0)), 1.0))
