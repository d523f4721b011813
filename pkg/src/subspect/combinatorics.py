"""Subset-overlap combinatorics for subsampled ensembles.

Everything in this module is deterministic arithmetic: attenuation factors
(the probability that c fixed points all land in a random size-k subsample),
the hypergeometric overlap law between two subsamples, and a Gamma-function
continuation of the binomial coefficient to real first arguments.  Exact
rational twins are provided for the quantities that anchor test tolerances.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

__all__ = [
    "AttenuationProfile",
    "attenuation_factor",
    "attenuation_factor_exact",
    "attenuation_profile",
    "binomial",
    "extended_binomial",
    "inclusion_probability",
    "log_binomial",
    "overlap_pmf",
    "overlap_pmf_exact",
    "single_draw_variance",
    "variance_closed_form",
    "variance_via_overlap",
]


def binomial(n: int, c: int) -> int:
    """Exact binomial coefficient C(n, c); zero outside 0 <= c <= n."""
    if c < 0 or c > n:
        return 0
    return math.comb(n, c)


def log_binomial(n: int, c: int) -> float:
    """log C(n, c) via log-Gamma, for ranges where the integer overflows a float."""
    if c < 0 or c > n:
        raise ValueError(f"log_binomial undefined outside 0 <= c <= n, got n={n} c={c}")
    return math.lgamma(n + 1) - math.lgamma(c + 1) - math.lgamma(n - c + 1)


def _check_nkc(n: int, k: int, c: int) -> None:
    if not (1 <= k <= n):
        raise ValueError(f"need 1 <= k <= n, got n={n} k={k}")
    if not (1 <= c <= k):
        raise ValueError(f"need 1 <= c <= k, got k={k} c={c}")


def attenuation_factor(n: int, k: int, c: int) -> float:
    """Probability that c distinct fixed points all fall in a uniform size-k subsample.

    Computed as the running product of the ratios (k - j) / (n - j) for
    j = 0 .. c-1.  Each ratio is at most k/n, so the value never exceeds
    (k/n)^c and the product form stays stable where factorial ratios would
    overflow.
    """
    _check_nkc(n, k, c)
    out = 1.0
    for j in range(c):
        out *= (k - j) / (n - j)
    return out


def attenuation_factor_exact(n: int, k: int, c: int) -> Fraction:
    """Rational twin of attenuation_factor, for tolerance anchoring."""
    _check_nkc(n, k, c)
    out = Fraction(1)
    for j in range(c):
        out *= Fraction(k - j, n - j)
    return out


def inclusion_probability(n: int, k: int, c: int) -> float:
    """Same quantity as attenuation_factor, via the subset-count ratio.

    C(n-c, k-c) / C(n, k): of the C(n, k) subsamples, exactly C(n-c, k-c)
    contain all c fixed points.  Kept as an independent route so the two
    expressions can be checked against each other.
    """
    _check_nkc(n, k, c)
    # Exact integer ratio; Python's big-int true division rounds correctly.
    return math.comb(n - c, k - c) / math.comb(n, k)


@dataclass(frozen=True)
class AttenuationProfile:
    """Attenuation factors for all interaction orders c = 1 .. k at fixed (n, k).

    gammas[c - 1] holds the order-c factor.  The sequence is positive and
    strictly decreasing in c for k < n.
    """

    n: int
    k: int
    gammas: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.gammas) != self.k:
            raise ValueError("profile must carry one factor per order 1..k")

    def gamma(self, c: int) -> float:
        _check_nkc(self.n, self.k, c)
        return self.gammas[c - 1]


def attenuation_profile(n: int, k: int) -> AttenuationProfile:
    """All attenuation factors at (n, k), sharing one running product."""
    if not (1 <= k <= n):
        raise ValueError(f"need 1 <= k <= n, got n={n} k={k}")
    gammas = []
    out = 1.0
    for j in range(k):
        out *= (k - j) / (n - j)
        gammas.append(out)
    return AttenuationProfile(n=n, k=k, gammas=tuple(gammas))


def extended_binomial(x: float, c: int) -> float:
    """Binomial coefficient continued to real x: Gamma(x+1) / (Gamma(c+1) Gamma(x-c+1)).

    Requires x - c + 1 >= 1, i.e. x >= c, which keeps every Gamma argument
    at least 1 and away from the poles.  Agrees with binomial(x, c) at
    integer x to close to machine precision.
    """
    if c < 0 or c != int(c):
        raise ValueError(f"order must be a nonnegative integer, got {c}")
    if x - c + 1 < 1:
        raise ValueError(
            f"extended_binomial needs x - c + 1 >= 1 (got x={x}, c={c}); "
            "below that the Gamma continuation leaves its pole-free domain"
        )
    if c == 0:
        return 1.0
    return math.exp(math.lgamma(x + 1) - math.lgamma(c + 1) - math.lgamma(x - c + 1))


def overlap_pmf(n: int, k: int, rho: int) -> float:
    """Probability that two independent size-k subsamples of n points share rho points.

    Hypergeometric: C(k, rho) C(n-k, k-rho) / C(n, k).  Zero outside the
    feasible range max(0, 2k - n) <= rho <= k.
    """
    if not (1 <= k <= n):
        raise ValueError(f"need 1 <= k <= n, got n={n} k={k}")
    if rho < max(0, 2 * k - n) or rho > k:
        return 0.0
    return math.comb(k, rho) * math.comb(n - k, k - rho) / math.comb(n, k)


def overlap_pmf_exact(n: int, k: int, rho: int) -> Fraction:
    """Rational twin of overlap_pmf."""
    if not (1 <= k <= n):
        raise ValueError(f"need 1 <= k <= n, got n={n} k={k}")
    if rho < max(0, 2 * k - n) or rho > k:
        return Fraction(0)
    return Fraction(math.comb(k, rho) * math.comb(n - k, k - rho), math.comb(n, k))


def single_draw_variance(zetas: Sequence[float], k: int) -> float:
    """Variance of one size-k draw from its interaction spectrum: sum_c C(k, c) zeta_c."""
    if len(zetas) != k:
        raise ValueError(f"need one spectrum entry per order 1..k, got {len(zetas)} for k={k}")
    return math.fsum(math.comb(k, c) * z for c, z in enumerate(zetas, start=1))


def variance_closed_form(zetas: Sequence[float], n: int, k: int) -> float:
    """Ensemble variance from the spectrum: sum_c gamma_c(n, k) C(k, c) zeta_c."""
    if len(zetas) != k:
        raise ValueError(f"need one spectrum entry per order 1..k, got {len(zetas)} for k={k}")
    prof = attenuation_profile(n, k)
    return math.fsum(
        prof.gammas[c - 1] * math.comb(k, c) * z for c, z in enumerate(zetas, start=1)
    )


def variance_via_overlap(zetas: Sequence[float], n: int, k: int) -> float:
    """Ensemble variance through the overlap law.

    Averages the covariance of two members over their shared-point count:
    sum_rho overlap_pmf(rho) * sum_{1 <= c <= rho} C(rho, c) zeta_c.  The
    inner sum is the covariance of two draws that share exactly rho points;
    each shared c-subset contributes one zeta_c and there are C(rho, c) of
    them, with no further normalisation.
    """
    if len(zetas) != k:
        raise ValueError(f"need one spectrum entry per order 1..k, got {len(zetas)} for k={k}")
    total = 0.0
    for rho in range(max(0, 2 * k - n), k + 1):
        cov = math.fsum(math.comb(rho, c) * zetas[c - 1] for c in range(1, rho + 1))
        total += overlap_pmf(n, k, rho) * cov
    return total
