"""Mean-squared-error envelope over the subsampling ratio, and its optimizers.

The envelope combines a power-law bias bound with the attenuated
interaction-variance sum, continued to non-integer subsample sizes through
the Gamma function.  Its derivative is available in closed form (the
digamma difference telescopes for integer orders), which gives an
independent route for checking the numeric optimizers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Literal, Sequence

import numpy as np

from .combinatorics import attenuation_factor, extended_binomial

__all__ = [
    "BimodalParams",
    "ComparativeStaticsReport",
    "DominatedPair",
    "EnvelopeParams",
    "OptimalAlphaResult",
    "ScalingLawFit",
    "bimodal_derivative",
    "bimodal_envelope",
    "bimodal_optimal_alpha",
    "comparative_statics_check",
    "envelope_derivative",
    "mse_envelope",
    "optimal_alpha",
    "scaling_law_fit",
    "variance_multiplier",
]


@dataclass(frozen=True)
class EnvelopeParams:
    """Inputs to the envelope: a bias bound and an interaction spectrum.

    The bias of a size-k member is bounded by bias_constant * k^(-bias_decay
    * 2) ... spelled out: squared bias <= bias_constant * k^(-2 * bias_decay).
    spectrum[c-1] is the order-c interaction variance; its length M is the
    highest order carried, and the envelope's domain is alpha in [M/n, 1].
    """

    bias_constant: float
    bias_decay: float
    n: int
    spectrum: tuple[float, ...]

    def __post_init__(self) -> None:
        if self.bias_constant < 0:
            raise ValueError("bias_constant must be >= 0")
        if self.bias_decay <= 0:
            raise ValueError("bias_decay must be > 0")
        if self.n < 1:
            raise ValueError("n must be a positive integer")
        if len(self.spectrum) == 0:
            raise ValueError("spectrum must carry at least one order")
        if len(self.spectrum) > self.n:
            raise ValueError("spectrum order cannot exceed n (empty domain)")
        if any(z < 0 for z in self.spectrum):
            raise ValueError("spectrum entries must be >= 0")
        object.__setattr__(self, "spectrum", tuple(float(z) for z in self.spectrum))

    @property
    def max_order(self) -> int:
        return len(self.spectrum)

    @property
    def alpha_min(self) -> float:
        return self.max_order / self.n


def variance_multiplier(alpha: float, n: int, c: int) -> float:
    """Order-c variance weight alpha^c * C(alpha n, c), continued in alpha.

    Strictly increasing on (c/n, 1]: shrinking the subsample always shrinks
    every order's contribution.
    """
    x = alpha * n
    # at the domain's left endpoint alpha = c/n the product can round to
    # just below c; clamp so the continuation stays on its pole-free side
    if x < c and x > c - 1e-6:
        x = float(c)
    return alpha**c * extended_binomial(x, c)


def _check_domain(alpha: float, params: EnvelopeParams) -> None:
    lo = params.alpha_min
    if not (lo - 1e-12 <= alpha <= 1.0 + 1e-12):
        raise ValueError(
            f"alpha={alpha} outside the envelope domain [{lo}, 1] "
            f"(spectrum carries order {params.max_order} on n={params.n})"
        )


def mse_envelope(alpha: float, params: EnvelopeParams) -> float:
    """Envelope value: bias bound at size alpha*n plus attenuated variance sum."""
    _check_domain(alpha, params)
    k_eff = alpha * params.n
    bias_sq = params.bias_constant * k_eff ** (-2.0 * params.bias_decay)
    var = math.fsum(
        variance_multiplier(alpha, params.n, c) * z
        for c, z in enumerate(params.spectrum, start=1)
        if z != 0.0
    )
    return bias_sq + var


def envelope_derivative(alpha: float, params: EnvelopeParams) -> float:
    """Exact derivative of the envelope in alpha, interior points only.

    Each variance term differentiates through its logarithm: the digamma
    difference for an integer order c collapses to sum_j 1/(alpha n - j),
    so no special functions are needed and the expression is exact.
    """
    lo = params.alpha_min
    if not (lo < alpha < 1.0):
        raise ValueError(
            f"derivative defined strictly inside ({lo}, 1), got alpha={alpha}"
        )
    n = params.n
    two_beta = 2.0 * params.bias_decay
    out = 0.0
    if params.bias_constant != 0.0:
        out -= (
            two_beta
            * params.bias_constant
            * n ** (-two_beta)
            * alpha ** (-two_beta - 1.0)
        )
    for c, z in enumerate(params.spectrum, start=1):
        if z == 0.0:
            continue
        log_slope = c / alpha + math.fsum(n / (alpha * n - j) for j in range(c))
        out += variance_multiplier(alpha, n, c) * log_slope * z
    return out


def _golden_section(
    f: Callable[[float], float], lo: float, hi: float, tol: float
) -> float:
    """Golden-section minimum; exact ties drift toward the right endpoint."""
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    return 0.5 * (a + b)


@dataclass(frozen=True)
class OptimalAlphaResult:
    """Where the envelope bottoms out and what it is worth there."""

    alpha: float
    value: float
    at_boundary: bool
    grid_step: float


def _grid_then_refine(
    f: Callable[[float], float], lo: float, hi: float, grid_size: int, refine: bool
) -> OptimalAlphaResult:
    grid = np.linspace(lo, hi, grid_size)
    values = np.array([f(a) for a in grid])
    # argmin of the reversed array lands on the largest alpha among exact ties
    best = len(grid) - 1 - int(np.argmin(values[::-1]))
    candidates = [(values[best], grid[best])]
    if refine and grid_size >= 2:
        b_lo = grid[max(best - 1, 0)]
        b_hi = grid[min(best + 1, grid_size - 1)]
        refined = _golden_section(f, b_lo, b_hi, tol=1e-6)
        candidates.append((f(refined), refined))
        candidates.append((f(b_lo), b_lo))
        candidates.append((f(b_hi), b_hi))
    # smallest value wins; among equal values, the largest alpha
    best_val = min(v for v, _ in candidates)
    alpha = max(a for v, a in candidates if v == best_val)
    step = (hi - lo) / (grid_size - 1) if grid_size > 1 else hi - lo
    boundary = bool(alpha - lo <= 1e-9 or hi - alpha <= 1e-9)
    return OptimalAlphaResult(
        alpha=float(alpha),
        value=float(best_val),
        at_boundary=boundary,
        grid_step=float(step),
    )


def optimal_alpha(
    params: EnvelopeParams, grid_size: int = 512, refine: bool = True
) -> OptimalAlphaResult:
    """Minimise the envelope over its domain.

    Dense grid scan followed by golden-section refinement around the best
    cell, to an alpha tolerance of 1e-6; exact value ties resolve toward
    the larger alpha.
    """
    if grid_size < 2:
        raise ValueError("grid_size must be at least 2")
    return _grid_then_refine(
        lambda a: mse_envelope(a, params),
        params.alpha_min,
        1.0,
        grid_size,
        refine,
    )


@dataclass(frozen=True)
class BimodalParams:
    """Two-spike spectrum: mass at order 1 and at a single top order.

    This is the case study where everything is analytic: the envelope, its
    derivative, and the optimal ratio's closed-form root.
    """

    bias_constant: float
    bias_decay: float
    n: int
    top_order: int
    first_order_variance: float
    top_order_variance: float

    def __post_init__(self) -> None:
        if self.top_order < 2:
            raise ValueError("top_order must be >= 2")
        if self.top_order > self.n:
            raise ValueError("top_order cannot exceed n")
        if self.first_order_variance < 0 or self.top_order_variance < 0:
            raise ValueError("variance weights must be >= 0")
        if self.bias_constant < 0 or self.bias_decay <= 0:
            raise ValueError("bias bound needs bias_constant >= 0, bias_decay > 0")

    @property
    def alpha_min(self) -> float:
        return self.top_order / self.n

    @property
    def bias_at_full_sample(self) -> float:
        """bias_constant * n^(-2 beta): the bias term's coefficient in alpha."""
        return self.bias_constant * self.n ** (-2.0 * self.bias_decay)


VarianceMode = Literal["exact", "smooth", "power"]


def bimodal_envelope(
    alpha: float, params: BimodalParams, mode: VarianceMode = "exact"
) -> float:
    """Two-spike envelope with three treatments of the top-order attenuation.

    exact:  attenuation at the integer subsample size nearest alpha*n
            (never below the top order), so values match the discrete truth.
    smooth: the same product formula continued to real alpha*n.
    power:  the geometric upper bound alpha^M; this is the approximation the
            closed-form optimum is derived from.
    """
    lo = params.alpha_min
    if not (lo - 1e-12 <= alpha <= 1.0 + 1e-12):
        raise ValueError(f"alpha={alpha} outside [{lo}, 1]")
    m_top = params.top_order
    n = params.n
    bias = params.bias_at_full_sample * alpha ** (-2.0 * params.bias_decay)
    first = params.first_order_variance * alpha
    if mode == "exact":
        k_int = max(m_top, round(alpha * n))
        atten = attenuation_factor(n, k_int, m_top)
    elif mode == "smooth":
        atten = 1.0
        for j in range(m_top):
            atten *= (alpha * n - j) / (n - j)
    elif mode == "power":
        atten = alpha**m_top
    else:
        raise ValueError(f"unknown variance mode {mode!r}")
    return bias + first + params.top_order_variance * atten


def bimodal_derivative(alpha: float, params: BimodalParams) -> float:
    """Closed-form derivative of the power-mode two-spike envelope."""
    if not (0.0 < alpha <= 1.0):
        raise ValueError(f"need 0 < alpha <= 1, got {alpha}")
    two_beta = 2.0 * params.bias_decay
    out = -two_beta * params.bias_at_full_sample * alpha ** (-two_beta - 1.0)
    out += params.first_order_variance
    out += params.top_order * params.top_order_variance * alpha ** (params.top_order - 1)
    return out


def _bisect_increasing_root(
    f: Callable[[float], float], lo: float, hi: float, tol: float = 1e-12
) -> float:
    flo, fhi = f(lo), f(hi)
    if flo >= 0.0:
        return lo
    if fhi <= 0.0:
        return hi
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if f(mid) < 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def bimodal_optimal_alpha(
    params: BimodalParams, mode: VarianceMode = "power", grid_size: int = 512
) -> OptimalAlphaResult:
    """Optimal ratio for the two-spike envelope.

    Power mode exploits that the derivative is strictly increasing: one
    bisection finds the stationary point or detects a boundary optimum.
    Exact mode is a staircase in alpha, so it gets a grid scan with no
    refinement; smooth mode gets the grid-plus-golden treatment.
    """
    lo = params.alpha_min
    if mode == "power":
        alpha = _bisect_increasing_root(
            lambda a: bimodal_derivative(a, params), lo, 1.0
        )
        step = (1.0 - lo) / (grid_size - 1)
        return OptimalAlphaResult(
            alpha=float(alpha),
            value=bimodal_envelope(alpha, params, mode="power"),
            at_boundary=bool(alpha - lo <= 1e-9 or 1.0 - alpha <= 1e-9),
            grid_step=step,
        )
    if mode == "exact":
        grid = np.linspace(lo, 1.0, grid_size)
        values = np.array([bimodal_envelope(a, params, mode="exact") for a in grid])
        best = len(grid) - 1 - int(np.argmin(values[::-1]))
        step = (1.0 - lo) / (grid_size - 1)
        return OptimalAlphaResult(
            alpha=float(grid[best]),
            value=float(values[best]),
            at_boundary=(best == 0 or best == grid_size - 1),
            grid_step=step,
        )
    return _grid_then_refine(
        lambda a: bimodal_envelope(a, params, mode="smooth"), lo, 1.0, grid_size, True
    )


@dataclass(frozen=True)
class DominatedPair:
    """Two spectra ordered by tail weight from a crossover order upward.

    Equal strictly below the crossover, no smaller at or above it, and
    strictly larger somewhere: the dominated spectrum carries more
    high-order interaction.
    """

    base: tuple[float, ...]
    dominated: tuple[float, ...]
    crossover: int

    def __post_init__(self) -> None:
        base = tuple(float(z) for z in self.base)
        dominated = tuple(float(z) for z in self.dominated)
        object.__setattr__(self, "base", base)
        object.__setattr__(self, "dominated", dominated)
        if len(base) != len(dominated):
            raise ValueError("spectra must share a length")
        if not (1 <= self.crossover <= len(base)):
            raise ValueError("crossover order must lie within the spectrum")
        for c in range(1, self.crossover):
            if base[c - 1] != dominated[c - 1]:
                raise ValueError(f"spectra must agree below the crossover (order {c})")
        strict = False
        for c in range(self.crossover, len(base) + 1):
            if dominated[c - 1] < base[c - 1]:
                raise ValueError(
                    f"dominated spectrum dips below base at order {c}"
                )
            if dominated[c - 1] > base[c - 1]:
                strict = True
        if not strict:
            raise ValueError("domination must be strict at some order")


@dataclass(frozen=True)
class ComparativeStaticsReport:
    """Optimal ratios for a dominated spectrum pair, with ordering verdicts."""

    alpha_base: float
    alpha_dominated: float
    both_interior: bool
    grid_step: float
    ordered_ok: bool
    strict_ok: bool


def comparative_statics_check(
    params: EnvelopeParams, pair: DominatedPair, grid_size: int = 512
) -> ComparativeStaticsReport:
    """More high-order interaction should never push the optimal ratio up.

    ordered_ok allows one grid step of numerical slack; strict_ok demands a
    half-step separation, but only when both optima are interior (at a
    shared boundary the ordering is an equality by construction).
    """
    if params.spectrum != pair.base:
        params = replace(params, spectrum=pair.base)
    base_res = optimal_alpha(params, grid_size=grid_size)
    dom_res = optimal_alpha(
        replace(params, spectrum=pair.dominated), grid_size=grid_size
    )
    both_interior = not base_res.at_boundary and not dom_res.at_boundary
    step = base_res.grid_step
    ordered = dom_res.alpha <= base_res.alpha + step
    strict = True
    if both_interior:
        strict = dom_res.alpha < base_res.alpha - 0.5 * step
    return ComparativeStaticsReport(
        alpha_base=base_res.alpha,
        alpha_dominated=dom_res.alpha,
        both_interior=both_interior,
        grid_step=step,
        ordered_ok=ordered,
        strict_ok=strict,
    )


@dataclass(frozen=True)
class ScalingLawFit:
    """Log-log response of the optimal ratio to the top-order variance weight."""

    slope: float
    predicted_slope: float
    alphas: tuple[float, ...]
    boundary_hits: int


def scaling_law_fit(
    params: BimodalParams, top_variance_grid: Sequence[float]
) -> ScalingLawFit:
    """Fit log(alpha*) against log(top-order weight) across a grid of weights.

    Uses the power-mode optimum, whose stationary point scales like the
    weight to the power -1/(top_order + 2 * bias_decay); the fitted slope
    should land on that exponent when every optimum is interior.
    """
    if len(top_variance_grid) < 2:
        raise ValueError("need at least two weights to fit a slope")
    alphas = []
    boundary = 0
    for w in top_variance_grid:
        res = bimodal_optimal_alpha(
            replace(params, top_order_variance=float(w)), mode="power"
        )
        alphas.append(res.alpha)
        boundary += int(res.at_boundary)
    slope = float(
        np.polyfit(np.log(np.asarray(top_variance_grid, dtype=float)),
                   np.log(np.asarray(alphas)), 1)[0]
    )
    predicted = -1.0 / (params.top_order + 2.0 * params.bias_decay)
    return ScalingLawFit(
        slope=slope,
        predicted_slope=predicted,
        alphas=tuple(alphas),
        boundary_hits=boundary,
    )
