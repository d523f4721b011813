"""Exact interaction-variance decomposition of symmetric kernels on finite support.

Given a symmetric function h of k i.i.d. draws from a finite distribution,
this module computes the classical Hoeffding decomposition: the centred
projections of h onto each interaction order c, and the spectrum of their
variances.  All expectations are exact weighted sums over the support, so
the outputs serve as oracles for the ensemble-variance identities checked
elsewhere.  Work is refused, with the required count reported, when an
enumeration would exceed the evaluation cap.
"""

from __future__ import annotations

import itertools
import math
import numbers
import warnings
from collections import Counter
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .combinatorics import binomial, variance_closed_form
from .kernels import SymmetricKernel

__all__ = [
    "BaseVarianceReport",
    "CapExceededError",
    "DiscreteDistribution",
    "HoeffdingDecomposer",
    "MAX_PROJECTION_ORDER",
    "Spectrum",
    "base_variance",
    "canonical_projection",
    "check_degeneracy",
    "check_orthogonality",
    "hoeffding_spectrum",
    "marginal_expectation",
]

# Möbius inversion over subsets has 2^c terms; beyond this order the exact
# path stops being a sensible tool and the request is refused.
MAX_PROJECTION_ORDER = 12

DEFAULT_EVAL_CAP = 10_000_000

# Spectrum entries this far below zero are roundoff, not signal.
NEGATIVE_CLAMP = -1e-14


class CapExceededError(ValueError):
    """An exact enumeration was refused; `required` says how many evaluations it needs."""

    def __init__(self, message: str, required: int):
        super().__init__(message)
        self.required = required


def _normalize_atom(atom):
    """Coerce an atom to a hashable canonical form.

    Scalars become floats.  A (features, target) pair becomes a tuple of
    floats plus a float.  A flat sequence of numbers becomes a tuple of
    floats.
    """
    if isinstance(atom, numbers.Real):
        return float(atom)
    if isinstance(atom, (list, tuple, np.ndarray)):
        items = list(atom)
        if (
            len(items) == 2
            and isinstance(items[0], (list, tuple, np.ndarray))
            and isinstance(items[1], numbers.Real)
        ):
            return (tuple(float(v) for v in items[0]), float(items[1]))
        if all(isinstance(v, numbers.Real) for v in items):
            return tuple(float(v) for v in items)
    raise ValueError(f"cannot interpret support atom {atom!r}")


class DiscreteDistribution:
    """A finite distribution over data-point atoms.

    Atoms are canonicalised (floats, flat float tuples, or (features, target)
    pairs); duplicate atoms are merged into a single atom with their masses
    summed, keeping first-occurrence order.  Masses must be strictly positive
    and sum to one within 1e-12.
    """

    __slots__ = ("atoms", "probs", "_index")

    def __init__(self, atoms: Sequence, probs: Sequence[float]):
        if len(atoms) != len(probs):
            raise ValueError(f"{len(atoms)} atoms but {len(probs)} masses")
        if len(atoms) == 0:
            raise ValueError("support must be nonempty")
        merged: dict = {}
        for atom, p in zip(atoms, probs):
            p = float(p)
            if not (p > 0.0) or not math.isfinite(p):
                raise ValueError(f"atom masses must be strictly positive, got {p}")
            key = _normalize_atom(atom)
            merged[key] = merged.get(key, 0.0) + p
        total = math.fsum(merged.values())
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"masses must sum to 1 within 1e-12, got {total!r}")
        self.atoms: tuple = tuple(merged.keys())
        self.probs: np.ndarray = np.array(list(merged.values()), dtype=float)
        self._index: dict = {a: i for i, a in enumerate(self.atoms)}

    def __len__(self) -> int:
        return len(self.atoms)

    def index_of(self, atom) -> int:
        key = _normalize_atom(atom)
        got = self._index.get(key)
        if got is None:
            raise ValueError(f"atom {atom!r} is not in the support")
        return got

    @classmethod
    def uniform(cls, atoms: Sequence) -> "DiscreteDistribution":
        n = len(atoms)
        return cls(atoms, [1.0 / n] * n)

    @classmethod
    def rademacher(cls) -> "DiscreteDistribution":
        """Fair coin on {-1, +1}; the workhorse support for hand-checkable cases."""
        return cls([-1.0, 1.0], [0.5, 0.5])


@dataclass(frozen=True)
class Spectrum:
    """Interaction-variance spectrum of a symmetric k-point function.

    theta is the overall expectation; zetas[c-1] is the variance of the
    order-c centred projection.  Orders run 1 .. k.
    """

    theta: float
    zetas: tuple[float, ...]

    @property
    def order(self) -> int:
        return len(self.zetas)

    def single_draw_variance(self) -> float:
        """Variance of one draw: sum_c C(k, c) zeta_c."""
        k = self.order
        return math.fsum(binomial(k, c) * z for c, z in enumerate(self.zetas, start=1))

    def ensemble_variance(self, n: int) -> float:
        """Variance of the all-subsets ensemble on n points."""
        return variance_closed_form(self.zetas, n, self.order)

    def tail_mass(self, c_min: int) -> float:
        """Fraction of single-draw variance carried by orders >= c_min."""
        total = self.single_draw_variance()
        if total <= 0.0:
            return 0.0
        k = self.order
        tail = math.fsum(
            binomial(k, c) * z for c, z in enumerate(self.zetas, start=1) if c >= c_min
        )
        return tail / total


@dataclass(frozen=True)
class BaseVarianceReport:
    """Direct variance of one draw versus its spectrum reconstruction."""

    total: float
    per_order: tuple[float, ...]
    residual: float


def _clamp_variance(z: float, c: int) -> float:
    """Clamp roundoff-negative variance entries to zero; reject real negatives."""
    if z >= 0.0:
        return z
    if z < NEGATIVE_CLAMP:
        raise ValueError(
            f"order-{c} variance came out {z}, far below zero; "
            "the decomposition inputs are inconsistent"
        )
    warnings.warn(
        f"clamped order-{c} variance {z:.3e} to zero (roundoff)", stacklevel=3
    )
    return 0.0


def _multiset_weight(counts: Counter, probs: np.ndarray, size: int) -> float:
    """Total probability of all orderings of a support multiset."""
    arrangements = math.factorial(size)
    weight = 1.0
    for idx, mult in counts.items():
        arrangements //= math.factorial(mult)
        weight *= probs[idx] ** mult
    return arrangements * weight


class HoeffdingDecomposer:
    """Memoised decomposition engine for one (kernel, distribution) pair.

    Marginal expectations with any subset of arguments held fixed are cached
    on the sorted multiset of fixed atoms; projections and the spectrum reuse
    them, so repeated queries against the same pair cost almost nothing.
    """

    def __init__(
        self,
        kernel: SymmetricKernel,
        dist: DiscreteDistribution,
        eval_cap: int = DEFAULT_EVAL_CAP,
    ):
        self.kernel = kernel
        self.dist = dist
        self.k = kernel.arity
        self.m = len(dist)
        self.eval_cap = eval_cap
        required = binomial(self.m + self.k - 1, self.k)
        if required > eval_cap:
            raise CapExceededError(
                f"decomposing arity-{self.k} kernel on {self.m} atoms needs "
                f"{required} weighted kernel evaluations, cap is {eval_cap}",
                required=required,
            )
        self._marginals: dict[tuple[int, ...], float] = {}
        self._projections: dict[tuple[int, ...], float] = {}
        self._spectrum: Spectrum | None = None

    def _check_enumeration(self, required: int, what: str) -> None:
        if required > self.eval_cap:
            raise CapExceededError(
                f"{what} needs {required} weighted evaluations, cap is {self.eval_cap}",
                required=required,
            )

    def _marginal(self, idx: tuple[int, ...]) -> float:
        """E[h] with the atoms at `idx` (sorted support indices) held fixed."""
        got = self._marginals.get(idx)
        if got is not None:
            return got
        if len(idx) == self.k:
            val = self.kernel([self.dist.atoms[i] for i in idx])
        else:
            val = math.fsum(
                float(p) * self._marginal(tuple(sorted(idx + (a,))))
                for a, p in enumerate(self.dist.probs)
            )
        self._marginals[idx] = val
        return val

    def marginal_expectation(self, fixed: Sequence = ()) -> float:
        """Expectation of the kernel with some arguments pinned to support atoms."""
        if len(fixed) > self.k:
            raise ValueError(f"cannot fix {len(fixed)} of {self.k} arguments")
        idx = tuple(sorted(self.dist.index_of(a) for a in fixed))
        return self._marginal(idx)

    def theta(self) -> float:
        """Overall expectation of one draw."""
        return self._marginal(())

    def _projection_idx(self, idx: tuple[int, ...]) -> float:
        key = tuple(sorted(idx))
        got = self._projections.get(key)
        if got is not None:
            return got
        c = len(key)
        terms = []
        for j in range(c + 1):
            sign = 1.0 if (c - j) % 2 == 0 else -1.0
            for positions in itertools.combinations(range(c), j):
                sub = tuple(sorted(key[p] for p in positions))
                terms.append(sign * self._marginal(sub))
        val = math.fsum(terms)
        self._projections[key] = val
        return val

    def canonical_projection(self, points: Sequence) -> float:
        """Order-c centred projection of the kernel, evaluated at c support atoms.

        Computed by inclusion-exclusion over the fixed-argument marginals;
        the recursive subtract-all-lower-orders definition gives the same
        numbers (a test pins that).
        """
        c = len(points)
        if c > self.k:
            raise ValueError(f"projection order {c} exceeds kernel arity {self.k}")
        if c > MAX_PROJECTION_ORDER:
            raise CapExceededError(
                f"order-{c} projection needs 2^{c} inclusion-exclusion terms; "
                f"orders above {MAX_PROJECTION_ORDER} are refused",
                required=2**c,
            )
        idx = tuple(self.dist.index_of(a) for a in points)
        return self._projection_idx(idx)

    def spectrum(self) -> Spectrum:
        """All interaction variances zeta_1 .. zeta_k plus the mean.

        Tiny negative values (roundoff on an exactly-zero variance) are
        clamped to zero with a warning; anything below the clamp window
        raises, because a genuinely negative second moment means the inputs
        are inconsistent.
        """
        if self._spectrum is not None:
            return self._spectrum
        if self.k > MAX_PROJECTION_ORDER:
            raise CapExceededError(
                f"spectrum of an arity-{self.k} kernel needs order-{self.k} "
                f"projections; orders above {MAX_PROJECTION_ORDER} are refused",
                required=2**self.k,
            )
        zetas = []
        for c in range(1, self.k + 1):
            self._check_enumeration(
                binomial(self.m + c - 1, c), f"order-{c} spectrum entry"
            )
            acc = []
            for combo in itertools.combinations_with_replacement(range(self.m), c):
                w = _multiset_weight(Counter(combo), self.dist.probs, c)
                h = self._projection_idx(combo)
                acc.append(w * h * h)
            zetas.append(_clamp_variance(math.fsum(acc), c))
        self._spectrum = Spectrum(theta=self.theta(), zetas=tuple(zetas))
        return self._spectrum

    def check_degeneracy(self, c: int) -> float:
        """Worst residual of integrating one argument out of the order-c projection.

        Exactly zero in exact arithmetic for every c >= 1; the return value
        is the max over all assignments of the other c - 1 arguments.
        """
        if not (1 <= c <= self.k):
            raise ValueError(f"order must be in 1..{self.k}, got {c}")
        self._check_enumeration(
            binomial(self.m + c - 2, c - 1) * self.m, f"order-{c} degeneracy check"
        )
        worst = 0.0
        for fixed in itertools.combinations_with_replacement(range(self.m), c - 1):
            resid = math.fsum(
                float(p) * self._projection_idx(tuple(sorted(fixed + (a,))))
                for a, p in enumerate(self.dist.probs)
            )
            worst = max(worst, abs(resid))
        return worst

    def check_orthogonality(self, set1: Sequence[int], set2: Sequence[int]) -> float:
        """|E[h_{|C1|}(Z_C1) h_{|C2|}(Z_C2)]| for distinct argument index sets.

        The index sets live inside one size-k draw, so shared positions carry
        the same atom.  Exactly zero in exact arithmetic whenever C1 != C2.
        """
        c1 = tuple(sorted(set(set1)))
        c2 = tuple(sorted(set(set2)))
        if not c1 or not c2:
            raise ValueError("index sets must be nonempty")
        if c1 == c2:
            raise ValueError("index sets must differ for an orthogonality check")
        union = tuple(sorted(set(c1) | set(c2)))
        if union[-1] >= self.k:
            raise ValueError(f"index sets must live inside 0..{self.k - 1}")
        self._check_enumeration(self.m ** len(union), "orthogonality check")
        pos = {p: i for i, p in enumerate(union)}
        acc = []
        for assign in itertools.product(range(self.m), repeat=len(union)):
            w = 1.0
            for a in assign:
                w *= float(self.dist.probs[a])
            v1 = self._projection_idx(tuple(assign[pos[p]] for p in c1))
            v2 = self._projection_idx(tuple(assign[pos[p]] for p in c2))
            acc.append(w * v1 * v2)
        return abs(math.fsum(acc))

    def base_variance(self) -> BaseVarianceReport:
        """Variance of a single draw, directly and through the spectrum.

        The direct route enumerates full draws; per_order[c-1] = C(k, c)
        zeta_c is the spectral route.  Their residual is the headline
        diagnostic for the whole decomposition.
        """
        theta = self.theta()
        acc = []
        for combo in itertools.combinations_with_replacement(range(self.m), self.k):
            w = _multiset_weight(Counter(combo), self.dist.probs, self.k)
            h = self._marginal(combo)
            acc.append(w * (h - theta) ** 2)
        total = math.fsum(acc)
        spec = self.spectrum()
        per_order = tuple(
            binomial(self.k, c) * z for c, z in enumerate(spec.zetas, start=1)
        )
        residual = abs(total - math.fsum(per_order))
        return BaseVarianceReport(total=total, per_order=per_order, residual=residual)


def marginal_expectation(
    kernel: SymmetricKernel, dist: DiscreteDistribution, fixed: Sequence = ()
) -> float:
    return HoeffdingDecomposer(kernel, dist).marginal_expectation(fixed)


def canonical_projection(
    kernel: SymmetricKernel, dist: DiscreteDistribution, points: Sequence
) -> float:
    return HoeffdingDecomposer(kernel, dist).canonical_projection(points)


def hoeffding_spectrum(kernel: SymmetricKernel, dist: DiscreteDistribution) -> Spectrum:
    return HoeffdingDecomposer(kernel, dist).spectrum()


def check_degeneracy(kernel: SymmetricKernel, dist: DiscreteDistribution, c: int) -> float:
    return HoeffdingDecomposer(kernel, dist).check_degeneracy(c)


def check_orthogonality(
    kernel: SymmetricKernel,
    dist: DiscreteDistribution,
    set1: Sequence[int],
    set2: Sequence[int],
) -> float:
    return HoeffdingDecomposer(kernel, dist).check_orthogonality(set1, set2)


def base_variance(kernel: SymmetricKernel, dist: DiscreteDistribution) -> BaseVarianceReport:
    return HoeffdingDecomposer(kernel, dist).base_variance()
