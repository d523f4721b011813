"""Symmetric base procedures ("kernels") evaluated on small point multisets.

A kernel here is any function of k data points whose value does not depend
on their order.  Symmetry is enforced structurally: the wrapped function
only ever sees its arguments in a canonical sorted order, so two orderings
of the same points produce bit-identical results, including for
floating-point reductions that would otherwise be order-sensitive.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Callable, Sequence

__all__ = [
    "SymmetricKernel",
    "additive_kernel",
    "atom_sort_key",
    "constant_kernel",
    "make_kernel",
    "mean_kernel",
    "named_kernel_builders",
    "pairwise_max_kernel",
    "product_kernel",
    "random_symmetric_kernel",
]


def atom_sort_key(atom) -> tuple:
    """Total order on normalised atoms (floats, or (features, target) pairs)."""
    if isinstance(atom, tuple):
        flat: list[float] = []
        for part in atom:
            if isinstance(part, tuple):
                flat.extend(part)
            else:
                flat.append(part)
        return (1, tuple(flat))
    return (0, (atom,))


@dataclass(frozen=True)
class SymmetricKernel:
    """A symmetric function of `arity` data points.

    `fn` receives the points as a tuple already sorted by `atom_sort_key`;
    it never observes the caller's ordering.
    """

    arity: int
    fn: Callable[[tuple], float] = field(repr=False)
    name: str = "kernel"

    def __post_init__(self) -> None:
        if self.arity < 1:
            raise ValueError(f"kernel arity must be >= 1, got {self.arity}")

    def __call__(self, points: Sequence) -> float:
        if len(points) != self.arity:
            raise ValueError(
                f"kernel {self.name!r} takes {self.arity} points, got {len(points)}"
            )
        return float(self.fn(tuple(sorted(points, key=atom_sort_key))))


def constant_kernel(k: int, value: float = 1.0) -> SymmetricKernel:
    """Ignores its inputs entirely; every interaction variance is zero."""
    return SymmetricKernel(k, lambda pts: value, name=f"constant[{value}]")


def additive_kernel(k: int) -> SymmetricKernel:
    """Sum of the points: purely first-order structure."""
    return SymmetricKernel(k, lambda pts: sum(pts), name="additive")


def mean_kernel(k: int) -> SymmetricKernel:
    """Average of the points; the behaviour of a depth-0 regression tree."""
    return SymmetricKernel(k, lambda pts: sum(pts) / k, name="mean")


def product_kernel(k: int) -> SymmetricKernel:
    """Product of the points; for centred inputs all mass sits at the top order."""

    def fn(pts: tuple) -> float:
        out = 1.0
        for p in pts:
            out *= p
        return out

    return SymmetricKernel(k, fn, name="product")


def pairwise_max_kernel(k: int) -> SymmetricKernel:
    """Average of max(z_i, z_j) over pairs; mixes first- and second-order structure.

    Degenerates to the identity at k = 1, where no pair exists.
    """
    if k == 1:
        return SymmetricKernel(1, lambda pts: pts[0], name="pairwise-max")

    npairs = k * (k - 1) // 2

    def fn(pts: tuple) -> float:
        total = 0.0
        for i in range(k):
            for j in range(i + 1, k):
                total += max(pts[i], pts[j])
        return total / npairs

    return SymmetricKernel(k, fn, name="pairwise-max")


def random_symmetric_kernel(k: int, seed: int) -> SymmetricKernel:
    """A reproducible arbitrary symmetric function.

    Each distinct point multiset is mapped to a value in [-1, 1] through a
    keyed hash of its canonical ordering, so the function is symmetric by
    construction, deterministic across processes, and has no structure a
    decomposition could exploit.
    """

    cache: dict[tuple, float] = {}

    def fn(pts: tuple) -> float:
        got = cache.get(pts)
        if got is None:
            payload = repr((seed, pts)).encode()
            digest = hashlib.blake2b(payload, digest_size=8).digest()
            got = int.from_bytes(digest, "big") / 2.0**64 * 2.0 - 1.0
            cache[pts] = got
        return got

    return SymmetricKernel(k, fn, name=f"random-symmetric[{seed}]")


def named_kernel_builders() -> dict[str, Callable[..., SymmetricKernel]]:
    """Registry used by the CLI and service; keys are the public kernel names."""
    return {
        "constant": constant_kernel,
        "additive": additive_kernel,
        "mean": mean_kernel,
        "product": product_kernel,
        "pairwise-max": pairwise_max_kernel,
        "random-symmetric": random_symmetric_kernel,
    }


def make_kernel(name: str, k: int, seed: int | None = None) -> SymmetricKernel:
    """Build a kernel by public name; `seed` only applies to random-symmetric."""
    builders = named_kernel_builders()
    if name not in builders:
        raise ValueError(f"unknown kernel {name!r}; choose from {sorted(builders)}")
    if name == "random-symmetric":
        return builders[name](k, seed if seed is not None else 0)
    return builders[name](k)
