"""Distribution of the k-th highest of n i.i.d. valuations.

Rank convention: k = 1 is the maximum. The cdf is the standard one,
``sum_{r<k} C(n, r) (1-F)^r F^(n-r)``, whose derivative is the density below.
Boundary conventions used by the auction sums: rank 0 has cdf 0 and density 0;
rank n + 1 has cdf 1 and density 0.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import ValuationDistribution

EXACT_MAX_N = 20
MAX_N = 64

# Pascal rows 0..EXACT_MAX_N as exact integers
_BINOM_TABLE = [[math.comb(n, r) for r in range(n + 1)] for n in range(EXACT_MAX_N + 1)]


def binom(n: int, r: int) -> float:
    if r < 0 or r > n:
        return 0.0
    if n <= EXACT_MAX_N:
        return float(_BINOM_TABLE[n][r])
    if n > MAX_N:
        raise ValueError(f"sample size n={n} exceeds the supported maximum {MAX_N}")
    return math.exp(math.lgamma(n + 1) - math.lgamma(r + 1) - math.lgamma(n - r + 1))


def density_coefficient(k: int, n: int) -> float:
    """n! / ((k-1)! (n-k)!) = n * C(n-1, k-1)."""
    return n * binom(n - 1, k - 1)


def _check(k: int, n: int) -> None:
    if n < 0 or n > MAX_N:
        raise ValueError(f"sample size n={n} out of range [0, {MAX_N}]")
    if k < 0 or k > n + 1:
        raise ValueError(f"rank k={k} out of range for n={n}")


def pdf_kth_highest(k: int, n: int, dist: ValuationDistribution, v):
    _check(k, n)
    v = np.asarray(v, dtype=float)
    if k == 0 or k == n + 1:
        return np.zeros_like(v)
    F = dist.cdf(v)
    return density_coefficient(k, n) * F ** (n - k) * (1.0 - F) ** (k - 1) * dist.pdf(v)


def cdf_kth_highest(k: int, n: int, dist: ValuationDistribution, v):
    _check(k, n)
    v = np.asarray(v, dtype=float)
    if k == 0:
        return np.zeros_like(v)
    if k == n + 1:
        return np.ones_like(v)
    F = dist.cdf(v)
    G = 1.0 - F
    out = np.zeros_like(F)
    for r in range(k):
        out = out + binom(n, r) * G ** r * F ** (n - r)
    return np.minimum(out, 1.0)


@dataclass(frozen=True)
class OrderStatQuery:
    k: int
    n: int
    dist: ValuationDistribution

    def __post_init__(self):
        if not 1 <= self.k <= self.n:
            raise ValueError(f"rank k={self.k} out of range for n={self.n}")

    def pdf(self, v):
        return pdf_kth_highest(self.k, self.n, self.dist, v)

    def cdf(self, v):
        return cdf_kth_highest(self.k, self.n, self.dist, v)
