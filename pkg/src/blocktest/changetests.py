"""Block-based tests for a constant mean: the GMD test and the Var test.

Both statistics are standardized to be asymptotically N(0, 1) under a
constant mean and diverge to +inf under alternatives, so p-values are
one-sided upper tails.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np
from scipy.stats import norm

from .errors import InvalidP, TooFewBlocks, UnknownKind, ZeroVariance
from .decorrelate import decorrelate_grid
from .grid import BlockPartition, as_grid, block_means, make_partition, sample_variance

# limiting variance of the unstandardized GMD statistic
GMD_ASYMPTOTIC_VARIANCE = 4.0 / 3.0 + (8.0 / math.pi) * (math.sqrt(3.0) - 2.0)
GMD_NULL_CENTER = 2.0 / math.sqrt(math.pi)


class TestKind(str, enum.Enum):
    __test__ = False  # not a pytest class

    GMD = "gmd"
    VAR = "var"

    @classmethod
    def parse(cls, value) -> "TestKind":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise UnknownKind(f"unknown test {value!r}") from None


@dataclass(frozen=True)
class TestResult:
    __test__ = False  # not a pytest class

    kind: TestKind
    raw: float
    statistic: float
    p_value: float
    partition: BlockPartition
    sigma2_hat: float
    decorrelated: Optional[str] = None

    def to_json(self) -> dict:
        p = self.partition
        return {
            "test": self.kind.value,
            "n": p.n,
            "m": p.m,
            "l_n": p.l_n,
            "l_m": p.l_m,
            "b_n": p.b_n,
            "b_m": p.b_m,
            "statistic": self.statistic,
            "p_value": self.p_value,
            "sigma2_hat": self.sigma2_hat,
            "decorrelated": self.decorrelated,
        }


def p_value(statistic: float) -> float:
    """Upper-tail standard normal probability ``1 - Phi(statistic)``."""
    return float(norm.sf(statistic))


def gmd_U(means: np.ndarray) -> float:
    """Gini's mean difference over all unordered pairs of block means.

    Uses the order-statistic form ``2/(B(B-1)) * sum_i (2i - B - 1) x_(i)``,
    which is O(B log B).
    """
    x = np.sort(np.asarray(means, dtype=float).ravel())
    B = x.size
    if B < 2:
        raise TooFewBlocks(f"need at least 2 blocks, got {B}")
    weights = 2.0 * np.arange(1, B + 1) - B - 1
    return float(2.0 * np.dot(weights, x) / (B * (B - 1)))


def _check_sigma2(sigma2_hat: float) -> None:
    if not sigma2_hat > 0:
        raise ZeroVariance(f"variance estimate must be positive, got {sigma2_hat}")


def gmd_statistic(grid: np.ndarray, p: BlockPartition, sigma2_hat: float) -> TestResult:
    _check_sigma2(sigma2_hat)
    U = gmd_U(block_means(grid, p))
    G = math.sqrt(p.n_blocks) * (math.sqrt(p.block_size / sigma2_hat) * U - GMD_NULL_CENTER)
    stat = G / math.sqrt(GMD_ASYMPTOTIC_VARIANCE)
    return TestResult(TestKind.GMD, U, stat, p_value(stat), p, float(sigma2_hat))


def var_statistic(grid: np.ndarray, p: BlockPartition, sigma2_hat: float) -> TestResult:
    """Standardized between-block variance, including the +1 small-sample correction."""
    _check_sigma2(sigma2_hat)
    grid = np.asarray(grid, dtype=float)
    mu = block_means(grid, p)
    B = p.n_blocks
    # sum(mu^2) - B * xbar^2, in the cancellation-free centered form
    spread = float(np.sum((mu - mu.mean()) ** 2))
    raw = p.block_size / sigma2_hat * spread
    stat = (raw - B + 1) / math.sqrt(2 * B)
    return TestResult(TestKind.VAR, raw, stat, p_value(stat), p, float(sigma2_hat))


def between_block_variability(grid: np.ndarray, p: BlockPartition) -> float:
    """``T(n, m)``: mean squared deviation of block means from the overall mean."""
    mu = block_means(grid, p)
    return float(np.mean((mu - np.mean(grid)) ** 2))


STATISTICS = {TestKind.GMD: gmd_statistic, TestKind.VAR: var_statistic}


def compute_statistic(grid, kind, p: BlockPartition, sigma2_hat: float) -> TestResult:
    return STATISTICS[TestKind.parse(kind)](grid, p, sigma2_hat)


def holm_adjust(p_values, alpha: float = 0.05) -> tuple[np.ndarray, np.ndarray]:
    """Holm's step-down procedure.

    Returns
    -------
    reject : bool array in the input order
    adjusted : Holm-adjusted p-values in the input order
    """
    p = np.asarray(p_values, dtype=float).ravel()
    if np.any(~np.isfinite(p)) or np.any((p < 0) | (p > 1)):
        raise InvalidP("p-values must lie in [0, 1]")
    if not 0 < alpha < 1:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    M = p.size
    order = np.argsort(p, kind="stable")
    sorted_p = p[order]
    factors = M - np.arange(M)
    adjusted_sorted = np.minimum(1.0, np.maximum.accumulate(factors * sorted_p))
    below = sorted_p <= alpha / factors
    # stop at the first non-rejection
    n_reject = M if below.all() else int(np.argmin(below))
    reject_sorted = np.arange(M) < n_reject
    reject = np.empty(M, dtype=bool)
    adjusted = np.empty(M)
    reject[order] = reject_sorted
    adjusted[order] = adjusted_sorted
    return reject, adjusted


def run_test(
    grid,
    kind="var",
    s_target: float = 0.6,
    decorrelate: Optional[str] = None,
    partition: Optional[BlockPartition] = None,
    **decorrelate_opts,
) -> TestResult:
    """Whiten (optionally), partition, estimate sigma^2 and evaluate one statistic.

    ``decorrelate`` is ``None``, ``"full"`` or ``"separable"``.
    """
    grid = as_grid(grid)
    if decorrelate:
        grid = decorrelate_grid(grid, decorrelate, **decorrelate_opts)
    p = partition or make_partition(*grid.shape, s_target)
    result = compute_statistic(grid, kind, p, sample_variance(grid))
    if decorrelate:
        result = replace(result, decorrelated=str(decorrelate))
    return result
