"""De-correlation of stationary grids by estimated autocovariances.

Pipeline: banded empirical autocovariances -> covariance matrix (dense, or a
Kronecker pair ``Sigma_1 (x) Sigma_2``) -> PSD repair -> Cholesky factor
``L`` -> ``y = L^{-1} (x - xbar)`` reshaped column-major.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg as sla
from scipy.linalg import toeplitz

from .errors import (
    DimensionMismatch,
    LagOutOfRange,
    NotSymmetric,
    SingularFactor,
    SizeGuardExceeded,
    UnknownKind,
    ZeroVariance,
)
from .grid import unvec, vec

DEFAULT_MAX_SIZE = 10_000
PIVOT_RTOL = 1e-12
FLOOR_RTOL = 1e-8


def bandwidth(k: int) -> int:
    """Lag cutoff ``floor(0.9 * k**(1/3))``."""
    if k < 1:
        raise ValueError(f"k must be positive, got {k}")
    root = k ** (1.0 / 3.0)
    # 1000 ** (1/3) == 9.999999999999998
    if round(root) ** 3 == k:
        root = float(round(root))
    return math.floor(0.9 * root)


def _canonical(h1: int, h2: int) -> tuple[int, int]:
    if h1 < 0 or (h1 == 0 and h2 < 0):
        return -h1, -h2
    return h1, h2


def empirical_autocov(grid: np.ndarray, h1: int, h2: int, center: Optional[float] = None) -> float:
    """Biased (divisor ``N``) autocovariance at lag ``(h1, h2)``.

    ``h1`` shifts rows (vertical), ``h2`` shifts columns (horizontal).
    """
    grid = np.asarray(grid, dtype=float)
    n, m = grid.shape
    if abs(h1) >= n or abs(h2) >= m:
        raise LagOutOfRange(f"lag ({h1}, {h2}) out of range for a {n}x{m} grid")
    h1, h2 = _canonical(h1, h2)
    c = grid - (grid.mean() if center is None else center)
    if h2 >= 0:
        prod = c[: n - h1, : m - h2] * c[h1:, h2:]
    else:
        prod = c[: n - h1, -h2:] * c[h1:, : m + h2]
    return float(prod.sum() / grid.size)


@dataclass
class AutocovTable:
    """Autocovariances on the canonical lag domain ``h1 > 0``, or ``h1 == 0, h2 >= 0``."""

    bandwidth: tuple[int, int]
    gamma: dict = field(default_factory=dict)

    def __call__(self, h1: int, h2: int) -> float:
        h1, h2 = _canonical(h1, h2)
        if h1 > self.bandwidth[0] or abs(h2) > self.bandwidth[1]:
            return 0.0
        return self.gamma.get((h1, h2), 0.0)

    @property
    def degenerate(self) -> bool:
        return not self.gamma.get((0, 0), 0.0) > 0

    def lag_array(self) -> np.ndarray:
        """Full ``(2 b1 + 1) x (2 b2 + 1)`` array, entry ``[h1 + b1, h2 + b2]``."""
        b1, b2 = self.bandwidth
        out = np.zeros((2 * b1 + 1, 2 * b2 + 1))
        for h1 in range(-b1, b1 + 1):
            for h2 in range(-b2, b2 + 1):
                out[h1 + b1, h2 + b2] = self(h1, h2)
        return out


def estimate_autocov_table(grid: np.ndarray, band: Optional[tuple[int, int]] = None) -> AutocovTable:
    grid = np.asarray(grid, dtype=float)
    n, m = grid.shape
    if n < 2 or m < 2:
        raise DimensionMismatch("autocovariance estimation needs n, m >= 2")
    b1, b2 = band if band is not None else (bandwidth(n), bandwidth(m))
    b1, b2 = min(b1, n - 1), min(b2, m - 1)
    xbar = grid.mean()
    gamma = {}
    for h1 in range(0, b1 + 1):
        for h2 in range(-b2, b2 + 1):
            if h1 == 0 and h2 < 0:
                continue
            gamma[(h1, h2)] = empirical_autocov(grid, h1, h2, center=xbar)
    return AutocovTable((b1, b2), gamma)


class CovForm(str, enum.Enum):
    FULL = "full"
    SEPARABLE = "separable"

    @classmethod
    def parse(cls, value) -> "CovForm":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise UnknownKind(f"unknown de-correlation method {value!r}") from None


@dataclass
class CovarianceModel:
    form: CovForm
    n: int
    m: int
    full: Optional[np.ndarray] = None
    # horizontal (m x m) and vertical (n x n) factors: Sigma = sigma1 (x) sigma2
    sigma1: Optional[np.ndarray] = None
    sigma2: Optional[np.ndarray] = None
    # Cholesky factors keyed by "full" / "sigma1" / "sigma2", filled by fit_covariance
    factors: dict = field(default_factory=dict, repr=False)

    def dense(self) -> np.ndarray:
        if self.form is CovForm.FULL:
            return self.full
        return np.kron(self.sigma1, self.sigma2)


def assemble_full(table: AutocovTable, n: int, m: int, max_size: int = DEFAULT_MAX_SIZE) -> CovarianceModel:
    """Dense ``N x N`` covariance of ``vec(X)``: entry ``[(i,j), (i',j')] = gamma(i'-i, j'-j)``."""
    N = n * m
    if N > max_size:
        raise SizeGuardExceeded(f"N = {N} exceeds the dense-assembly guard {max_size}")
    b1, b2 = table.bandwidth
    c1, c2 = min(b1, n - 1), min(b2, m - 1)
    # lag[d1 + n - 1, d2 + m - 1] = gamma(d1, d2), zero outside the band
    lag = np.zeros((2 * n - 1, 2 * m - 1))
    lag[n - 1 - c1 : n + c1, m - 1 - c2 : m + c2] = table.lag_array()[
        b1 - c1 : b1 + c1 + 1, b2 - c2 : b2 + c2 + 1
    ]
    i = np.arange(n)
    j = np.arange(m)
    di = i[None, :] - i[:, None] + n - 1  # [i, i'] -> i' - i
    dj = j[None, :] - j[:, None] + m - 1
    # axes (j, i, j', i') flatten to column-major vec indices on both sides
    full = lag[di[None, :, None, :], dj[:, None, :, None]].reshape(N, N)
    return CovarianceModel(CovForm.FULL, n, m, full=full)


def assemble_separable(grid: np.ndarray) -> CovarianceModel:
    """Kronecker pair: horizontal covariance (m x m) and vertical correlation (n x n)."""
    grid = np.asarray(grid, dtype=float)
    n, m = grid.shape
    if n < 2 or m < 2:
        raise DimensionMismatch("separable assembly needs n, m >= 2")
    xbar = grid.mean()
    b1, b2 = min(bandwidth(n), n - 1), min(bandwidth(m), m - 1)
    g0 = empirical_autocov(grid, 0, 0, center=xbar)
    if not g0 > 0:
        raise ZeroVariance("lag-0 autocovariance is zero")
    horiz = np.zeros(m)
    horiz[: b2 + 1] = [empirical_autocov(grid, 0, h, center=xbar) for h in range(b2 + 1)]
    vert = np.zeros(n)
    vert[: b1 + 1] = [empirical_autocov(grid, h, 0, center=xbar) / g0 for h in range(b1 + 1)]
    vert[0] = 1.0
    return CovarianceModel(CovForm.SEPARABLE, n, m, sigma1=toeplitz(horiz), sigma2=toeplitz(vert))


def _inf_norm(M: np.ndarray) -> float:
    return float(np.max(np.sum(np.abs(M), axis=1))) if M.size else 0.0


def _check_symmetric(M: np.ndarray) -> None:
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise NotSymmetric(f"expected a square matrix, got shape {M.shape}")
    scale = max(_inf_norm(M), 1.0)
    if np.max(np.abs(M - M.T), initial=0.0) > 1e-12 * scale:
        raise NotSymmetric("matrix is not symmetric")


class RepairMethod(str, enum.Enum):
    MODCHOL = "modchol"
    FLOOR = "floor"

    @classmethod
    def parse(cls, value) -> "RepairMethod":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise UnknownKind(f"unknown PSD repair method {value!r}") from None


def modified_cholesky(M: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Schnabel-Eskow revised modified Cholesky factorization.

    Returns ``(L, perm, e)`` with ``M[perm][:, perm] + diag(e[perm]) = L L^T``;
    ``e`` is nonnegative and indexed like ``M``. ``e`` is zero when ``M`` is
    comfortably positive definite. Columns are formed left-looking, so each
    step costs one matrix-vector product.
    """
    A = np.asarray(M, dtype=float)
    n = A.shape[0]
    eps = np.finfo(float).eps
    tau, taubar, mu = eps ** (1 / 3), eps ** (2 / 3), 0.1
    L = np.zeros((n, n))
    e = np.zeros(n)
    if n == 0:
        return L, np.arange(0), e
    # scale by the largest entry, not just the diagonal, so a vanishing diagonal cannot zero the thresholds
    gamma = float(np.max(np.abs(A))) or 1.0
    perm = np.arange(n)
    d = np.diag(A).copy()  # diagonal of the current Schur complement
    g = np.zeros(n)  # Gershgorin lower bounds, phase two only

    def swap(i, j):
        if i != j:
            for arr in (perm, d, g, e):
                arr[[i, j]] = arr[[j, i]]
            L[[i, j], :] = L[[j, i], :]

    def column(j):
        return A[perm[j + 1 :], perm[j]] - L[j + 1 :, :j] @ L[j, :j]

    def step(j, djj, col):
        L[j, j] = math.sqrt(djj)
        L[j + 1 :, j] = col / L[j, j]
        d[j + 1 :] -= L[j + 1 :, j] ** 2

    # phase one: ordinary pivoted Cholesky while the matrix stays safely positive
    j = 0
    while j < n:
        if d[j:].max() < taubar * gamma:
            break
        swap(j + int(np.argmax(d[j:])), j)
        col = column(j)
        if j + 1 < n and np.min(d[j + 1 :] - col**2 / d[j]) < -mu * gamma:
            break
        step(j, d[j], col)
        j += 1
    if j == n:
        return L, perm, e

    # phase two: Gershgorin-guided diagonal increments
    k = j
    if n - k == 1:
        delta = max(0.0, -d[k] + max(-tau * d[k] / (1 - tau), taubar * gamma))
        e[k] = delta
        L[k, k] = math.sqrt(d[k] + delta)
        out = np.empty(n)
        out[perm] = e
        return L, perm, out
    S = A[np.ix_(perm[k:], perm[k:])] - L[k:, :k] @ L[k:, :k].T
    diag = np.diag(S)
    g[k:] = diag - (np.abs(S).sum(axis=1) - np.abs(diag))
    delta_prev = 0.0
    for j in range(k, n - 2):
        swap(j + int(np.argmax(g[j:])), j)
        col = column(j)
        normj = float(np.abs(col).sum())
        delta = max(0.0, -d[j] + max(normj, taubar * gamma), delta_prev)
        djj = d[j]
        if delta > 0:
            djj += delta
            e[j] = delta
            delta_prev = delta
        if djj != normj:
            g[j + 1 :] += np.abs(col) * (1.0 - normj / djj)
        step(j, djj, col)
    j = n - 2
    off = float(column(j)[0])
    lo, hi = np.linalg.eigvalsh(np.array([[d[j], off], [off, d[j + 1]]]))
    delta = max(0.0, -lo + max(tau * (hi - lo) / (1 - tau), taubar * gamma), delta_prev)
    e[j] += delta
    e[j + 1] += delta
    step(j, d[j] + delta, np.array([off]))
    L[j + 1, j + 1] = math.sqrt(d[j + 1] + delta)
    out = np.empty(n)
    out[perm] = e
    return L, perm, out


def psd_repair(M: np.ndarray, method="modchol", floor_rtol: float = FLOOR_RTOL) -> np.ndarray:
    """Return ``M`` if it has a Cholesky factor, else a positive definite repair.

    ``method="modchol"`` (default) adds the diagonal increments of the
    Schnabel-Eskow modified Cholesky factorization. ``method="floor"`` raises
    eigenvalues below ``floor_rtol * ||M||_inf`` to that floor, a perturbation
    with ``||E||_2 <= |lambda_min| + floor``.
    """
    M = np.asarray(M, dtype=float)
    _check_symmetric(M)
    try:
        np.linalg.cholesky(M)
        return M
    except np.linalg.LinAlgError:
        pass
    if RepairMethod.parse(method) is RepairMethod.MODCHOL:
        _, _, e = modified_cholesky(M)
        return M + np.diag(e)
    floor = floor_rtol * _inf_norm(M)
    lam, V = np.linalg.eigh(M)
    lam = np.maximum(lam, floor)
    out = (V * lam) @ V.T
    return (out + out.T) / 2


def cholesky_factor(M: np.ndarray, pivot_rtol: float = PIVOT_RTOL) -> np.ndarray:
    M = np.asarray(M, dtype=float)
    try:
        L = sla.cholesky(M, lower=True, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise SingularFactor(str(exc)) from None
    tol = pivot_rtol * _inf_norm(M)
    if np.any(np.diag(L) ** 2 < tol) or not np.any(M):
        raise SingularFactor("Cholesky pivot below tolerance")
    return L


def inverse_sqrt(M: np.ndarray) -> np.ndarray:
    """``W = L^{-1}`` for the Cholesky factor ``M = L L^T``, so ``W M W^T = I``."""
    L = cholesky_factor(M)
    return sla.solve_triangular(L, np.eye(L.shape[0]), lower=True, check_finite=False)


def whiten(grid: np.ndarray, model: CovarianceModel) -> np.ndarray:
    """Transform ``grid - mean`` by the inverse Cholesky factor of the model covariance."""
    grid = np.asarray(grid, dtype=float)
    n, m = grid.shape
    if (n, m) != (model.n, model.m):
        raise DimensionMismatch(f"model is {model.n}x{model.m}, grid is {n}x{m}")

    def factor(name):
        if name not in model.factors:
            model.factors[name] = cholesky_factor(getattr(model, name))
        return model.factors[name]

    centered = grid - grid.mean()
    if model.form is CovForm.FULL:
        y = sla.solve_triangular(factor("full"), vec(centered), lower=True, check_finite=False)
        return unvec(y, n, m)
    # vec(W2 C W1^T) = (W1 (x) W2) vec(C)
    left = sla.solve_triangular(factor("sigma2"), centered, lower=True, check_finite=False)
    return sla.solve_triangular(factor("sigma1"), left.T, lower=True, check_finite=False).T


def _repair_and_factor(M: np.ndarray, repair) -> tuple[np.ndarray, np.ndarray]:
    try:
        return M, cholesky_factor(M)
    except SingularFactor:
        repaired = psd_repair(M, repair)
        return repaired, cholesky_factor(repaired)


def fit_covariance(
    grid: np.ndarray, method="full", max_size: int = DEFAULT_MAX_SIZE, repair="modchol"
) -> CovarianceModel:
    """Estimate a covariance model for ``grid``, PSD-repaired and factorized."""
    form = CovForm.parse(method)
    grid = np.asarray(grid, dtype=float)
    if form is CovForm.FULL:
        table = estimate_autocov_table(grid)
        if table.degenerate:
            raise ZeroVariance("lag-0 autocovariance is zero")
        model = assemble_full(table, *grid.shape, max_size=max_size)
        names = ("full",)
    else:
        model = assemble_separable(grid)
        names = ("sigma1", "sigma2")
    for name in names:
        M, L = _repair_and_factor(getattr(model, name), repair)
        setattr(model, name, M)
        model.factors[name] = L
    return model


def decorrelate_grid(
    grid: np.ndarray, method="full", max_size: int = DEFAULT_MAX_SIZE, repair="modchol"
) -> np.ndarray:
    return whiten(grid, fit_covariance(grid, method, max_size=max_size, repair=repair))
