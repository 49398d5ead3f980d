"""Grid data model: validation, vectorization, block partitions and mean surfaces.

A grid is a plain ``(n, m)`` float array; row index ``i`` is vertical, column
index ``j`` horizontal. All matrix/vector conversions are column-major.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import (
    DegenerateGrid,
    DimensionMismatch,
    NoValidPartition,
    UnknownKind,
)


def as_grid(values) -> np.ndarray:
    """Return ``values`` as a validated 2-D float array (copy-free when possible)."""
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise DimensionMismatch(f"expected a non-empty 2-D grid, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("grid contains NaN or infinite values")
    return arr


def vec(grid: np.ndarray) -> np.ndarray:
    return np.asarray(grid).reshape(-1, order="F")


def unvec(x: np.ndarray, n: int, m: int) -> np.ndarray:
    x = np.asarray(x)
    if x.size != n * m:
        raise DimensionMismatch(f"vector of length {x.size} cannot hold a {n}x{m} grid")
    return x.reshape((n, m), order="F")


@dataclass(frozen=True)
class BlockPartition:
    l_n: int
    l_m: int
    b_n: int
    b_m: int
    s_n: float = float("nan")
    s_m: float = float("nan")

    @property
    def n(self) -> int:
        return self.l_n * self.b_n

    @property
    def m(self) -> int:
        return self.l_m * self.b_m

    @property
    def n_blocks(self) -> int:
        return self.b_n * self.b_m

    @property
    def block_size(self) -> int:
        return self.l_n * self.l_m

    def check(self, n: int, m: int) -> None:
        if self.n != n or self.m != m:
            raise DimensionMismatch(
                f"partition {self.l_n}x{self.b_n} / {self.l_m}x{self.b_m} "
                f"does not tile a {n}x{m} grid"
            )


def _split_length(k: int, s_target: float) -> tuple[int, int, float]:
    if k < 4:
        raise NoValidPartition(f"dimension {k} < 4 admits no block split")
    best = None
    for l in range(2, k // 2 + 1):
        if k % l:
            continue
        s = math.log(l) / math.log(k)
        key = (round(abs(s - s_target), 12), -l)
        if best is None or key < best[0]:
            best = (key, l, s)
    if best is None:
        raise NoValidPartition(f"dimension {k} is prime; no block length divides it")
    _, l, s = best
    return l, k // l, s


def make_partition(n: int, m: int, s_target: float = 0.6) -> BlockPartition:
    """Choose block lengths ``l ~ n**s_target`` that divide each dimension exactly.

    Per dimension, the divisor pair ``(l, b)`` with ``l, b >= 2`` minimizing
    ``|log l / log n - s_target|`` wins; ties go to the larger ``l``.
    """
    if not 0.0 < s_target < 1.0:
        raise ValueError(f"s_target must lie in (0, 1), got {s_target}")
    l_n, b_n, s_n = _split_length(int(n), s_target)
    l_m, b_m, s_m = _split_length(int(m), s_target)
    return BlockPartition(l_n, l_m, b_n, b_m, s_n, s_m)


def block_means(grid: np.ndarray, p: BlockPartition) -> np.ndarray:
    """Arithmetic means of the ``l_n x l_m`` tiles, returned as a ``b_n x b_m`` array."""
    grid = np.asarray(grid, dtype=float)
    p.check(*grid.shape)
    return grid.reshape(p.b_n, p.l_n, p.b_m, p.l_m).mean(axis=(1, 3))


def sample_variance(grid: np.ndarray) -> float:
    grid = np.asarray(grid, dtype=float)
    if grid.size < 2:
        raise DegenerateGrid("sample variance needs at least two observations")
    return float(np.var(grid, ddof=1))


class SurfaceKind(str, enum.Enum):
    CONSTANT = "constant"
    A1 = "a1"
    A2 = "a2"
    A3 = "a3"
    A4 = "a4"
    CUSTOM = "custom"

    @classmethod
    def parse(cls, value) -> "SurfaceKind":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise UnknownKind(f"unknown mean surface kind {value!r}") from None


@dataclass(frozen=True)
class MeanSurface:
    """Deterministic mean function ``mu(i, j)``; ``amplitude`` is the shift height in data units."""

    kind: SurfaceKind = SurfaceKind.CONSTANT
    amplitude: float = 0.0
    custom: Optional[np.ndarray] = None

    def __post_init__(self):
        object.__setattr__(self, "kind", SurfaceKind.parse(self.kind))


def eval_mean_surface(
    spec: MeanSurface, n: int, m: int, p: Optional[BlockPartition] = None
) -> np.ndarray:
    """Evaluate a mean surface on the ``n x m`` index grid.

    Region bounds are in index space (1-based, rounded down):

    * A1: the first block ``{1..l_n} x {1..l_m}`` (needs ``p``)
    * A2: the left half, ``j <= m/2``
    * A3: linear trend ``(j-1)/(m-1)`` in the horizontal index
    * A4: an L-shape, ``(n/4 < i <= n/2, j <= m/2)`` plus ``(i <= n/4, m/4 < j <= m/2)``
    """
    a = float(spec.amplitude)
    kind = spec.kind
    out = np.zeros((n, m))
    i = np.arange(1, n + 1)[:, None]
    j = np.arange(1, m + 1)[None, :]
    if kind is SurfaceKind.CONSTANT:
        out[:] = a
    elif kind is SurfaceKind.A1:
        if p is None:
            raise ValueError("the A1 surface needs a block partition")
        out[: p.l_n, : p.l_m] = a
    elif kind is SurfaceKind.A2:
        out[:, : m // 2] = a
    elif kind is SurfaceKind.A3:
        if m > 1:
            out[:] = a * (j - 1) / (m - 1) + 0.0 * i
    elif kind is SurfaceKind.A4:
        region = ((i > n // 4) & (i <= n // 2) & (j <= m // 2)) | (
            (i <= n // 4) & (j > m // 4) & (j <= m // 2)
        )
        out[region] = a
    elif kind is SurfaceKind.CUSTOM:
        if spec.custom is None:
            raise ValueError("custom surface without a matrix")
        custom = np.asarray(spec.custom, dtype=float)
        if custom.shape != (n, m):
            raise DimensionMismatch(f"custom surface has shape {custom.shape}, expected {(n, m)}")
        out[:] = custom
    else:  # pragma: no cover - enum is closed
        raise UnknownKind(kind)
    return out
