"""Seeded synthetic random fields: iid noise, SMA(q) fields, SAR(1)-like fields."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.signal import fftconvolve

from .errors import InvalidRho, UnknownKind
from .grid import BlockPartition, MeanSurface, eval_mean_surface


class NoiseDist(str, enum.Enum):
    STD_NORMAL = "normal"
    STUDENT_T3 = "t3"
    CHISQ2_CENTERED = "chisq2"
    # all-zero innovations; used to check signal injection exactly
    ZERO = "zero"

    @classmethod
    def parse(cls, value) -> "NoiseDist":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise UnknownKind(f"unknown noise distribution {value!r}") from None


# population variances of the centered distributions
NOISE_VARIANCE = {
    NoiseDist.STD_NORMAL: 1.0,
    NoiseDist.STUDENT_T3: 3.0,
    NoiseDist.CHISQ2_CENTERED: 4.0,
    NoiseDist.ZERO: 0.0,
}


@dataclass(frozen=True)
class NoiseSpec:
    dist: NoiseDist = NoiseDist.STD_NORMAL
    seed: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "dist", NoiseDist.parse(self.dist))


class DepKind(str, enum.Enum):
    IID = "iid"
    SMA = "sma"
    SAR_APPROX = "sar"

    @classmethod
    def parse(cls, value) -> "DepKind":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise UnknownKind(f"unknown dependence kind {value!r}") from None


SAR_MIN_ORDER = 40


@dataclass(frozen=True)
class DependenceSpec:
    kind: DepKind = DepKind.IID
    q: int = 0
    rho: float = 0.0

    def __post_init__(self):
        kind = DepKind.parse(self.kind)
        object.__setattr__(self, "kind", kind)
        if kind is DepKind.IID:
            object.__setattr__(self, "q", 0)
        elif kind is DepKind.SMA and self.q < 1:
            raise ValueError("SMA order q must be >= 1")
        elif kind is DepKind.SAR_APPROX and self.q < SAR_MIN_ORDER:
            raise ValueError(f"SAR approximation needs q >= {SAR_MIN_ORDER}, got {self.q}")

    @property
    def label(self) -> str:
        if self.kind is DepKind.IID:
            return "iid"
        return f"{self.kind.value}({self.q})"

    @classmethod
    def sma(cls, q: int = 1, rho: float = 0.0) -> "DependenceSpec":
        return cls(DepKind.SMA, q, rho)

    @classmethod
    def sar(cls, rho: float, q: int = SAR_MIN_ORDER) -> "DependenceSpec":
        return cls(DepKind.SAR_APPROX, q, rho)


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def draw_noise(shape, dist: NoiseDist, rng: np.random.Generator) -> np.ndarray:
    """Centered draws: N(0,1), raw t_3 (variance 3), or chi^2_2 - 2 (variance 4)."""
    if dist is NoiseDist.STD_NORMAL:
        return rng.standard_normal(shape)
    if dist is NoiseDist.STUDENT_T3:
        return rng.standard_t(3, shape)
    if dist is NoiseDist.CHISQ2_CENTERED:
        return rng.chisquare(2, shape) - 2.0
    if dist is NoiseDist.ZERO:
        return np.zeros(shape)
    raise UnknownKind(dist)


def gen_iid(n: int, m: int, noise: NoiseSpec, rng=None) -> np.ndarray:
    """``n x m`` iid centered noise. ``rng`` (Generator or seed) overrides ``noise.seed``."""
    if n < 1 or m < 1:
        raise ValueError(f"invalid grid dimensions {n}x{m}")
    return draw_noise((n, m), noise.dist, _rng(noise.seed if rng is None else rng))


def sma_weights(q: int, rho: float) -> np.ndarray:
    """Stencil ``theta[k, l] = rho**(|k| + |l|)`` for ``k, l in -q..q``."""
    if not abs(rho) < 1:
        raise InvalidRho(f"|rho| must be < 1, got {rho}")
    if q < 0:
        raise ValueError("q must be nonnegative")
    d = np.abs(np.arange(-q, q + 1))
    dist = d[:, None] + d[None, :]
    return np.power(float(rho), dist)


def sar_approx_weights(q: int, rho: float) -> np.ndarray:
    """Radially decaying stencil ``rho**sqrt(i^2 + j^2)`` normalized to unit sum of squares."""
    if not 0 <= rho < 1:
        raise InvalidRho(f"rho must lie in [0, 1), got {rho}")
    if q < SAR_MIN_ORDER:
        raise ValueError(f"q must be >= {SAR_MIN_ORDER}, got {q}")
    k = np.arange(-q, q + 1)
    radius = np.sqrt(k[:, None] ** 2 + k[None, :] ** 2)
    raw = np.power(float(rho), radius)
    return raw / np.sqrt(np.sum(raw**2))


def stencil(dep: DependenceSpec) -> np.ndarray:
    if dep.kind is DepKind.IID:
        return np.ones((1, 1))
    if dep.kind is DepKind.SMA:
        return sma_weights(dep.q, dep.rho)
    if dep.kind is DepKind.SAR_APPROX:
        return sar_approx_weights(dep.q, dep.rho)
    raise UnknownKind(dep.kind)


def gen_dependent(n: int, m: int, dep: DependenceSpec, noise: NoiseSpec, rng=None) -> np.ndarray:
    """Moving-average field: every output cell sees the full stencil.

    An ``(n + 2q) x (m + 2q)`` innovation field is filtered and only the
    interior is kept, so the result is exactly stationary.
    """
    if dep.kind is DepKind.IID:
        return gen_iid(n, m, noise, rng)
    theta = stencil(dep)
    q = dep.q
    eps = draw_noise((n + 2 * q, m + 2 * q), noise.dist, _rng(noise.seed if rng is None else rng))
    # symmetric stencil, so convolution == correlation
    if q <= 3:
        out = np.zeros((n, m))
        for a in range(2 * q + 1):
            for b in range(2 * q + 1):
                out += theta[a, b] * eps[a : a + n, b : b + m]
        return out
    return fftconvolve(eps, theta, mode="valid")


def gen_field(
    n: int,
    m: int,
    surface: MeanSurface,
    dep: DependenceSpec,
    noise: NoiseSpec,
    p: Optional[BlockPartition] = None,
    rng=None,
) -> np.ndarray:
    """Signal plus noise: ``mu(i, j) + Y_ij``."""
    return eval_mean_surface(surface, n, m, p) + gen_dependent(n, m, dep, noise, rng)
