"""Monte Carlo harness: empirical size, raw power and size-corrected power.

Each replication draws one noise field per ``(n, dist, dep)`` cell from a
seed derived from ``(master_seed, cell, rep)``. Every surface and amplitude
is added to that same noise draw, so null and alternative cells share noise
realizations. The size correction uses those matched null statistics.
"""

from __future__ import annotations

import csv
import io
import math
import time
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields
from typing import Optional, Sequence, Union

import numpy as np

from .changetests import TestKind, compute_statistic
from .decorrelate import CovForm, RepairMethod, decorrelate_grid
from .errors import InsufficientNullSample
from .fieldgen import DependenceSpec, DepKind, NoiseDist, NoiseSpec, gen_dependent
from .grid import MeanSurface, SurfaceKind, eval_mean_surface, make_partition, sample_variance

MIN_REPS = 100

REPORT_COLUMNS = (
    "test", "n", "dist", "dep_kind", "rho", "surface", "amplitude",
    "decorrelated", "reps", "rate", "se", "crit_value",
)


def parse_dependence(value) -> DependenceSpec:
    """``"iid"``, ``"sma:q:rho"``, ``"sar:rho"`` or ``"sar:q:rho"``."""
    if isinstance(value, DependenceSpec):
        return value
    parts = str(value).lower().split(":")
    kind = DepKind.parse(parts[0])
    if kind is DepKind.IID:
        return DependenceSpec()
    if kind is DepKind.SMA:
        if len(parts) != 3:
            raise ValueError(f"expected 'sma:q:rho', got {value!r}")
        return DependenceSpec.sma(int(parts[1]), float(parts[2]))
    if len(parts) == 2:
        return DependenceSpec.sar(float(parts[1]))
    if len(parts) == 3:
        return DependenceSpec.sar(float(parts[2]), q=int(parts[1]))
    raise ValueError(f"expected 'sar:rho' or 'sar:q:rho', got {value!r}")


def _parse_decorrelate(value) -> Optional[CovForm]:
    if value is None or value is False or str(value).lower() in ("", "none", "false", "no"):
        return None
    if value is True or str(value).lower() in ("true", "yes"):
        return CovForm.FULL
    return CovForm.parse(value)


@dataclass
class ExperimentConfig:
    n_values: Sequence[int]
    master_seed: int
    s_target: float = 0.6
    alpha: float = 0.05
    reps: int = 1000
    tests: Sequence[Union[str, TestKind]] = ("gmd", "var")
    noise: Sequence[Union[str, NoiseDist]] = ("normal",)
    dep: Sequence[Union[str, DependenceSpec]] = ("iid",)
    surfaces: Sequence[Union[str, SurfaceKind]] = ("a2",)
    amplitudes: Sequence[float] = (0.0,)
    decorrelate: Optional[Union[str, bool, CovForm]] = None
    repair: Union[str, RepairMethod] = "modchol"
    size_corrected: bool = False
    workers: int = 1

    def __post_init__(self):
        if self.master_seed is None:
            raise ValueError("master_seed is required")
        self.n_values = [int(n) for n in self.n_values]
        self.tests = [TestKind.parse(t) for t in self.tests]
        self.noise = [NoiseDist.parse(d) for d in self.noise]
        self.dep = [parse_dependence(d) for d in self.dep]
        self.surfaces = [SurfaceKind.parse(s) for s in self.surfaces]
        self.amplitudes = [float(a) for a in self.amplitudes]
        self.decorrelate = _parse_decorrelate(self.decorrelate)
        self.repair = RepairMethod.parse(self.repair)
        if self.reps < 1:
            raise ValueError("reps must be positive")
        if not 0 < self.alpha <= 1:
            raise ValueError(f"alpha must lie in (0, 1], got {self.alpha}")
        if self.size_corrected and 0.0 not in self.amplitudes:
            raise ValueError("size correction needs amplitude 0 in the amplitude grid")

    @classmethod
    def from_mapping(cls, data: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        if data.get("master_seed") is None:
            raise ValueError("master_seed is required; randomized runs are never seeded implicitly")
        if "n_values" not in data:
            raise ValueError("n_values is required")
        return cls(**data)


def load_config(path, **overrides) -> ExperimentConfig:
    """Read a flat TOML file whose keys mirror :class:`ExperimentConfig` fields."""
    try:
        import tomllib
    except ModuleNotFoundError:  # Python < 3.11
        import tomli as tomllib
    with open(path, "rb") as fh:
        data = tomllib.load(fh)
    data.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentConfig.from_mapping(data)


@dataclass
class ReportRow:
    test: str
    n: int
    dist: str
    dep_kind: str
    rho: float
    surface: str
    amplitude: float
    decorrelated: str
    reps: int
    rate: float
    se: float
    crit_value: float = math.nan
    seconds: float = math.nan

    def csv_values(self) -> list[str]:
        out = []
        for name in REPORT_COLUMNS:
            v = getattr(self, name)
            if isinstance(v, float):
                out.append("" if math.isnan(v) else repr(v))
            else:
                out.append(str(v))
        return out


@dataclass
class ExperimentReport:
    rows: list[ReportRow]
    metadata: dict = field(default_factory=dict)

    def find(self, **keys) -> list[ReportRow]:
        return [r for r in self.rows if all(getattr(r, k) == v for k, v in keys.items())]

    def rate(self, **keys) -> float:
        found = self.find(**keys)
        if len(found) != 1:
            raise KeyError(f"{len(found)} rows match {keys}")
        return found[0].rate


@dataclass
class CellStats:
    """Statistics and p-values of one ``(n, dist, dep)`` cell, per surface/amplitude/test."""

    n: int
    dist: NoiseDist
    dep: DependenceSpec
    statistic: dict  # (test, surface, amplitude) -> array of length reps
    p_value: dict
    seconds: float


@dataclass
class SimulationResult:
    config: ExperimentConfig
    cells: list[CellStats]


def _cell_key(n: int, dist: NoiseDist, dep: DependenceSpec) -> int:
    return zlib.crc32(f"{n}|{dist.value}|{dep.kind.value}|{dep.q}|{dep.rho!r}".encode())


def replication_rng(master_seed: int, n: int, dist: NoiseDist, dep: DependenceSpec, rep: int):
    seq = np.random.SeedSequence(int(master_seed), spawn_key=(_cell_key(n, dist, dep), int(rep)))
    return np.random.default_rng(seq)


def _one_replication(config: ExperimentConfig, n, dist, dep, p, rep):
    rng = replication_rng(config.master_seed, n, dist, dep, rep)
    noise = gen_dependent(n, n, dep, NoiseSpec(dist), rng=rng)
    out = {}
    null_cache = None
    for surface in config.surfaces:
        for a in config.amplitudes:
            if a == 0.0 and null_cache is not None:
                for t in config.tests:
                    out[(t, surface, a)] = null_cache[t]
                continue
            grid = noise + eval_mean_surface(MeanSurface(surface, a), n, n, p)
            if config.decorrelate is not None:
                grid = decorrelate_grid(grid, config.decorrelate, repair=config.repair)
            s2 = sample_variance(grid)
            res = {t: compute_statistic(grid, t, p, s2) for t in config.tests}
            for t in config.tests:
                out[(t, surface, a)] = (res[t].statistic, res[t].p_value)
            if a == 0.0:
                null_cache = {t: (res[t].statistic, res[t].p_value) for t in config.tests}
    return out


def run_experiment(config: ExperimentConfig) -> SimulationResult:
    """Simulate every configured cell; results do not depend on ``config.workers``."""
    cells = []
    for n in config.n_values:
        p = make_partition(n, n, config.s_target)
        for dist in config.noise:
            for dep in config.dep:
                start = time.perf_counter()

                def job(rep, n=n, dist=dist, dep=dep, p=p):
                    return _one_replication(config, n, dist, dep, p, rep)

                if config.workers > 1:
                    with ThreadPoolExecutor(config.workers) as pool:
                        reps = list(pool.map(job, range(config.reps)))
                else:
                    reps = [job(r) for r in range(config.reps)]
                stat, pval = {}, {}
                for key in reps[0]:
                    stat[key] = np.array([r[key][0] for r in reps])
                    pval[key] = np.array([r[key][1] for r in reps])
                cells.append(CellStats(n, dist, dep, stat, pval, time.perf_counter() - start))
    return SimulationResult(config, cells)


def _rate_row(config, cell, test, surface, a, rate, crit=math.nan) -> ReportRow:
    se = math.sqrt(rate * (1 - rate) / config.reps)
    return ReportRow(
        test=test.value,
        n=cell.n,
        dist=cell.dist.value,
        dep_kind=cell.dep.label,
        rho=float(cell.dep.rho),
        surface=surface,
        amplitude=a,
        decorrelated=config.decorrelate.value if config.decorrelate else "none",
        reps=config.reps,
        rate=rate,
        se=se,
        crit_value=crit,
        seconds=cell.seconds,
    )


_PAIRING_NOTE = "null and alternative cells share noise draws per (n, dist, dep, rep)"


def _metadata(config) -> dict:
    return {"master_seed": config.master_seed, "alpha": config.alpha, "seed_pairing": _PAIRING_NOTE}


def _null_key(config):
    return (config.surfaces[0], 0.0)


def _ensure_result(config, result):
    if config.reps < MIN_REPS:
        raise ValueError(f"reported rates need reps >= {MIN_REPS}, got {config.reps}")
    return result if result is not None else run_experiment(config)


def simulate_size(config: ExperimentConfig, result: Optional[SimulationResult] = None) -> ExperimentReport:
    """Rejection rates at amplitude 0, one row per ``(test, n, dist, dep)``."""
    if 0.0 not in config.amplitudes:
        raise ValueError("size simulation needs amplitude 0 in the amplitude grid")
    result = _ensure_result(config, result)
    rows = []
    surface, a = _null_key(config)
    for cell in result.cells:
        for t in config.tests:
            rate = float(np.mean(cell.p_value[(t, surface, a)] <= config.alpha))
            rows.append(_rate_row(config, cell, t, SurfaceKind.CONSTANT.value, 0.0, rate))
    return ExperimentReport(rows, _metadata(config))


def simulate_power(config: ExperimentConfig, result: Optional[SimulationResult] = None) -> ExperimentReport:
    """Rejection rates at the nominal level for every surface and amplitude."""
    if not config.amplitudes:
        raise ValueError("empty amplitude grid")
    result = _ensure_result(config, result)
    rows = []
    for cell in result.cells:
        for t in config.tests:
            for surface in config.surfaces:
                for a in config.amplitudes:
                    rate = float(np.mean(cell.p_value[(t, surface, a)] <= config.alpha))
                    rows.append(_rate_row(config, cell, t, surface.value, a, rate))
    return ExperimentReport(rows, _metadata(config))


def empirical_critical_value(null_stats: np.ndarray, alpha: float) -> float:
    null_stats = np.asarray(null_stats)
    if null_stats.size < MIN_REPS:
        raise InsufficientNullSample(f"need >= {MIN_REPS} null replications, got {null_stats.size}")
    return float(np.quantile(null_stats, 1 - alpha))


def size_corrected_power(config: ExperimentConfig, result: Optional[SimulationResult] = None) -> ExperimentReport:
    """Power against the empirical ``1 - alpha`` quantile of the matched null statistics."""
    if 0.0 not in config.amplitudes:
        raise ValueError("size correction needs amplitude 0 in the amplitude grid")
    if config.reps < MIN_REPS:
        raise InsufficientNullSample(f"need >= {MIN_REPS} null replications, got {config.reps}")
    result = _ensure_result(config, result)
    rows = []
    null_surface, _ = _null_key(config)
    for cell in result.cells:
        for t in config.tests:
            crit = empirical_critical_value(cell.statistic[(t, null_surface, 0.0)], config.alpha)
            for surface in config.surfaces:
                for a in config.amplitudes:
                    rate = float(np.mean(cell.statistic[(t, surface, a)] > crit))
                    rows.append(_rate_row(config, cell, t, surface.value, a, rate, crit))
    report = ExperimentReport(rows, _metadata(config))
    report.metadata["correction"] = "empirical critical value from matched null sample"
    return report


def run_report(config: ExperimentConfig) -> ExperimentReport:
    """Everything the config asks for: raw rates, plus size-corrected rows if requested."""
    result = _ensure_result(config, None)
    report = simulate_power(config, result)
    if config.size_corrected:
        report.rows.extend(size_corrected_power(config, result).rows)
    return report


def emit_report(report: ExperimentReport, fmt: str = "csv") -> str:
    """Serialize as long-format CSV (``fmt="csv"``) or an aligned text table (``"text"``)."""
    if not report.rows:
        raise ValueError("empty report")
    table = [list(REPORT_COLUMNS)] + [r.csv_values() for r in report.rows]
    if fmt == "csv":
        buf = io.StringIO()
        csv.writer(buf, lineterminator="\n").writerows(table)
        return buf.getvalue()
    if fmt == "text":
        shown = [[_short(v) for v in row] for row in table]
        widths = [max(len(row[k]) for row in shown) for k in range(len(REPORT_COLUMNS))]
        return "\n".join("  ".join(v.rjust(w) for v, w in zip(row, widths)) for row in shown) + "\n"
    raise ValueError(f"unknown report format {fmt!r}")


def _short(v: str) -> str:
    try:
        f = float(v)
    except ValueError:
        return v
    if "." in v or "e" in v:
        return f"{f:.4g}"
    return v


def parse_report(text: str) -> ExperimentReport:
    reader = csv.reader(io.StringIO(text))
    header = next(reader)
    if tuple(header) != REPORT_COLUMNS:
        raise ValueError(f"unexpected report header {header}")
    types = {f.name: f.type for f in fields(ReportRow)}
    rows = []
    for rec in reader:
        kw = {}
        for name, v in zip(header, rec):
            t = types[name]
            if t in ("int", int):
                kw[name] = int(v)
            elif t in ("float", float):
                kw[name] = math.nan if v == "" else float(v)
            else:
                kw[name] = v
        rows.append(ReportRow(**kw))
    return ExperimentReport(rows)
