"""Grid CSV files, NDVI, tiling and the tile-scan pipeline."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .changetests import TestResult, holm_adjust, run_test
from .errors import DimensionMismatch, NotDivisible, ParseError
from .grid import as_grid


def read_grid(path, delimiter: str = ",", header: bool = False) -> np.ndarray:
    """Read a rectangular CSV of reals; rows of the file are grid rows."""
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh, delimiter=delimiter)
        for lineno, rec in enumerate(reader, start=1):
            if header and lineno == 1:
                continue
            if not rec or all(not f.strip() for f in rec):
                continue
            try:
                values = [float(f) for f in rec]
            except ValueError:
                col = next(k for k, f in enumerate(rec, start=1) if not _is_float(f))
                raise ParseError(f"{path}: row {lineno}, column {col}: not a number: {rec[col - 1]!r}") from None
            bad = [k for k, v in enumerate(values, start=1) if not np.isfinite(v)]
            if bad:
                raise ParseError(f"{path}: row {lineno}, column {bad[0]}: non-finite value")
            if rows and len(values) != len(rows[0]):
                raise ParseError(
                    f"{path}: row {lineno} has {len(values)} fields, expected {len(rows[0])}"
                )
            rows.append(values)
    if not rows:
        raise ParseError(f"{path}: no data rows")
    return np.array(rows, dtype=float)


def _is_float(s: str) -> bool:
    try:
        float(s)
    except ValueError:
        return False
    return True


def write_grid(grid, path, delimiter: str = ",") -> None:
    """Write with 17 significant digits, which round-trips doubles exactly."""
    grid = as_grid(grid)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, delimiter=delimiter, lineterminator="\n")
        for row in grid:
            writer.writerow([format(v, ".17g") for v in row])


def ndvi(red, nir) -> tuple[np.ndarray, int]:
    """Normalized difference ``(nir - red) / (nir + red)``.

    Cells with ``nir + red == 0`` are set to 0; their count is returned
    alongside the index grid.
    """
    red = as_grid(red)
    nir = as_grid(nir)
    if red.shape != nir.shape:
        raise DimensionMismatch(f"band shapes differ: {red.shape} vs {nir.shape}")
    if np.any(red < 0) or np.any(nir < 0):
        raise ValueError("band reflectances must be nonnegative")
    total = nir + red
    zero = total == 0
    out = np.divide(nir - red, total, out=np.zeros_like(total), where=~zero)
    return out, int(zero.sum())


def split_grid(grid, rows: int, cols: int) -> list[np.ndarray]:
    """Cut into ``rows x cols`` equal tiles, listed in row-major tile order."""
    grid = as_grid(grid)
    n, m = grid.shape
    if rows < 1 or cols < 1 or n % rows or m % cols:
        raise NotDivisible(f"a {n}x{m} grid cannot be split into {rows}x{cols} equal tiles")
    th, tw = n // rows, m // cols
    return [grid[r * th : (r + 1) * th, c * tw : (c + 1) * tw] for r in range(rows) for c in range(cols)]


def join_tiles(tiles, rows: int, cols: int) -> np.ndarray:
    if len(tiles) != rows * cols:
        raise DimensionMismatch(f"expected {rows * cols} tiles, got {len(tiles)}")
    return np.block([[tiles[r * cols + c] for c in range(cols)] for r in range(rows)])


@dataclass
class TileResult:
    index: int
    row: int
    col: int
    result: TestResult
    adjusted_p: float
    reject: bool

    def to_json(self) -> dict:
        out = {"tile": self.index, "tile_row": self.row, "tile_col": self.col}
        out.update(self.result.to_json())
        out["holm_p_value"] = self.adjusted_p
        out["reject"] = self.reject
        return out


def scan_grid(
    grid,
    rows: int,
    cols: int,
    test: str = "var",
    decorrelate: Optional[str] = "separable",
    alpha: float = 0.05,
    s_target: float = 0.6,
    repair: str = "modchol",
) -> list[TileResult]:
    """Test every tile (each whitened on its own) and Holm-adjust across tiles."""
    tiles = split_grid(grid, rows, cols)
    opts = {"repair": repair} if decorrelate else {}
    results = [run_test(t, test, s_target, decorrelate, **opts) for t in tiles]
    reject, adjusted = holm_adjust([r.p_value for r in results], alpha)
    return [
        TileResult(k, k // cols, k % cols, res, float(adjusted[k]), bool(reject[k]))
        for k, res in enumerate(results)
    ]


def tile_map(tiles: list[TileResult], rows: int, cols: int) -> str:
    """Plain-text table of tile p-values; Holm rejections carry a ``*``."""
    lines = []
    for r in range(rows):
        cells = []
        for c in range(cols):
            t = tiles[r * cols + c]
            cells.append(f"{t.result.p_value:.3f}{'*' if t.reject else ' '}")
        lines.append("  ".join(cells))
    return "\n".join(lines) + "\n"
