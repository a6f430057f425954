"""Uniform square grid over the plane and RSS binning.

Both indices use floor semantics: cell ``k`` covers the half-open interval
``[origin + k*size, origin + (k+1)*size)`` and RSS bin ``b`` covers
``[b*s, (b+1)*s)``. The integer guess from plain floor division is corrected
against the very expressions used for the cell bounds, so a point always
lies inside the cell it is assigned to, even at float rounding edges.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, NamedTuple, Tuple

import numpy as np

Point = Tuple[float, float]


class GridId(NamedTuple):
    ix: int
    iy: int

    def __str__(self):
        return f"{self.ix},{self.iy}"


@dataclass(frozen=True)
class GridSpec:
    cell_size: float
    origin: Point = (0.0, 0.0)

    def __post_init__(self):
        if not (math.isfinite(self.cell_size) and self.cell_size > 0):
            raise ValueError(f"cell_size must be positive, got {self.cell_size!r}")
        ox, oy = self.origin
        if not (math.isfinite(ox) and math.isfinite(oy)):
            raise ValueError("grid origin must be finite")
        object.__setattr__(self, "origin", (float(ox), float(oy)))
        object.__setattr__(self, "cell_size", float(self.cell_size))

    @classmethod
    def covering(cls, points: Iterable[Point], cell_size: float) -> "GridSpec":
        """Grid whose origin is the lower-left corner of the points' bounding box."""
        xs, ys = [], []
        for x, y in points:
            xs.append(x)
            ys.append(y)
        if not xs:
            return cls(cell_size)
        return cls(cell_size, (min(xs), min(ys)))

    @property
    def diagonal(self) -> float:
        return self.cell_size * math.sqrt(2.0)


@dataclass(frozen=True)
class BinSpec:
    bin_size: float = 1.0

    def __post_init__(self):
        if not (math.isfinite(self.bin_size) and self.bin_size > 0):
            raise ValueError(f"bin_size must be positive, got {self.bin_size!r}")
        object.__setattr__(self, "bin_size", float(self.bin_size))


def _floor_index(value: float, origin: float, size: float) -> int:
    # largest k with origin + k*size <= value, evaluated in floating point
    k = math.floor((value - origin) / size)
    while origin + (k + 1) * size <= value:
        k += 1
    while origin + k * size > value:
        k -= 1
    return k


def grid_of(p: Point, spec: GridSpec) -> GridId:
    x, y = p
    ox, oy = spec.origin
    return GridId(_floor_index(x, ox, spec.cell_size), _floor_index(y, oy, spec.cell_size))


def center_of(g: GridId, spec: GridSpec) -> Point:
    ox, oy = spec.origin
    return (ox + (g[0] + 0.5) * spec.cell_size, oy + (g[1] + 0.5) * spec.cell_size)


def cell_bounds(g: GridId, spec: GridSpec) -> Tuple[float, float, float, float]:
    ox, oy = spec.origin
    s = spec.cell_size
    return (ox + g[0] * s, oy + g[1] * s, ox + (g[0] + 1) * s, oy + (g[1] + 1) * s)


def grid_of_many(xy, spec: GridSpec) -> np.ndarray:
    """Vectorized :func:`grid_of` over an ``(n, 2)`` array; returns int64 ``(n, 2)``."""
    xy = np.asarray(xy, dtype=float).reshape(-1, 2)
    origin = np.asarray(spec.origin, dtype=float)
    s = spec.cell_size
    k = np.floor((xy - origin) / s).astype(np.int64)
    # same correction as _floor_index; at most one step is ever needed
    k += (origin + (k + 1) * s <= xy)
    k -= (origin + k * s > xy)
    return k


def bin_rss(r: float, spec: BinSpec) -> int:
    """Bin index ``floor(r / s)``; -55.5 dBm with ``s=1`` lands in bin -56."""
    if not math.isfinite(r):
        raise ValueError(f"cannot bin non-finite RSS {r!r}")
    return _floor_index(r, 0.0, spec.bin_size)
