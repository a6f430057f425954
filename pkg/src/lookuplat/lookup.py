"""Lookup lateration: per-antenna, per-RSS-bin tables of reference locations.

Offline, every surveyed reading ``(antenna, rss)`` files the sample's
location under ``tables[(antenna, bin)]``. Online, a query is localized by
intersecting only the cells named by its own readings, strongest first, so
query cost is bounded by the number of readings and never by the size of
the reference survey.

Two entry kinds are supported. In grid mode entries are :class:`GridId`
values and filtering is exact set intersection. In continuous mode entries
are cluster centers and a candidate survives if some entry of the next
table lies within the tolerance.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from scipy.spatial import ConvexHull, cKDTree
from scipy.spatial.distance import pdist

from .errors import NoInformationError, ParseError
from .estimate import LocationEstimate, Status
from .grid import BinSpec, GridId, GridSpec, Point, bin_rss, center_of, grid_of
from .scenario import AntennaId, LocatedSample, Measurement, antenna_sort_key, parse_antenna_id

GRID = "grid"
CONTINUOUS = "continuous"

FORMAT_TAG = "lookuplat-tables"
FORMAT_VERSION = 1

CellKey = Tuple[AntennaId, int]


@dataclass
class LookupTables:
    mode: str
    bin_spec: BinSpec
    cells: Dict[CellKey, FrozenSet] = field(default_factory=dict)
    grid_spec: Optional[GridSpec] = None
    cluster_diameter: Optional[float] = None
    antennas: Dict[AntennaId, Point] = field(default_factory=dict)

    def __post_init__(self):
        if self.mode not in (GRID, CONTINUOUS):
            raise ValueError(f"unknown table mode {self.mode!r}")
        if self.mode == GRID and self.grid_spec is None:
            raise ValueError("grid mode needs a grid spec")
        if self.mode == CONTINUOUS and not (self.cluster_diameter and self.cluster_diameter > 0):
            raise ValueError("continuous mode needs a positive cluster diameter")

    def __len__(self):
        return len(self.cells)

    def entry_position(self, entry) -> Point:
        if self.mode == GRID:
            return center_of(entry, self.grid_spec)
        return entry

    def positions(self, entries: Iterable) -> np.ndarray:
        arr = np.array(list(entries), dtype=float).reshape(-1, 2)
        if self.mode == GRID:
            return np.asarray(self.grid_spec.origin) + (arr + 0.5) * self.grid_spec.cell_size
        return arr

    def default_spread_threshold(self) -> float:
        # grid mode keeps filtering until a single grid is left
        return 0.0 if self.mode == GRID else float(self.cluster_diameter)

    def default_tolerance(self) -> float:
        return 0.0 if self.mode == GRID else 2.0 * float(self.cluster_diameter)

    def distinct_entries(self) -> set:
        out = set()
        for entries in self.cells.values():
            out.update(entries)
        return out


# -- clustering ------------------------------------------------------------

def _leader_clusters(points: np.ndarray, diameter: float):
    """Single-pass leader clustering; returns ``(centers, labels)``.

    A point joins the first cluster whose running-mean center is within
    ``diameter/2`` and whose members, the point included, all stay within
    ``diameter/2`` of the updated mean; otherwise it founds a new cluster.
    """
    radius = diameter / 2.0
    sums: List[np.ndarray] = []
    members: List[List[int]] = []
    centers = np.zeros((0, 2))
    labels = np.empty(len(points), dtype=np.int64)
    for i, p in enumerate(points):
        chosen = -1
        if len(centers):
            near = np.flatnonzero(np.hypot(*(centers - p).T) <= radius)
            for c in near:
                n = len(members[c]) + 1
                new_center = (sums[c] + p) / n
                pts = points[members[c] + [i]]
                if np.all(np.hypot(*(pts - new_center).T) <= radius):
                    chosen = int(c)
                    break
        if chosen < 0:
            sums.append(p.astype(float).copy())
            members.append([i])
            centers = np.vstack([centers, p[None, :]])
            chosen = len(members) - 1
        else:
            sums[chosen] = sums[chosen] + p
            members[chosen].append(i)
            centers[chosen] = sums[chosen] / len(members[chosen])
        labels[i] = chosen
    return centers, labels


def cluster_locations(points: Sequence[Point], diameter: float) -> List[Point]:
    """Group nearby points; each center is the mean of its members."""
    if not diameter > 0:
        raise ValueError("cluster diameter must be positive")
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    if len(pts) == 0:
        return []
    centers, _ = _leader_clusters(pts, diameter)
    return [(float(x), float(y)) for x, y in centers]


# -- construction ----------------------------------------------------------

def construct_lookup_tables(
    samples: Iterable[LocatedSample],
    bin_spec: BinSpec,
    mode: str = GRID,
    *,
    grid_spec: Optional[GridSpec] = None,
    cluster_diameter: Optional[float] = None,
    antennas: Optional[Mapping[AntennaId, Point]] = None,
) -> LookupTables:
    tables = LookupTables(
        mode, bin_spec, {}, grid_spec=grid_spec, cluster_diameter=cluster_diameter,
        antennas=dict(antennas or {}),
    )
    if mode == GRID:
        cells: Dict[CellKey, set] = defaultdict(set)
        for s in samples:
            g = grid_of(s.position, grid_spec)
            for aid, r in s.measurement.readings.items():
                cells[(aid, bin_rss(r, bin_spec))].add(g)
        tables.cells = {k: frozenset(v) for k, v in cells.items()}
        return tables

    groups: Dict[CellKey, List[Point]] = defaultdict(list)
    for s in samples:
        for aid, r in s.measurement.readings.items():
            groups[(aid, bin_rss(r, bin_spec))].append(s.position)
    tables.cells = {k: frozenset(cluster_locations(v, cluster_diameter)) for k, v in groups.items()}
    return tables


# -- querying --------------------------------------------------------------

def spread(points: np.ndarray) -> float:
    """Maximum pairwise distance of a point set."""
    pts = np.unique(np.asarray(points, dtype=float).reshape(-1, 2), axis=0)
    if len(pts) < 2:
        return 0.0
    if len(pts) > 64:
        try:
            pts = pts[ConvexHull(pts).vertices]
        except Exception:
            # degenerate (collinear) set: the extremes along its direction suffice
            axis = pts[-1] - pts[0]
            proj = pts @ axis
            pts = pts[[int(np.argmin(proj)), int(np.argmax(proj))]]
    return float(pdist(pts).max())


def _spread_exceeds(points: np.ndarray, threshold: float) -> bool:
    if len(points) < 2:
        return False
    lo = points.min(axis=0)
    hi = points.max(axis=0)
    w, h = hi - lo
    if math.hypot(w, h) <= threshold:
        return False
    if max(w, h) > threshold:
        return True
    return spread(points) > threshold


def _grid_spread_exceeds(cands, tables: LookupTables, threshold: float) -> bool:
    if len(cands) < 2:
        return False
    if threshold <= 0:
        # distinct grid centers are at least one cell apart
        return True
    return _spread_exceeds(tables.positions(cands), threshold)


def _near_any(cands: np.ndarray, targets: np.ndarray, tolerance: float) -> np.ndarray:
    if len(cands) * len(targets) <= 200_000:
        d2 = ((cands[:, None, :] - targets[None, :, :]) ** 2).sum(axis=2)
        return (d2 <= tolerance * tolerance).any(axis=1)
    d, _ = cKDTree(targets).query(cands, k=1)
    return d <= tolerance


def lookup_laterate(
    m: Measurement,
    tables: LookupTables,
    tolerance: Optional[float] = None,
    spread_threshold: Optional[float] = None,
) -> LocationEstimate:
    """Greedy intersection of the query's lookup cells, strongest reading first."""
    if not m:
        raise NoInformationError("empty measurement")
    if tolerance is None:
        tolerance = tables.default_tolerance()
    if spread_threshold is None:
        spread_threshold = tables.default_spread_threshold()

    ordered = m.strongest_first()
    touches = 0
    usable = []
    for aid, r in ordered:
        touches += 1
        cell = tables.cells.get((aid, bin_rss(r, tables.bin_spec)))
        if cell:
            usable.append(cell)

    if not usable:
        strongest = ordered[0][0]
        pos = tables.antennas.get(strongest)
        if pos is None:
            raise NoInformationError(f"no table hit and no position known for antenna {strongest!r}")
        return LocationEstimate(tuple(pos), Status.FALLBACK, 0, (), touches)

    k = 1
    if tables.mode == GRID:
        cands = usable[0]
        while k < len(usable) and _grid_spread_exceeds(cands, tables, spread_threshold):
            kept = cands & usable[k]
            k += 1
            if not kept:
                # an emptied candidate set falls back to the previous one
                break
            cands = kept
        cands = sorted(cands)
        pos = tables.positions(cands)
    else:
        cands = sorted(usable[0])
        pos = tables.positions(cands)
        while k < len(usable) and _spread_exceeds(pos, spread_threshold):
            mask = _near_any(pos, tables.positions(usable[k]), tolerance)
            k += 1
            kept = [c for c, keep in zip(cands, mask) if keep]
            if not kept:
                break
            cands = kept
            pos = tables.positions(cands)

    mean = pos.mean(axis=0)
    status = Status.AMBIGUOUS if _spread_exceeds(pos, spread_threshold) else Status.RESOLVED
    return LocationEstimate((float(mean[0]), float(mean[1])), status, len(cands), tuple(cands), touches)


# -- serialization ---------------------------------------------------------

def _fmt_entry(entry, mode):
    if mode == GRID:
        return f"{entry[0]},{entry[1]}"
    return f"{entry[0]!r},{entry[1]!r}"


def dump_tables(tables: LookupTables, fh) -> None:
    """Canonical line-text artifact: sorted antennas, cells and entries."""
    fh.write(f"{FORMAT_TAG} {FORMAT_VERSION}\n")
    fh.write(f"mode {tables.mode}\n")
    fh.write(f"bin {tables.bin_spec.bin_size!r}\n")
    if tables.grid_spec is not None:
        ox, oy = tables.grid_spec.origin
        fh.write(f"grid {ox!r} {oy!r} {tables.grid_spec.cell_size!r}\n")
    if tables.cluster_diameter is not None:
        fh.write(f"diameter {float(tables.cluster_diameter)!r}\n")
    for aid in sorted(tables.antennas, key=antenna_sort_key):
        x, y = tables.antennas[aid]
        fh.write(f"antenna {aid} {float(x)!r} {float(y)!r}\n")
    for aid, b in sorted(tables.cells, key=lambda k: (antenna_sort_key(k[0]), k[1])):
        entries = " ".join(_fmt_entry(e, tables.mode) for e in sorted(tables.cells[(aid, b)]))
        fh.write(f"cell {aid} {b} {entries}\n")


def load_tables(fh) -> LookupTables:
    header = {}
    antennas = {}
    cells = {}
    mode = None
    for n, raw in enumerate(fh, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        tag = parts[0]
        try:
            if n == 1 or not header and tag == FORMAT_TAG:
                if tag != FORMAT_TAG or int(parts[1]) != FORMAT_VERSION:
                    raise ParseError(f"not a lookup table artifact (header {line!r})", n)
                header["version"] = int(parts[1])
            elif tag == "mode":
                mode = parts[1]
            elif tag == "bin":
                header["bin"] = BinSpec(float(parts[1]))
            elif tag == "grid":
                header["grid"] = GridSpec(float(parts[3]), (float(parts[1]), float(parts[2])))
            elif tag == "diameter":
                header["diameter"] = float(parts[1])
            elif tag == "antenna":
                antennas[parse_antenna_id(parts[1])] = (float(parts[2]), float(parts[3]))
            elif tag == "cell":
                aid = parse_antenna_id(parts[1])
                b = int(parts[2])
                entries = []
                for tok in parts[3:]:
                    a, c = tok.split(",")
                    entries.append(GridId(int(a), int(c)) if mode == GRID else (float(a), float(c)))
                cells[(aid, b)] = frozenset(entries)
            else:
                raise ParseError(f"unknown record {tag!r}", n)
        except (IndexError, ValueError) as exc:
            if isinstance(exc, ParseError):
                raise
            raise ParseError(f"malformed record {line!r}: {exc}", n) from None
    if "version" not in header or mode is None or "bin" not in header:
        raise ParseError("incomplete lookup table artifact")
    return LookupTables(
        mode, header["bin"], cells, grid_spec=header.get("grid"),
        cluster_diameter=header.get("diameter"), antennas=antennas,
    )


def save_tables(tables: LookupTables, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        dump_tables(tables, fh)


def read_tables(path) -> LookupTables:
    with open(path, encoding="utf-8") as fh:
        return load_tables(fh)


def cell_listing(tables: LookupTables, labels: Optional[Mapping] = None) -> List[str]:
    """Human-readable ``antenna,bin -> entry entry ...`` lines, optionally labelled."""
    labels = labels or {}
    out = []
    for aid, b in sorted(tables.cells, key=lambda k: (antenna_sort_key(k[0]), k[1])):
        names = [labels.get(e, _fmt_entry(e, tables.mode)) for e in sorted(tables.cells[(aid, b)])]
        out.append(f"{aid},{b} -> {' '.join(names)}")
    return out
