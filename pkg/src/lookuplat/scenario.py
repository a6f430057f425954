"""Synthetic urban RSS world and the line-oriented sample file format.

The propagation model is a plain log-distance law with a deterministic
multi-wall NLOS term: every obstacle whose interior is crossed by the
antenna-to-receiver segment subtracts its penalty from the received power.
Optional zero-mean Gaussian receiver noise is drawn from a generator seeded
by ``(scenario seed, dataset seed, sample index)``, so each sample is a pure
function of its index and dataset generation does not depend on order.

Sample file grammar, one record per line::

    id,x,y,aid:rss[;aid:rss]*

Blank lines and lines starting with ``#`` are ignored.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, Iterator, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import ParseError, RejectedSampleError
from .grid import Point

AntennaId = Union[int, str]

_CHUNK = 1024


def parse_antenna_id(token: str) -> AntennaId:
    """Integer ids stay integers; anything else (e.g. ``"A"``) is kept as text."""
    token = token.strip()
    if not token:
        raise ValueError("empty antenna id")
    try:
        return int(token)
    except ValueError:
        pass
    if any(c in token for c in ",;:# \t"):
        raise ValueError(f"invalid antenna id {token!r}")
    return token


def antenna_sort_key(aid: AntennaId):
    # integers sort numerically and before textual ids
    if isinstance(aid, str):
        return (1, 0, aid)
    return (0, aid, "")


@dataclass(frozen=True)
class Measurement:
    """Sparse antenna-id -> RSS (dBm) map; absent antennas read as NaN."""

    readings: Mapping[AntennaId, float] = field(default_factory=dict)

    def __post_init__(self):
        clean = {}
        for aid, r in self.readings.items():
            r = float(r)
            if not math.isfinite(r):
                raise ValueError(f"non-finite RSS {r!r} for antenna {aid!r}")
            clean[aid] = r
        object.__setattr__(self, "readings", clean)

    def rss(self, aid: AntennaId) -> float:
        return self.readings.get(aid, math.nan)

    def strongest_first(self) -> List[Tuple[AntennaId, float]]:
        """Readings in decreasing RSS; ties broken by ascending antenna id."""
        return sorted(self.readings.items(), key=lambda kv: (-kv[1], antenna_sort_key(kv[0])))

    def __len__(self):
        return len(self.readings)

    def __bool__(self):
        return bool(self.readings)


@dataclass(frozen=True)
class LocatedSample:
    id: int
    position: Point
    measurement: Measurement

    def __post_init__(self):
        if not self.measurement:
            raise RejectedSampleError(f"sample {self.id} has no readings")


@dataclass(frozen=True)
class Antenna:
    id: AntennaId
    position: Point


@dataclass(frozen=True)
class Obstacle:
    xmin: float
    ymin: float
    xmax: float
    ymax: float
    penalty: float = 20.0

    def __post_init__(self):
        if not (self.xmin < self.xmax and self.ymin < self.ymax):
            raise ValueError(f"degenerate obstacle rectangle {self.rect}")
        if not self.penalty >= 0:
            raise ValueError("obstacle penalty must be non-negative")

    @property
    def rect(self):
        return (self.xmin, self.ymin, self.xmax, self.ymax)


@dataclass(frozen=True)
class PathLossModel:
    tx_power: float = 0.0
    pl0: float = 40.0
    exponent: float = 3.5
    d0: float = 1.0

    def __post_init__(self):
        if not self.exponent > 0:
            raise ValueError("path-loss exponent must be positive")
        if not self.d0 > 0:
            raise ValueError("reference distance d0 must be positive")


def rss_at_distance(model: PathLossModel, d: float) -> float:
    """Log-distance law; distances below ``d0`` are clamped to ``d0``."""
    d = max(float(d), model.d0)
    return model.tx_power - model.pl0 - 10.0 * model.exponent * math.log10(d / model.d0)


def distance_of(model: PathLossModel, r: float) -> float:
    """Inverse of :func:`rss_at_distance`; RSS above the near-field level maps to ``d0``."""
    decades = (model.tx_power - model.pl0 - r) / (10.0 * model.exponent)
    if decades <= 0:
        return model.d0
    return model.d0 * 10.0 ** decades


def distances_of(model: PathLossModel, r) -> np.ndarray:
    decades = (model.tx_power - model.pl0 - np.asarray(r, dtype=float)) / (10.0 * model.exponent)
    return model.d0 * np.power(10.0, np.maximum(decades, 0.0))


@dataclass(frozen=True)
class Scenario:
    antennas: Tuple[Antenna, ...]
    obstacles: Tuple[Obstacle, ...] = ()
    model: PathLossModel = PathLossModel()
    noise_std: float = 1.0
    top_k: int = 20
    rng_seed: int = 0
    extent: Optional[Tuple[float, float, float, float]] = None

    def __post_init__(self):
        object.__setattr__(self, "antennas", tuple(self.antennas))
        object.__setattr__(self, "obstacles", tuple(self.obstacles))
        ids = [a.id for a in self.antennas]
        if len(set(ids)) != len(ids):
            raise ValueError("antenna ids must be unique within a scenario")
        if not self.antennas:
            raise ValueError("scenario needs at least one antenna")
        if self.top_k < 1:
            raise ValueError("top_k must be >= 1")
        if not self.noise_std >= 0:
            raise ValueError("noise_std must be >= 0")
        if self.extent is None:
            xs = [a.position[0] for a in self.antennas]
            ys = [a.position[1] for a in self.antennas]
            object.__setattr__(self, "extent", (min(xs), min(ys), max(xs), max(ys)))
        xmin, ymin, xmax, ymax = self.extent
        if not (xmin <= xmax and ymin <= ymax):
            raise ValueError("invalid scenario extent")
        object.__setattr__(self, "extent", tuple(float(v) for v in self.extent))

    def antenna_positions(self) -> Dict[AntennaId, Point]:
        return {a.id: a.position for a in self.antennas}


# -- geometry --------------------------------------------------------------

def _crossings(ax, ay, px, py, rects):
    """Boolean crossing array for segments (a -> p) against open rectangles.

    Liang-Barsky clipping on the open segment: the parameter interval where
    the segment lies strictly inside the rectangle must have positive length,
    so grazing a corner or running along an edge is not a crossing.
    """
    xmin, ymin, xmax, ymax = rects
    dx = px - ax
    dy = py - ay
    # near-zero components overflow to +-inf, which clamps correctly below
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        tx1 = (xmin - ax) / dx
        tx2 = (xmax - ax) / dx
        ty1 = (ymin - ay) / dy
        ty2 = (ymax - ay) / dy
    flat_x = dx == 0
    flat_y = dy == 0
    in_x = (xmin < ax) & (ax < xmax)
    in_y = (ymin < ay) & (ay < ymax)
    tx_lo = np.where(flat_x, np.where(in_x, -np.inf, np.inf), np.minimum(tx1, tx2))
    tx_hi = np.where(flat_x, np.where(in_x, np.inf, -np.inf), np.maximum(tx1, tx2))
    ty_lo = np.where(flat_y, np.where(in_y, -np.inf, np.inf), np.minimum(ty1, ty2))
    ty_hi = np.where(flat_y, np.where(in_y, np.inf, -np.inf), np.maximum(ty1, ty2))
    lo = np.maximum(np.maximum(tx_lo, ty_lo), 0.0)
    hi = np.minimum(np.minimum(tx_hi, ty_hi), 1.0)
    return lo < hi


def _obstacle_arrays(obstacles: Sequence[Obstacle]):
    if not obstacles:
        empty = np.zeros(0)
        return (empty, empty, empty, empty), empty
    arr = np.array([o.rect for o in obstacles], dtype=float)
    pen = np.array([o.penalty for o in obstacles], dtype=float)
    return tuple(arr[:, i] for i in range(4)), pen


def count_obstructions(scenario: Scenario, antenna: Antenna, p: Point) -> int:
    """Number of obstacles whose interior meets the open segment antenna -> p."""
    rects, _ = _obstacle_arrays(scenario.obstacles)
    if rects[0].size == 0:
        return 0
    ax, ay = antenna.position
    hit = _crossings(float(ax), float(ay), float(p[0]), float(p[1]), rects)
    return int(np.count_nonzero(hit))


# -- simulation ------------------------------------------------------------

def _noise_rng(scenario: Scenario, stream: int, index: int) -> np.random.Generator:
    return np.random.default_rng([scenario.rng_seed & 0xFFFFFFFF, stream & 0xFFFFFFFF, index])


def _obstruction_loss(scenario: Scenario, apos: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Summed wall penalties ``(len(points), n_antennas)`` for one spatial tile.

    Only obstacles overlapping the bounding box of an antenna and the whole
    tile can be crossed by a segment from that antenna into the tile, so the
    exact clipping test runs on those (antenna, obstacle) pairs alone.
    """
    rects, pen = _obstacle_arrays(scenario.obstacles)
    loss = np.zeros((len(points), len(apos)))
    if pen.size == 0 or len(points) == 0:
        return loss
    xmin, ymin, xmax, ymax = rects
    tlo = points.min(axis=0)
    thi = points.max(axis=0)
    bx0 = np.minimum(apos[:, 0], tlo[0])[:, None]
    by0 = np.minimum(apos[:, 1], tlo[1])[:, None]
    bx1 = np.maximum(apos[:, 0], thi[0])[:, None]
    by1 = np.maximum(apos[:, 1], thi[1])[:, None]
    near = (xmin[None, :] < bx1) & (xmax[None, :] > bx0) & (ymin[None, :] < by1) & (ymax[None, :] > by0)
    ai, oi = np.nonzero(near)
    if ai.size == 0:
        return loss
    hit = _crossings(
        apos[ai, 0][None, :], apos[ai, 1][None, :],
        points[:, 0][:, None], points[:, 1][:, None],
        (xmin[oi][None, :], ymin[oi][None, :], xmax[oi][None, :], ymax[oi][None, :]),
    )
    # per-antenna hit counts are exact integers, so the loss does not depend
    # on which pairs the tile kept or on the summation order
    hit = hit.astype(float)
    pair_pen = pen[oi]
    for value in np.unique(pair_pen):
        sel = np.flatnonzero(pair_pen == value)
        onehot = np.zeros((sel.size, len(apos)))
        onehot[np.arange(sel.size), ai[sel]] = 1.0
        loss += value * (hit[:, sel] @ onehot)
    return loss


def _simulate_block(scenario: Scenario, points: np.ndarray, indices: Sequence[int], stream: int):
    """RSS matrix ``(len(points), n_antennas)`` before top-k truncation."""
    model = scenario.model
    apos = np.array([a.position for a in scenario.antennas], dtype=float)
    dist = np.hypot(points[:, 0][:, None] - apos[None, :, 0], points[:, 1][:, None] - apos[None, :, 1])
    dist = np.maximum(dist, model.d0)
    rss = model.tx_power - model.pl0 - 10.0 * model.exponent * np.log10(dist / model.d0)
    rss = rss - _obstruction_loss(scenario, apos, points)
    if scenario.noise_std > 0:
        noise = np.stack(
            [_noise_rng(scenario, stream, i).normal(0.0, scenario.noise_std, len(apos)) for i in indices]
        )
        rss = rss - noise
    return rss


def _truncate(scenario: Scenario, rss: np.ndarray) -> List[Measurement]:
    ids = [a.id for a in scenario.antennas]
    rank = np.empty(len(ids), dtype=np.int64)
    rank[sorted(range(len(ids)), key=lambda i: antenna_sort_key(ids[i]))] = np.arange(len(ids))
    k = min(scenario.top_k, len(ids))
    out = []
    for row in rss:
        order = np.lexsort((rank, -row))[:k]
        out.append(Measurement({ids[j]: float(row[j]) for j in order}))
    return out


def simulate_measurement(scenario: Scenario, p: Point, draw_index: int = 0, stream: int = 0) -> Measurement:
    """Noisy, obstructed, top-k truncated RSS vector observed at ``p``."""
    rss = _simulate_block(scenario, np.array([p], dtype=float), [draw_index], stream)
    return _truncate(scenario, rss)[0]


def _tiles(points: np.ndarray, target: int = _CHUNK):
    """Index groups of spatially compact point tiles, each roughly ``target`` strong."""
    n = len(points)
    if n <= target:
        return [np.arange(n)]
    lo = points.min(axis=0)
    span = np.maximum(points.max(axis=0) - lo, 1e-9)
    per_side = max(1, int(math.ceil(math.sqrt(n / target))))
    cell = np.minimum((points - lo) / span * per_side, per_side - 1).astype(np.int64)
    key = cell[:, 1] * per_side + cell[:, 0]
    order = np.argsort(key, kind="stable")
    bounds = np.flatnonzero(np.diff(key[order])) + 1
    return np.split(order, bounds)


def simulate_many(scenario: Scenario, points, first_index: int = 0, stream: int = 0) -> List[Measurement]:
    """Simulate every point; point ``i`` uses noise draw ``first_index + i``."""
    points = np.asarray(points, dtype=float).reshape(-1, 2)
    out: List[Optional[Measurement]] = [None] * len(points)
    for idx in _tiles(points):
        block = _simulate_block(scenario, points[idx], [first_index + int(i) for i in idx], stream)
        for i, m in zip(idx, _truncate(scenario, block)):
            out[int(i)] = m
    return out


@dataclass(frozen=True)
class GridSampling:
    """Receivers at the centers of an ``nx`` x ``ny`` lattice over the extent."""

    nx: int
    ny: int

    def points(self, extent, rng) -> np.ndarray:
        if self.nx < 1 or self.ny < 1:
            raise ValueError("grid sampling needs nx, ny >= 1")
        xmin, ymin, xmax, ymax = extent
        xs = xmin + (np.arange(self.nx) + 0.5) * (xmax - xmin) / self.nx
        ys = ymin + (np.arange(self.ny) + 0.5) * (ymax - ymin) / self.ny
        gx, gy = np.meshgrid(xs, ys, indexing="xy")
        return np.column_stack([gx.ravel(), gy.ravel()])


@dataclass(frozen=True)
class RandomSampling:
    """``count`` receivers uniformly distributed over the extent."""

    count: int

    def points(self, extent, rng) -> np.ndarray:
        if self.count < 1:
            raise ValueError("sample count must be >= 1")
        xmin, ymin, xmax, ymax = extent
        return np.column_stack([rng.uniform(xmin, xmax, self.count), rng.uniform(ymin, ymax, self.count)])


def generate_dataset(scenario: Scenario, sampling, seed: int = 0) -> List[LocatedSample]:
    """Simulate one located sample per sampling position; ids are 0..n-1."""
    rng = np.random.default_rng(seed)
    pts = sampling.points(scenario.extent, rng)
    if len(pts) == 0:
        raise ValueError("sampling produced no points")
    measurements = simulate_many(scenario, pts, stream=seed)
    return [
        LocatedSample(i, (float(x), float(y)), m)
        for i, ((x, y), m) in enumerate(zip(pts.tolist(), measurements))
    ]


def make_urban_scenario(
    extent=(0.0, 0.0, 1000.0, 1000.0),
    n_antennas: int = 20,
    n_obstacles: int = 50,
    seed: int = 0,
    *,
    penalty: float = 20.0,
    size_range=(10.0, 60.0),
    model: PathLossModel = PathLossModel(),
    noise_std: float = 1.0,
    top_k: int = 20,
) -> Scenario:
    """Random city block layout: rectangular buildings, antennas outside them."""
    rng = np.random.default_rng(seed)
    xmin, ymin, xmax, ymax = extent
    lo, hi = size_range
    obstacles = []
    for _ in range(n_obstacles):
        w, h = rng.uniform(lo, hi, 2)
        x0 = rng.uniform(xmin, max(xmin, xmax - w))
        y0 = rng.uniform(ymin, max(ymin, ymax - h))
        obstacles.append(Obstacle(round(x0, 2), round(y0, 2), round(x0 + w, 2), round(y0 + h, 2), penalty))
    antennas = []
    while len(antennas) < n_antennas:
        x, y = rng.uniform(xmin, xmax), rng.uniform(ymin, ymax)
        x, y = round(x, 2), round(y, 2)
        if any(o.xmin <= x <= o.xmax and o.ymin <= y <= o.ymax for o in obstacles):
            continue
        antennas.append(Antenna(len(antennas) + 1, (x, y)))
    return Scenario(
        tuple(antennas), tuple(obstacles), model, noise_std=noise_std, top_k=top_k,
        rng_seed=seed, extent=tuple(float(v) for v in extent),
    )


# -- scenario config documents ---------------------------------------------

def scenario_to_dict(s: Scenario) -> dict:
    return {
        "extent": list(s.extent),
        "antennas": [{"id": a.id, "x": a.position[0], "y": a.position[1]} for a in s.antennas],
        "obstacles": [{"rect": list(o.rect), "penalty": o.penalty} for o in s.obstacles],
        "model": {"tx_power": s.model.tx_power, "pl0": s.model.pl0,
                  "exponent": s.model.exponent, "d0": s.model.d0},
        "noise_std": s.noise_std,
        "top_k": s.top_k,
        "seed": s.rng_seed,
    }


def scenario_from_dict(doc: Mapping) -> Scenario:
    try:
        antennas = []
        for a in doc["antennas"]:
            aid = a["id"]
            if not isinstance(aid, int):
                aid = parse_antenna_id(str(aid))
            antennas.append(Antenna(aid, (float(a["x"]), float(a["y"]))))
        obstacles = []
        for o in doc.get("obstacles", []):
            rect = o["rect"] if "rect" in o else (o["xmin"], o["ymin"], o["xmax"], o["ymax"])
            obstacles.append(Obstacle(*(float(v) for v in rect), penalty=float(o.get("penalty", 20.0))))
        model = PathLossModel(**{k: float(v) for k, v in doc.get("model", {}).items()})
        extent = doc.get("extent")
        return Scenario(
            tuple(antennas),
            tuple(obstacles),
            model,
            noise_std=float(doc.get("noise_std", 1.0)),
            top_k=int(doc.get("top_k", 20)),
            rng_seed=int(doc.get("seed", 0)),
            extent=None if extent is None else tuple(float(v) for v in extent),
        )
    except (KeyError, TypeError) as exc:
        raise ValueError(f"invalid scenario document: {exc!r}") from exc


def load_scenario(path) -> Scenario:
    with open(path, encoding="utf-8") as fh:
        return scenario_from_dict(json.load(fh))


def save_scenario(s: Scenario, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(scenario_to_dict(s), fh, indent=2)
        fh.write("\n")


# -- sample files ----------------------------------------------------------

def format_sample(sample: LocatedSample) -> str:
    readings = ";".join(f"{aid}:{r!r}" for aid, r in sample.measurement.strongest_first())
    x, y = sample.position
    return f"{sample.id},{float(x)!r},{float(y)!r},{readings}"


def write_samples(samples: Iterable[LocatedSample], fh) -> int:
    n = 0
    for s in samples:
        fh.write(format_sample(s))
        fh.write("\n")
        n += 1
    return n


def parse_readings(text: str, line_number: Optional[int] = None) -> Dict[AntennaId, float]:
    """Parse ``aid:rss[;aid:rss]*`` into a dict; an empty string gives ``{}``."""
    readings: Dict[AntennaId, float] = {}
    text = text.strip()
    if not text:
        return readings
    for item in text.split(";"):
        parts = item.split(":")
        if len(parts) != 2:
            raise ParseError(f"malformed reading {item!r}", line_number)
        try:
            aid = parse_antenna_id(parts[0])
            r = float(parts[1])
        except ValueError as exc:
            raise ParseError(f"malformed reading {item!r}: {exc}", line_number) from None
        if not math.isfinite(r):
            raise ParseError(f"non-finite RSS in {item!r}", line_number)
        if aid in readings:
            raise ParseError(f"duplicate antenna {aid!r}", line_number)
        readings[aid] = r
    return readings


def parse_sample(line: str, line_number: Optional[int] = None) -> LocatedSample:
    fields = line.strip().split(",", 3)
    if len(fields) != 4:
        raise ParseError(f"expected 'id,x,y,readings', got {line.strip()!r}", line_number)
    try:
        sid = int(fields[0])
        x = float(fields[1])
        y = float(fields[2])
    except ValueError as exc:
        raise ParseError(f"bad id or coordinate: {exc}", line_number) from None
    if not (math.isfinite(x) and math.isfinite(y)):
        raise ParseError("non-finite coordinate", line_number)
    readings = parse_readings(fields[3], line_number)
    if not readings:
        raise RejectedSampleError(f"sample {sid} has no readings", line_number)
    return LocatedSample(sid, (x, y), Measurement(readings))


def iter_samples(lines: Iterable[str], errors: Optional[list] = None) -> Iterator[LocatedSample]:
    """Stream samples from text lines.

    With ``errors`` left as None the first bad line raises; otherwise the
    exception is appended to the list and parsing continues.
    """
    for n, line in enumerate(lines, start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        try:
            yield parse_sample(stripped, n)
        except ParseError as exc:
            if errors is None:
                raise
            errors.append(exc)


def ingest_samples(lines: Iterable[str], errors: Optional[list] = None) -> List[LocatedSample]:
    return list(iter_samples(lines, errors))


def load_samples(path, errors: Optional[list] = None) -> List[LocatedSample]:
    with open(path, encoding="utf-8") as fh:
        return ingest_samples(fh, errors)
