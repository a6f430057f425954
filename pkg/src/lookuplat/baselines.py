"""Comparison localizers: grid-mean fingerprinting and triangular lateration."""

from __future__ import annotations

import enum
import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Union

import numpy as np

from .errors import InsufficientObservationsError, NoInformationError, ParseError
from .estimate import LocationEstimate, Status
from .grid import GridId, GridSpec, Point, center_of, grid_of
from .scenario import (
    Antenna,
    AntennaId,
    LocatedSample,
    Measurement,
    PathLossModel,
    antenna_sort_key,
    distances_of,
    parse_antenna_id,
)

FORMAT_TAG = "lookuplat-rfp"
FORMAT_VERSION = 1

# distance reported when two vectors share no antenna
SENTINEL = math.inf


class DistanceKind(str, enum.Enum):
    EUCLIDEAN = "euclidean"
    COSINE = "cosine"


@dataclass
class RfpIndex:
    """Per-grid mean RSS vectors, NaN-omitting, with observation counts."""

    grid_spec: GridSpec
    means: Dict[GridId, Dict[AntennaId, float]] = field(default_factory=dict)
    counts: Dict[GridId, Dict[AntennaId, int]] = field(default_factory=dict)
    _dense: Optional[tuple] = field(default=None, compare=False, repr=False)

    def __len__(self):
        return len(self.means)

    def dense(self):
        """``(grid ids sorted, antenna column map, G x A matrix with NaN holes)``."""
        if self._dense is None:
            grids = sorted(self.means)
            aids = sorted({a for v in self.means.values() for a in v}, key=antenna_sort_key)
            col = {a: j for j, a in enumerate(aids)}
            mat = np.full((len(grids), len(aids)), np.nan)
            for i, g in enumerate(grids):
                for a, mu in self.means[g].items():
                    mat[i, col[a]] = mu
            self._dense = (grids, col, mat)
        return self._dense


def build_rfp_index(samples: Iterable[LocatedSample], spec: GridSpec) -> RfpIndex:
    values: Dict[GridId, Dict[AntennaId, List[float]]] = defaultdict(lambda: defaultdict(list))
    for s in samples:
        g = grid_of(s.position, spec)
        for aid, r in s.measurement.readings.items():
            values[g][aid].append(r)
    index = RfpIndex(spec)
    for g, per_antenna in values.items():
        # fsum keeps the means independent of sample order
        index.means[g] = {a: math.fsum(v) / len(v) for a, v in per_antenna.items()}
        index.counts[g] = {a: len(v) for a, v in per_antenna.items()}
    return index


def _as_mapping(m) -> Mapping[AntennaId, float]:
    if isinstance(m, Measurement):
        return m.readings
    return {a: r for a, r in m.items() if not math.isnan(r)}


def measurement_distance(m1, m2, kind: DistanceKind = DistanceKind.EUCLIDEAN) -> float:
    """Distance over the antennas observed in both vectors; disjoint support gives ``inf``."""
    a = _as_mapping(m1)
    b = _as_mapping(m2)
    shared = [k for k in a if k in b]
    if not shared:
        return SENTINEL
    kind = DistanceKind(kind)
    if kind is DistanceKind.EUCLIDEAN:
        return math.sqrt(math.fsum((a[k] - b[k]) ** 2 for k in shared))
    dot = math.fsum(a[k] * b[k] for k in shared)
    na = math.sqrt(math.fsum(a[k] ** 2 for k in shared))
    nb = math.sqrt(math.fsum(b[k] ** 2 for k in shared))
    if na == 0 or nb == 0:
        return 1.0
    return 1.0 - dot / (na * nb)


def rfp_distances(m: Measurement, index: RfpIndex, kind: DistanceKind = DistanceKind.EUCLIDEAN) -> np.ndarray:
    """Distance from ``m`` to every grid mean, in sorted grid order."""
    grids, col, mat = index.dense()
    pairs = [(col[a], r) for a, r in m.readings.items() if a in col]
    if not pairs:
        return np.full(len(grids), SENTINEL)
    cols = [c for c, _ in pairs]
    q = np.array([r for _, r in pairs])
    sub = mat[:, cols]
    mask = ~np.isnan(sub)
    shared = mask.sum(axis=1)
    filled = np.where(mask, sub, 0.0)
    if DistanceKind(kind) is DistanceKind.EUCLIDEAN:
        diff = np.where(mask, filled - q, 0.0)
        d = np.sqrt((diff * diff).sum(axis=1))
    else:
        dot = (filled * q).sum(axis=1)
        nq = np.sqrt((mask * q * q).sum(axis=1))
        ng = np.sqrt((filled * filled).sum(axis=1))
        with np.errstate(invalid="ignore", divide="ignore"):
            d = np.where((nq > 0) & (ng > 0), 1.0 - dot / (nq * ng), 1.0)
    return np.where(shared > 0, d, SENTINEL)


def rfp_localize(m: Measurement, index: RfpIndex, kind: DistanceKind = DistanceKind.EUCLIDEAN) -> LocationEstimate:
    """Center of the grid whose mean vector is nearest; ties go to the smaller GridId."""
    if len(index) == 0:
        raise NoInformationError("empty fingerprint index")
    grids, _, _ = index.dense()
    d = rfp_distances(m, index, kind)
    best = int(np.argmin(d))
    if not math.isfinite(d[best]):
        raise NoInformationError("query shares no antenna with any reference grid")
    g = grids[best]
    n_best = int(np.count_nonzero(d == d[best]))
    status = Status.RESOLVED if n_best == 1 else Status.AMBIGUOUS
    return LocationEstimate(center_of(g, index.grid_spec), status, n_best, (g,), len(grids))


# -- fingerprint index artifact ----------------------------------------------

def dump_index(index: RfpIndex, fh) -> None:
    ox, oy = index.grid_spec.origin
    fh.write(f"{FORMAT_TAG} {FORMAT_VERSION}\n")
    fh.write(f"grid {ox!r} {oy!r} {index.grid_spec.cell_size!r}\n")
    for g in sorted(index.means):
        means = index.means[g]
        items = ";".join(
            f"{a}:{means[a]!r}:{index.counts[g][a]}" for a in sorted(means, key=antenna_sort_key)
        )
        fh.write(f"g {g.ix} {g.iy} {items}\n")


def load_index(fh) -> RfpIndex:
    index = None
    for n, raw in enumerate(fh, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        try:
            if n == 1:
                if parts[0] != FORMAT_TAG or int(parts[1]) != FORMAT_VERSION:
                    raise ParseError(f"not a fingerprint index artifact (header {line!r})", n)
            elif parts[0] == "grid":
                index = RfpIndex(GridSpec(float(parts[3]), (float(parts[1]), float(parts[2]))))
            elif parts[0] == "g" and index is not None:
                g = GridId(int(parts[1]), int(parts[2]))
                means, counts = {}, {}
                for item in parts[3].split(";"):
                    a, mu, c = item.split(":")
                    aid = parse_antenna_id(a)
                    means[aid] = float(mu)
                    counts[aid] = int(c)
                index.means[g] = means
                index.counts[g] = counts
            else:
                raise ParseError(f"unexpected record {line!r}", n)
        except (IndexError, ValueError) as exc:
            if isinstance(exc, ParseError):
                raise
            raise ParseError(f"malformed record {line!r}: {exc}", n) from None
    if index is None:
        raise ParseError("incomplete fingerprint index artifact")
    return index


def save_index(index: RfpIndex, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        dump_index(index, fh)


def read_index(path) -> RfpIndex:
    with open(path, encoding="utf-8") as fh:
        return load_index(fh)


# -- triangular lateration -------------------------------------------------

def lateration_objective(point, anchors: np.ndarray, dists: np.ndarray) -> float:
    """Sum over antennas of (squared distance to point - squared RSS distance)^2."""
    res = ((anchors - np.asarray(point, dtype=float)) ** 2).sum(axis=1) - dists ** 2
    return float(res @ res)


def _levenberg(x0, anchors, dists, max_iter, step_tol):
    x = np.asarray(x0, dtype=float).copy()
    f = lateration_objective(x, anchors, dists)
    mu = 1e-3
    iters = 0
    converged = False
    while iters < max_iter:
        iters += 1
        diff = anchors - x
        res = (diff ** 2).sum(axis=1) - dists ** 2
        jac = -2.0 * diff
        hess = jac.T @ jac
        grad = jac.T @ res
        scale = max(float(np.max(np.diag(hess))), 1e-12)
        try:
            step = np.linalg.solve(hess + mu * scale * np.eye(2), -grad)
        except np.linalg.LinAlgError:
            mu *= 10.0
            continue
        x_new = x + step
        f_new = lateration_objective(x_new, anchors, dists)
        if f_new <= f:
            x, f = x_new, f_new
            mu = max(mu / 3.0, 1e-12)
            if np.hypot(*step) < step_tol:
                converged = True
                break
        else:
            mu *= 4.0
            if mu > 1e12:
                # no descent direction left: stationary to working precision
                converged = True
                break
    return x, f, iters, converged


def _collinear(anchors: np.ndarray) -> bool:
    centered = anchors - anchors.mean(axis=0)
    sv = np.linalg.svd(centered, compute_uv=False)
    return sv[0] == 0 or sv[-1] <= 1e-9 * sv[0]


def _line_normal(anchors):
    centered = anchors - anchors.mean(axis=0)
    _, _, vt = np.linalg.svd(centered)
    return vt[-1]


def tl_localize(
    m: Measurement,
    antennas: Union[Mapping[AntennaId, Point], Sequence[Antenna]],
    model: PathLossModel,
    *,
    max_iter: int = 100,
    step_tol: float = 1e-6,
) -> LocationEstimate:
    """Least-squares lateration on RSS-derived distances.

    Starts at the inverse-distance-weighted centroid of the observed
    antennas. With collinear antennas the mirror image of the solution is
    also searched; the status is ambiguous when both fit equally well.
    """
    if not isinstance(antennas, Mapping):
        antennas = {a.id: a.position for a in antennas}
    pairs = [(antennas[a], r) for a, r in m.strongest_first() if a in antennas]
    if len(pairs) < 3:
        raise InsufficientObservationsError(f"lateration needs >= 3 located readings, got {len(pairs)}")
    anchors = np.array([p for p, _ in pairs], dtype=float)
    dists = distances_of(model, [r for _, r in pairs])
    w = 1.0 / dists
    x0 = (anchors * w[:, None]).sum(axis=0) / w.sum()

    n_cand = 1
    if not _collinear(anchors):
        x, f, iters, converged = _levenberg(x0, anchors, dists, max_iter, step_tol)
        status = Status.RESOLVED if converged else Status.AMBIGUOUS
    else:
        # the centroid sits on the antenna line, a saddle of the objective;
        # start on both sides of the line instead
        offset = _line_normal(anchors) * float(np.min(dists))
        x, f, iters, converged = _levenberg(x0 + offset, anchors, dists, max_iter, step_tol)
        x2, f2, it2, conv2 = _levenberg(x0 - offset, anchors, dists, max_iter, step_tol)
        iters += it2
        if f2 < f and not abs(f - f2) <= 1e-9 * max(1.0, f, f2):
            x, f, converged = x2, f2, conv2
        status = Status.RESOLVED if converged else Status.AMBIGUOUS
        if abs(f - f2) <= 1e-9 * max(1.0, f, f2) and np.hypot(*(x - x2)) > max(step_tol, 1e-3):
            status = Status.AMBIGUOUS
            n_cand = 2
        elif lateration_objective(x0, anchors, dists) < f:
            x = x0
    return LocationEstimate((float(x[0]), float(x[1])), status, n_cand, (), iters)
