"""Benchmark harness: random splits, nearest-rank percentile errors, coverage,
timing and operation counts, swept over methods, grid sizes and bin sizes.

Every sweep cell ``(method, grid size, bin size, repetition)`` is evaluated
independently and the results are merged in a fixed order, so the number of
worker threads never changes any reported value. Wall-clock timings are
collected but kept out of the written reports unless asked for, because
they are the only non-reproducible quantity.
"""

from __future__ import annotations

import csv
import io
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .baselines import DistanceKind, build_rfp_index, rfp_localize, tl_localize
from .errors import ConfigError, InsufficientObservationsError, NoInformationError
from .estimate import Status
from .grid import BinSpec, GridSpec, bin_rss, grid_of
from .lookup import CONTINUOUS, GRID, construct_lookup_tables, lookup_laterate
from .scenario import LocatedSample, Scenario

METHODS = ("ll", "rfp", "tl")
PERCENTILE_METHOD = "nearest-rank"

CSV_FIELDS = [
    "method", "grid_size", "bin_size", "repetitions", "query_count",
    "err67", "err95", "relative_error_67", "relative_error_95", "mean_error", "coverage",
    "err67_std", "err95_std", "mean_error_std", "coverage_std",
    "mean_ops", "fallback_fraction",
]
TIMING_FIELDS = ["build_time", "mean_query_time"]


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 0.1
    repetitions: int = 10
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.train_fraction < 1:
            raise ValueError("train_fraction must lie strictly between 0 and 1")
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")


def split(samples: Sequence[LocatedSample], spec: SplitSpec, rep: int = 0):
    """Random disjoint train/test partition, deterministic per ``(seed, rep)``."""
    n = len(samples)
    if n < 2:
        raise ValueError("need at least two samples to split")
    n_train = int(math.floor(spec.train_fraction * n + 0.5))
    if n_train == 0 or n_train == n:
        raise ValueError(f"train fraction {spec.train_fraction} leaves an empty side for n={n}")
    perm = np.random.default_rng([spec.seed, rep]).permutation(n)
    train_idx = np.sort(perm[:n_train])
    test_idx = np.sort(perm[n_train:])
    return [samples[i] for i in train_idx], [samples[i] for i in test_idx]


def error_percentile(errors: Sequence[float], p: float) -> float:
    """Nearest-rank percentile: the ceil(p*n)-th smallest value (1-based)."""
    if len(errors) == 0:
        raise ValueError("no errors to take a percentile of")
    if not 0 < p <= 1:
        raise ValueError("percentile fraction must lie in (0, 1]")
    ordered = sorted(errors)
    n = len(ordered)
    # rounding first keeps 0.67 * 100 from landing on rank 68
    k = math.ceil(round(p * n, 9))
    return float(ordered[min(max(k, 1), n) - 1])


def coverage(train: Sequence[LocatedSample], all_samples: Sequence[LocatedSample], spec: GridSpec) -> float:
    """Share of data-bearing grids that hold at least one training sample."""
    everywhere = {grid_of(s.position, spec) for s in all_samples}
    if not everywhere:
        raise ValueError("coverage needs a non-empty dataset")
    covered = {grid_of(s.position, spec) for s in train}
    return len(covered & everywhere) / len(everywhere)


def binned_vectors_unique(samples: Sequence[LocatedSample], spec: GridSpec, bins: BinSpec) -> bool:
    """True if no binned measurement vector occurs in two different grids."""
    owner = {}
    for s in samples:
        key = frozenset((a, bin_rss(r, bins)) for a, r in s.measurement.readings.items())
        g = grid_of(s.position, spec)
        if owner.setdefault(key, g) != g:
            return False
    return True


@dataclass
class ErrorReport:
    method: str
    grid_size: float
    bin_size: Optional[float]
    repetitions: int
    query_count: float
    err67: float
    err95: float
    relative_error_67: float
    relative_error_95: float
    mean_error: float
    coverage: float
    err67_std: float = 0.0
    err95_std: float = 0.0
    mean_error_std: float = 0.0
    coverage_std: float = 0.0
    mean_ops: float = 0.0
    fallback_fraction: float = 0.0
    build_time: float = 0.0
    mean_query_time: float = 0.0
    cdf: List[float] = field(default_factory=list)

    def row(self, include_timing: bool = False) -> Dict[str, object]:
        names = CSV_FIELDS + (TIMING_FIELDS if include_timing else [])
        return {k: getattr(self, k) for k in names}


@dataclass
class BenchConfig:
    methods: Sequence[str] = ("ll", "rfp")
    grid_sizes: Sequence[float] = (20.0,)
    bin_sizes: Optional[Sequence[float]] = None
    split: SplitSpec = SplitSpec()
    ll_mode: str = GRID
    cluster_diameter: Optional[float] = None
    tolerance: Optional[float] = None
    spread_threshold: Optional[float] = None
    distance: str = DistanceKind.EUCLIDEAN.value
    max_queries: Optional[int] = None
    replay: bool = False
    threads: int = 1
    # None places the grid origin at the data's lower-left corner
    grid_origin: Optional[Tuple[float, float]] = None

    def validate(self, scenario: Optional[Scenario]) -> None:
        if not self.methods:
            raise ConfigError("at least one method is required")
        for m in self.methods:
            if m not in METHODS:
                raise ConfigError(f"unknown method {m!r}; choose from {', '.join(METHODS)}")
        if not self.grid_sizes or any(not g > 0 for g in self.grid_sizes):
            raise ConfigError("grid sizes must be positive and non-empty")
        if self.bin_sizes is not None:
            if any(m != "ll" for m in self.methods):
                raise ConfigError("bin sizes apply to lookup lateration only")
            if not self.bin_sizes or any(not b > 0 for b in self.bin_sizes):
                raise ConfigError("bin sizes must be positive and non-empty")
        if "tl" in self.methods and scenario is None:
            raise ConfigError("lateration needs antenna positions and a path-loss model (a scenario)")
        if self.ll_mode not in (GRID, CONTINUOUS):
            raise ConfigError(f"unknown lookup mode {self.ll_mode!r}")
        if self.ll_mode == CONTINUOUS and not (self.cluster_diameter and self.cluster_diameter > 0):
            raise ConfigError("continuous lookup mode needs a cluster diameter")
        if self.max_queries is not None and self.max_queries < 1:
            raise ConfigError("max_queries must be >= 1")
        if self.threads < 1:
            raise ConfigError("threads must be >= 1")
        DistanceKind(self.distance)


@dataclass
class _CellResult:
    errors: np.ndarray
    ops: np.ndarray
    fallbacks: int
    coverage: float
    build_time: float
    query_times: np.ndarray


def _localizer(method, grid_spec, bin_size, train, config, scenario):
    antennas = scenario.antenna_positions() if scenario is not None else {}
    if method == "ll":
        tables = construct_lookup_tables(
            train, BinSpec(bin_size), config.ll_mode, grid_spec=grid_spec,
            cluster_diameter=config.cluster_diameter, antennas=antennas,
        )
        return lambda m: lookup_laterate(m, tables, config.tolerance, config.spread_threshold)
    if method == "rfp":
        index = build_rfp_index(train, grid_spec)
        index.dense()
        kind = DistanceKind(config.distance)
        return lambda m: rfp_localize(m, index, kind)
    model = scenario.model
    return lambda m: tl_localize(m, antennas, model)


def _run_cell(method, grid_spec, bin_size, train, test, all_samples, config, scenario) -> _CellResult:
    t0 = time.perf_counter()
    localize = _localizer(method, grid_spec, bin_size, train, config, scenario)
    build_time = time.perf_counter() - t0

    # queries with nothing to go on are placed at the training centroid
    default = np.mean([s.position for s in train], axis=0)
    errors = np.empty(len(test))
    ops = np.zeros(len(test))
    times = np.empty(len(test))
    fallbacks = 0
    for i, s in enumerate(test):
        t = time.perf_counter()
        try:
            est = localize(s.measurement)
            pos = est.position
            ops[i] = est.ops
            if est.status is Status.FALLBACK:
                fallbacks += 1
        except (NoInformationError, InsufficientObservationsError):
            pos = default
            fallbacks += 1
        times[i] = time.perf_counter() - t
        errors[i] = math.hypot(pos[0] - s.position[0], pos[1] - s.position[1])
    cov = coverage(train, all_samples, grid_spec)
    return _CellResult(errors, ops, fallbacks, cov, build_time, times)


def _cdf(errors) -> List[float]:
    ordered = np.sort(errors)
    n = len(ordered)
    return [float(ordered[min(max(math.ceil(round(k / 100 * n, 9)), 1), n) - 1]) for k in range(1, 101)]


def _aggregate(method, grid_size, bin_size, results: List[_CellResult]) -> ErrorReport:
    e67 = np.array([error_percentile(r.errors, 0.67) for r in results])
    e95 = np.array([error_percentile(r.errors, 0.95) for r in results])
    mean = np.array([float(np.mean(r.errors)) for r in results])
    cov = np.array([r.coverage for r in results])
    cdf = np.mean([_cdf(r.errors) for r in results], axis=0)
    return ErrorReport(
        method=method,
        grid_size=float(grid_size),
        bin_size=None if bin_size is None else float(bin_size),
        repetitions=len(results),
        query_count=float(np.mean([len(r.errors) for r in results])),
        err67=float(e67.mean()),
        err95=float(e95.mean()),
        relative_error_67=float(e67.mean() / grid_size),
        relative_error_95=float(e95.mean() / grid_size),
        mean_error=float(mean.mean()),
        coverage=float(cov.mean()),
        err67_std=float(e67.std()),
        err95_std=float(e95.std()),
        mean_error_std=float(mean.std()),
        coverage_std=float(cov.std()),
        mean_ops=float(np.mean([r.ops.mean() for r in results])),
        fallback_fraction=float(np.mean([r.fallbacks / len(r.errors) for r in results])),
        build_time=float(np.mean([r.build_time for r in results])),
        mean_query_time=float(np.mean([r.query_times.mean() for r in results])),
        cdf=[float(v) for v in cdf],
    )


def sweep_cells(config: BenchConfig) -> List[Tuple[str, float, Optional[float]]]:
    cells = []
    for method in config.methods:
        for g in config.grid_sizes:
            if method == "ll":
                for b in (config.bin_sizes or (1.0,)):
                    cells.append((method, float(g), float(b)))
            else:
                cells.append((method, float(g), None))
    return cells


def run_benchmark(
    samples: Sequence[LocatedSample],
    config: BenchConfig,
    scenario: Optional[Scenario] = None,
) -> List[ErrorReport]:
    """Evaluate every sweep cell over every repetition and average the metrics."""
    config.validate(scenario)
    if len(samples) < 2:
        raise ConfigError("benchmark needs at least two samples")
    if config.grid_origin is not None:
        origin = tuple(float(v) for v in config.grid_origin)
    else:
        origin = GridSpec.covering((s.position for s in samples), 1.0).origin

    if config.replay:
        splits = [(list(samples), list(samples))]
    else:
        splits = [split(samples, config.split, rep) for rep in range(config.split.repetitions)]
    if config.max_queries is not None:
        capped = []
        for rep, (train, test) in enumerate(splits):
            if len(test) > config.max_queries:
                rng = np.random.default_rng([config.split.seed, rep, 1])
                keep = np.sort(rng.choice(len(test), config.max_queries, replace=False))
                test = [test[i] for i in keep]
            capped.append((train, test))
        splits = capped

    cells = sweep_cells(config)
    units = [(c, rep) for c in cells for rep in range(len(splits))]

    def work(unit):
        (method, g, b), rep = unit
        train, test = splits[rep]
        return _run_cell(method, GridSpec(g, origin), b, train, test, samples, config, scenario)

    if config.threads > 1:
        with ThreadPoolExecutor(max_workers=config.threads) as pool:
            results = list(pool.map(work, units))
    else:
        results = [work(u) for u in units]

    reports = []
    per_cell = len(splits)
    for i, (method, g, b) in enumerate(cells):
        reports.append(_aggregate(method, g, b, results[i * per_cell:(i + 1) * per_cell]))
    return reports


# -- report output ---------------------------------------------------------

def _csv_value(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return v


def reports_to_csv(reports: Sequence[ErrorReport], include_timing: bool = False) -> str:
    buf = io.StringIO()
    names = CSV_FIELDS + (TIMING_FIELDS if include_timing else [])
    writer = csv.DictWriter(buf, fieldnames=names, lineterminator="\n")
    writer.writeheader()
    for r in reports:
        writer.writerow({k: _csv_value(v) for k, v in r.row(include_timing).items()})
    return buf.getvalue()


def reports_to_json(reports: Sequence[ErrorReport], config: Optional[dict] = None,
                    include_timing: bool = False) -> str:
    body = []
    for r in reports:
        d = asdict(r)
        if not include_timing:
            for k in TIMING_FIELDS:
                d.pop(k)
        body.append(d)
    doc = {
        "format": "lookuplat-report",
        "version": 1,
        "percentile_method": PERCENTILE_METHOD,
        "cdf_resolution": 0.01,
        "config": config or {},
        "reports": body,
    }
    return json.dumps(doc, indent=2) + "\n"


def format_summary(reports: Sequence[ErrorReport]) -> str:
    lines = [f"{'method':<6} {'grid':>7} {'bin':>5} {'err67':>9} {'err95':>9} {'cover':>6} {'ops':>9} {'t/query':>10}"]
    for r in reports:
        b = "-" if r.bin_size is None else f"{r.bin_size:g}"
        lines.append(
            f"{r.method:<6} {r.grid_size:>7g} {b:>5} {r.err67:>9.2f} {r.err95:>9.2f} "
            f"{r.coverage:>6.3f} {r.mean_ops:>9.1f} {r.mean_query_time * 1e6:>8.1f}us"
        )
    return "\n".join(lines)
