"""Lookup lateration for RSS geo-localization, with grid-mean fingerprinting
and triangular lateration baselines, a synthetic urban scenario generator and
a benchmark harness."""

from .baselines import (
    DistanceKind,
    RfpIndex,
    build_rfp_index,
    measurement_distance,
    rfp_localize,
    tl_localize,
)
from .errors import (
    ConfigError,
    InsufficientObservationsError,
    LookupLaterationError,
    NoInformationError,
    ParseError,
    RejectedSampleError,
)
from .estimate import LocationEstimate, Status
from .evaluation import BenchConfig, ErrorReport, SplitSpec, coverage, error_percentile, run_benchmark, split
from .grid import BinSpec, GridId, GridSpec, bin_rss, center_of, grid_of
from .lookup import LookupTables, cluster_locations, construct_lookup_tables, lookup_laterate
from .scenario import (
    Antenna,
    GridSampling,
    LocatedSample,
    Measurement,
    Obstacle,
    PathLossModel,
    RandomSampling,
    Scenario,
    count_obstructions,
    distance_of,
    generate_dataset,
    ingest_samples,
    rss_at_distance,
    simulate_measurement,
)

__version__ = "0.1.0"

__all__ = [
    "Antenna",
    "BenchConfig",
    "BinSpec",
    "ConfigError",
    "DistanceKind",
    "ErrorReport",
    "GridId",
    "GridSampling",
    "GridSpec",
    "InsufficientObservationsError",
    "LocatedSample",
    "LocationEstimate",
    "LookupLaterationError",
    "LookupTables",
    "Measurement",
    "NoInformationError",
    "Obstacle",
    "ParseError",
    "PathLossModel",
    "RandomSampling",
    "RejectedSampleError",
    "RfpIndex",
    "Scenario",
    "SplitSpec",
    "Status",
    "bin_rss",
    "build_rfp_index",
    "center_of",
    "cluster_locations",
    "construct_lookup_tables",
    "count_obstructions",
    "coverage",
    "distance_of",
    "error_percentile",
    "generate_dataset",
    "grid_of",
    "ingest_samples",
    "lookup_laterate",
    "measurement_distance",
    "rfp_localize",
    "rss_at_distance",
    "run_benchmark",
    "simulate_measurement",
    "split",
    "tl_localize",
]
