"""Command-line front end: ``lookuplat {scenario,gen,build,localize,bench}``.

Exit codes: 0 success, 1 usage or configuration error, 2 I/O error,
3 query could not be localized (fallback default or no information).

Every subcommand accepts ``--config FILE`` holding a JSON object whose keys
are option names (dashes or underscores); explicit flags win over it.
"""

from __future__ import annotations

import argparse
import json
import sys
from typing import Dict, List, Optional, Sequence

from . import baselines, evaluation, lookup, scenario
from .errors import (
    ConfigError,
    InsufficientObservationsError,
    NoInformationError,
    ParseError,
)
from .estimate import Status
from .grid import BinSpec, GridId, GridSpec

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_IO = 2
EXIT_NO_INFO = 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


DEFAULTS: Dict[str, Dict[str, object]] = {
    "scenario": {
        "extent": "0,0,1000,1000", "antennas": 20, "obstacles": 50, "seed": 0,
        "penalty": 20.0, "noise": 1.0, "top_k": 20, "out": None,
    },
    "gen": {"scenario": None, "samples": None, "lattice": None, "seed": 0, "out": None},
    "build": {
        "method": "ll", "in": None, "out": None, "grid": 20.0, "bin": 1.0, "origin": None,
        "mode": "grid", "diameter": None, "scenario": None, "labels": None, "list": False,
    },
    "localize": {
        "method": "ll", "artifact": None, "scenario": None, "q": None,
        "tolerance": None, "spread": None, "distance": "euclidean",
    },
    "bench": {
        "data": None, "scenario": None, "samples": None, "methods": "ll,rfp", "grids": "20",
        "bins": None, "train_frac": 0.1, "reps": 10, "seed": 0, "threads": 1,
        "max_queries": None, "replay": False, "mode": "grid", "diameter": None,
        "tolerance": None, "spread": None, "distance": "euclidean", "origin": None,
        "out_csv": None, "out_json": None, "timing": False,
    },
}


def _build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="lookuplat", description="Lookup lateration RSS localization toolkit")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    def common(sp):
        sp.add_argument("--config", help="JSON file of option values; flags override it")

    sp = sub.add_parser("scenario", help="write a random urban scenario document")
    common(sp)
    sp.add_argument("--extent", help="xmin,ymin,xmax,ymax in meters")
    sp.add_argument("--antennas", type=int)
    sp.add_argument("--obstacles", type=int)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--penalty", type=float, help="wall attenuation per obstacle (dB)")
    sp.add_argument("--noise", type=float, help="receiver noise std (dB)")
    sp.add_argument("--top-k", dest="top_k", type=int)
    sp.add_argument("--out")

    sp = sub.add_parser("gen", help="simulate a located sample file")
    common(sp)
    sp.add_argument("--scenario")
    sp.add_argument("--samples", type=int, help="uniform random receiver count")
    sp.add_argument("--lattice", help="NXxNY receivers at lattice cell centers")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--out", help="output path, '-' for stdout")

    sp = sub.add_parser("build", help="build lookup tables or a fingerprint index")
    common(sp)
    sp.add_argument("--method", choices=("ll", "rfp"))
    sp.add_argument("--in", dest="in")
    sp.add_argument("--out")
    sp.add_argument("--grid", type=float, help="grid cell size (m)")
    sp.add_argument("--bin", type=float, help="RSS bin size (dB), lookup tables only")
    sp.add_argument("--origin", help="grid origin x,y; default is the data's lower-left corner")
    sp.add_argument("--mode", choices=(lookup.GRID, lookup.CONTINUOUS))
    sp.add_argument("--diameter", type=float, help="cluster diameter for continuous mode (m)")
    sp.add_argument("--scenario", help="scenario document supplying antenna positions")
    sp.add_argument("--labels", help="JSON object mapping label -> [ix, iy] for --list")
    sp.add_argument("--list", action="store_const", const=True, help="print every table cell")

    sp = sub.add_parser("localize", help="localize one query")
    common(sp)
    sp.add_argument("--method", choices=("ll", "rfp", "tl"))
    sp.add_argument("--artifact", "--tables", "--index", dest="artifact")
    sp.add_argument("--scenario", help="scenario document (required for tl)")
    sp.add_argument("--q", help="readings as aid:rss[;aid:rss]*")
    sp.add_argument("--tolerance", type=float)
    sp.add_argument("--spread", type=float, help="spread threshold (m)")
    sp.add_argument("--distance", choices=[k.value for k in baselines.DistanceKind])

    sp = sub.add_parser("bench", help="run a benchmark sweep")
    common(sp)
    sp.add_argument("--data", help="sample file")
    sp.add_argument("--scenario", help="scenario document (antennas, model; data source if --data absent)")
    sp.add_argument("--samples", type=int, help="receivers to simulate when no --data is given")
    sp.add_argument("--methods", help="comma list of ll,rfp,tl")
    sp.add_argument("--grids", help="comma list of grid sizes (m)")
    sp.add_argument("--bins", help="comma list of RSS bin sizes (lookup lateration only)")
    sp.add_argument("--train-frac", dest="train_frac", type=float)
    sp.add_argument("--reps", type=int)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--threads", type=int)
    sp.add_argument("--max-queries", dest="max_queries", type=int)
    sp.add_argument("--replay", action="store_const", const=True,
                    help="train on all samples and replay them as queries")
    sp.add_argument("--mode", choices=(lookup.GRID, lookup.CONTINUOUS))
    sp.add_argument("--diameter", type=float)
    sp.add_argument("--tolerance", type=float)
    sp.add_argument("--spread", type=float)
    sp.add_argument("--distance", choices=[k.value for k in baselines.DistanceKind])
    sp.add_argument("--origin", help="grid origin x,y; default is the data's lower-left corner")
    sp.add_argument("--out-csv", dest="out_csv")
    sp.add_argument("--out-json", dest="out_json")
    sp.add_argument("--timing", action="store_const", const=True,
                    help="include wall-clock columns in written reports")
    return p


def _effective(command: str, ns: argparse.Namespace) -> Dict[str, object]:
    cfg = dict(DEFAULTS[command])
    if getattr(ns, "config", None):
        try:
            with open(ns.config, encoding="utf-8") as fh:
                doc = json.load(fh)
        except OSError:
            raise
        except ValueError as exc:
            raise UsageError(f"config file {ns.config}: {exc}") from None
        if not isinstance(doc, dict):
            raise UsageError("config file must hold a JSON object")
        for k, v in doc.items():
            key = k.replace("-", "_")
            if key not in cfg:
                raise UsageError(f"unknown config key {k!r} for {command}")
            cfg[key] = v
    for k in cfg:
        v = getattr(ns, k, None)
        if v is not None:
            cfg[k] = v
    return cfg


def _floats(text, what) -> List[float]:
    if isinstance(text, (list, tuple)):
        return [float(v) for v in text]
    if isinstance(text, (int, float)):
        return [float(text)]
    try:
        vals = [float(v) for v in str(text).split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"bad {what} list {text!r}") from None
    if not vals:
        raise UsageError(f"empty {what} list")
    return vals


def _pair(text, what):
    vals = _floats(text, what)
    if len(vals) != 2:
        raise UsageError(f"{what} needs two values x,y")
    return tuple(vals)


def _out(path):
    return sys.stdout if path in (None, "-") else open(path, "w", encoding="utf-8", newline="\n")


# -- subcommands -----------------------------------------------------------

def cmd_scenario(cfg) -> int:
    extent = _floats(cfg["extent"], "extent")
    if len(extent) != 4:
        raise UsageError("extent needs xmin,ymin,xmax,ymax")
    try:
        sc = scenario.make_urban_scenario(
            tuple(extent), int(cfg["antennas"]), int(cfg["obstacles"]), int(cfg["seed"]),
            penalty=float(cfg["penalty"]), noise_std=float(cfg["noise"]), top_k=int(cfg["top_k"]),
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    doc = json.dumps(scenario.scenario_to_dict(sc), indent=2) + "\n"
    fh = _out(cfg["out"])
    try:
        fh.write(doc)
    finally:
        if fh is not sys.stdout:
            fh.close()
    return EXIT_OK


def _load_scenario(path) -> scenario.Scenario:
    try:
        return scenario.load_scenario(path)
    except ValueError as exc:
        raise UsageError(f"invalid scenario {path}: {exc}") from None


def cmd_gen(cfg) -> int:
    if not cfg["scenario"]:
        raise UsageError("gen needs --scenario")
    if cfg["samples"] is not None and cfg["lattice"] is not None:
        raise UsageError("give either --samples or --lattice, not both")
    if cfg["lattice"] is not None:
        try:
            nx, ny = (int(v) for v in str(cfg["lattice"]).lower().split("x"))
        except ValueError:
            raise UsageError(f"bad lattice {cfg['lattice']!r}, expected NXxNY") from None
        if nx < 1 or ny < 1:
            raise UsageError("lattice dimensions must be >= 1")
        sampling = scenario.GridSampling(nx, ny)
    else:
        if cfg["samples"] is None or int(cfg["samples"]) < 1:
            raise UsageError("--samples must be >= 1")
        sampling = scenario.RandomSampling(int(cfg["samples"]))
    sc = _load_scenario(cfg["scenario"])
    data = scenario.generate_dataset(sc, sampling, int(cfg["seed"]))
    fh = _out(cfg["out"])
    try:
        n = scenario.write_samples(data, fh)
    finally:
        if fh is not sys.stdout:
            fh.close()
    xs = [s.position[0] for s in data]
    ys = [s.position[1] for s in data]
    info = sys.stderr if fh is sys.stdout else sys.stdout
    print(f"samples {n} extent {min(xs):g} {min(ys):g} {max(xs):g} {max(ys):g}", file=info)
    return EXIT_OK


def _read_samples(path):
    rejects: list = []
    samples = scenario.load_samples(path, errors=rejects)
    for exc in rejects[:5]:
        print(f"skipped: {exc}", file=sys.stderr)
    if len(rejects) > 5:
        print(f"skipped {len(rejects) - 5} more lines", file=sys.stderr)
    return samples, rejects


def cmd_build(cfg) -> int:
    if not cfg["in"] or not cfg["out"]:
        raise UsageError("build needs --in and --out")
    samples, rejects = _read_samples(cfg["in"])
    if not samples:
        raise UsageError(f"no usable samples in {cfg['in']}")
    size = float(cfg["grid"])
    if not size > 0:
        raise UsageError("--grid must be positive")
    if cfg["origin"] is not None:
        spec = GridSpec(size, _pair(cfg["origin"], "origin"))
    else:
        spec = GridSpec.covering((s.position for s in samples), size)
    antennas = _load_scenario(cfg["scenario"]).antenna_positions() if cfg["scenario"] else {}

    if cfg["method"] == "ll":
        if not float(cfg["bin"]) > 0:
            raise UsageError("--bin must be positive")
        mode = cfg["mode"]
        if mode == lookup.CONTINUOUS and not (cfg["diameter"] and float(cfg["diameter"]) > 0):
            raise UsageError("continuous mode needs --diameter")
        tables = lookup.construct_lookup_tables(
            samples, BinSpec(float(cfg["bin"])), mode,
            grid_spec=spec if mode == lookup.GRID else None,
            cluster_diameter=None if cfg["diameter"] is None else float(cfg["diameter"]),
            antennas=antennas,
        )
        lookup.save_tables(tables, cfg["out"])
        entries = sum(len(v) for v in tables.cells.values())
        print(f"samples {len(samples)} rejected {len(rejects)} cells {len(tables.cells)} "
              f"entries {entries} distinct {len(tables.distinct_entries())}")
        if cfg["list"]:
            labels = {}
            if cfg["labels"]:
                with open(cfg["labels"], encoding="utf-8") as fh:
                    labels = {GridId(int(v[0]), int(v[1])): k for k, v in json.load(fh).items()}
            for line in lookup.cell_listing(tables, labels):
                print(line)
    else:
        index = baselines.build_rfp_index(samples, spec)
        baselines.save_index(index, cfg["out"])
        print(f"samples {len(samples)} rejected {len(rejects)} grids {len(index)}")
    return EXIT_OK


def _print_estimate(est) -> None:
    x, y = est.position
    print(f"{x!r} {y!r} {est.status.value}")


def cmd_localize(cfg) -> int:
    q = cfg["q"]
    if q is None or not str(q).strip():
        raise UsageError("--q needs at least one aid:rss reading")
    try:
        readings = scenario.parse_readings(str(q))
    except ParseError as exc:
        raise UsageError(f"bad query: {exc}") from None
    m = scenario.Measurement(readings)
    method = cfg["method"]
    try:
        if method == "tl":
            if not cfg["scenario"]:
                raise UsageError("tl needs --scenario for antenna positions and model")
            sc = _load_scenario(cfg["scenario"])
            est = baselines.tl_localize(m, sc.antenna_positions(), sc.model)
        else:
            if not cfg["artifact"]:
                raise UsageError(f"{method} needs --artifact")
            if method == "ll":
                tables = lookup.read_tables(cfg["artifact"])
                if cfg["scenario"]:
                    for aid, pos in _load_scenario(cfg["scenario"]).antenna_positions().items():
                        tables.antennas.setdefault(aid, pos)
                est = lookup.lookup_laterate(m, tables, cfg["tolerance"], cfg["spread"])
            else:
                index = baselines.read_index(cfg["artifact"])
                est = baselines.rfp_localize(m, index, baselines.DistanceKind(cfg["distance"]))
    except (NoInformationError, InsufficientObservationsError) as exc:
        print("nan nan no-information")
        print(f"lookuplat: {exc}", file=sys.stderr)
        return EXIT_NO_INFO
    _print_estimate(est)
    return EXIT_NO_INFO if est.status is Status.FALLBACK else EXIT_OK


def bench_config(cfg) -> evaluation.BenchConfig:
    methods = [m.strip() for m in str(cfg["methods"]).split(",") if m.strip()] \
        if not isinstance(cfg["methods"], list) else list(cfg["methods"])
    if int(cfg["reps"]) < 1:
        raise UsageError("--reps must be >= 1")
    if int(cfg["threads"]) < 1:
        raise UsageError("--threads must be >= 1")
    try:
        split = evaluation.SplitSpec(float(cfg["train_frac"]), int(cfg["reps"]), int(cfg["seed"]))
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    return evaluation.BenchConfig(
        methods=tuple(methods),
        grid_sizes=tuple(_floats(cfg["grids"], "grid")),
        bin_sizes=None if cfg["bins"] is None else tuple(_floats(cfg["bins"], "bin")),
        split=split,
        ll_mode=cfg["mode"],
        cluster_diameter=cfg["diameter"],
        tolerance=cfg["tolerance"],
        spread_threshold=cfg["spread"],
        distance=cfg["distance"],
        max_queries=cfg["max_queries"],
        replay=bool(cfg["replay"]),
        threads=int(cfg["threads"]),
        grid_origin=None if cfg["origin"] is None else _pair(cfg["origin"], "origin"),
    )


def cmd_bench(cfg) -> int:
    config = bench_config(cfg)
    sc = _load_scenario(cfg["scenario"]) if cfg["scenario"] else None
    if cfg["data"]:
        samples, _ = _read_samples(cfg["data"])
    elif sc is not None:
        if cfg["samples"] is None or int(cfg["samples"]) < 2:
            raise UsageError("bench from a scenario needs --samples >= 2")
        samples = scenario.generate_dataset(sc, scenario.RandomSampling(int(cfg["samples"])), int(cfg["seed"]))
    else:
        raise UsageError("bench needs --data or --scenario")
    try:
        reports = evaluation.run_benchmark(samples, config, sc)
    except (ConfigError, ValueError) as exc:
        raise UsageError(str(exc)) from None

    timing = bool(cfg["timing"])
    # where the reports go is not part of how they were produced
    echoed = {k: v for k, v in cfg.items() if k not in ("out_csv", "out_json")}
    if cfg["out_csv"]:
        with open(cfg["out_csv"], "w", encoding="utf-8", newline="") as fh:
            fh.write(evaluation.reports_to_csv(reports, timing))
    if cfg["out_json"]:
        with open(cfg["out_json"], "w", encoding="utf-8", newline="\n") as fh:
            fh.write(evaluation.reports_to_json(reports, echoed, timing))
    print(evaluation.format_summary(reports))
    return EXIT_OK


COMMANDS = {
    "scenario": cmd_scenario,
    "gen": cmd_gen,
    "build": cmd_build,
    "localize": cmd_localize,
    "bench": cmd_bench,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = _build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    try:
        cfg = _effective(ns.command, ns)
        return COMMANDS[ns.command](cfg)
    except UsageError as exc:
        print(f"lookuplat {ns.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ConfigError, ParseError) as exc:
        print(f"lookuplat {ns.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"lookuplat {ns.command}: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
