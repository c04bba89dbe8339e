"""Benchmark harness: random suites, inefficiency metrics, isotonicity scans.

Every random choice is derived from the suite's master seed by hashing, so a
suite produces the same records whatever the number of worker processes.
Records are sorted by ``(graph_id, algorithm)`` before they are returned.
"""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import io
import itertools
import math
import struct
import time
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence, TextIO, Union

import numpy as np

from qroute.algorithms import AlgorithmSpec, find_path
from qroute.metaheuristics import GaConfig, SaConfig
from qroute.netgraph import (
    Direction,
    GraphGenConfig,
    NetworkGraph,
    NoPathError,
    Route,
    connected,
    iter_simple_paths,
    waxman_generate,
)
from qroute.skr_model import DEFAULT_SAMPLES, PhysicalParams, SkrEstimator

CSV_COLUMNS = (
    "graph_id", "n_repeaters", "algorithm", "skr_hz", "query_count",
    "wall_time_ms", "seed", "route",
)
ERROR_PREFIX = "error:"
MAX_REDRAWS = 1000


def derive_seed(master: int, *parts: object) -> int:
    """63-bit seed from a master seed and a label path."""
    h = hashlib.blake2b(digest_size=8)
    h.update(struct.pack("<q", master))
    for part in parts:
        h.update(b"\x1f" + str(part).encode())
    return int.from_bytes(h.digest(), "little") >> 1


def graph_id(n_repeaters: int, index: int) -> str:
    return f"n{n_repeaters:03d}-g{index:04d}"


@dataclass(frozen=True)
class BenchmarkRecord:
    """One algorithm run on one graph.

    ``error`` holds the exception type name for failed runs; such rows carry
    an empty route and ``skr_hz == 0``.
    """

    graph_id: str
    n_repeaters: int
    algorithm: str
    skr_hz: float
    query_count: int
    wall_time_ms: float
    seed: int
    route: Route = ()
    error: Optional[str] = None

    def __post_init__(self) -> None:
        if not self.skr_hz >= 0:
            raise ValueError("skr_hz must be >= 0")
        if self.query_count < 0:
            raise ValueError("query_count must be >= 0")

    @property
    def ok(self) -> bool:
        return self.error is None


@dataclass(frozen=True)
class SuiteConfig:
    """A grid of random graphs and the algorithms to run on each.

    Attributes:
        repeater_counts: Graph sizes to generate.
        graphs_per_count: Graphs per size.
        graph_template: Generator settings; its ``n_repeaters`` and ``seed``
            are overridden per graph.
        params: Hardware parameters for the estimator.
        algorithms: Algorithm names, optionally with budgets (``sa:100``).
        sa_config: Base annealing settings (steps and seed are overridden).
        ga_config: Base genetic settings (generations and seed are overridden).
        samples: Monte-Carlo samples per query.
        master_seed: Source of every derived seed.
        prune: Apply s-t biconnected pruning first.
        direction: Direction rule for the search.
        record_timing: Write measured wall times; ``False`` writes 0.0 so
            that CSV output is byte-reproducible.
        workers: Worker processes (graph-level parallelism).
        connected_only: Redraw a graph (with a derived seed) until its end
            nodes are connected, so each index yields a usable instance.
    """

    repeater_counts: tuple[int, ...] = (25,)
    graphs_per_count: int = 10
    graph_template: GraphGenConfig = field(default_factory=GraphGenConfig)
    params: PhysicalParams = field(default_factory=PhysicalParams)
    algorithms: tuple[str, ...] = ("befs_heuristic",)
    sa_config: SaConfig = field(default_factory=SaConfig)
    ga_config: GaConfig = field(default_factory=GaConfig)
    samples: int = DEFAULT_SAMPLES
    master_seed: int = 0
    prune: bool = True
    direction: Direction = Direction.MEAN
    record_timing: bool = True
    workers: int = 1
    connected_only: bool = False

    def __post_init__(self) -> None:
        object.__setattr__(self, "repeater_counts", tuple(self.repeater_counts))
        object.__setattr__(self, "algorithms", tuple(self.algorithms))
        object.__setattr__(self, "direction", Direction(self.direction))
        if self.graphs_per_count < 1:
            raise ValueError("graphs_per_count must be >= 1")
        if not self.repeater_counts or min(self.repeater_counts) < 0:
            raise ValueError("repeater_counts must be non-empty and >= 0")
        if not self.algorithms:
            raise ValueError("at least one algorithm is required")
        for name in self.algorithms:
            AlgorithmSpec.parse(name)
        if self.samples < 1:
            raise ValueError("samples must be >= 1")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")


# -- running -------------------------------------------------------------


def suite_graph(config: SuiteConfig, n_repeaters: int, index: int) -> NetworkGraph:
    """The graph a suite uses at ``(n_repeaters, index)``."""
    for attempt in range(MAX_REDRAWS):
        parts = ("graph", n_repeaters, index) + ((attempt,) if attempt else ())
        gen = dataclasses.replace(
            config.graph_template,
            n_repeaters=n_repeaters,
            seed=derive_seed(config.master_seed, *parts),
        )
        g = waxman_generate(gen)
        if not config.connected_only or connected(g, *g.end_nodes):
            return g
    raise NoPathError(f"no connected graph after {MAX_REDRAWS} draws")


def suite_estimator(config: SuiteConfig, n_repeaters: int, index: int) -> SkrEstimator:
    """Estimator shared (with separate counters) by all algorithms on a graph."""
    return SkrEstimator(
        config.params,
        config.samples,
        seed=derive_seed(config.master_seed, "estimator", n_repeaters, index),
        cache={},
    )


def run_graph(config: SuiteConfig, n_repeaters: int, index: int) -> list[BenchmarkRecord]:
    """All configured algorithms on one suite graph; failures become error rows."""
    gid = graph_id(n_repeaters, index)
    records = []
    try:
        g = suite_graph(config, n_repeaters, index)
        base = suite_estimator(config, n_repeaters, index)
    except Exception as exc:  # recorded, never raised
        for name in config.algorithms:
            seed = derive_seed(config.master_seed, "algo", n_repeaters, index, name)
            records.append(BenchmarkRecord(gid, n_repeaters, name, 0.0, 0, 0.0, seed,
                                           (), type(exc).__name__))
        return records
    s, t = g.end_nodes
    for name in config.algorithms:
        seed = derive_seed(config.master_seed, "algo", n_repeaters, index, name)
        est = base.fork()
        before = est.queries
        tic = time.perf_counter()
        try:
            result = find_path(
                g, s, t, name, est, seed=seed, prune=config.prune,
                direction=config.direction, sa_config=config.sa_config,
                ga_config=config.ga_config,
            )
            elapsed = (time.perf_counter() - tic) * 1e3
            delta = est.queries - before
            if delta != result.queries:
                raise AssertionError(f"query accounting mismatch: {delta} != {result.queries}")
            rec = BenchmarkRecord(gid, n_repeaters, name, max(result.skr_hz, 0.0), delta,
                                  elapsed if config.record_timing else 0.0, seed,
                                  tuple(result.route))
        except Exception as exc:  # recorded, never raised
            elapsed = (time.perf_counter() - tic) * 1e3
            rec = BenchmarkRecord(gid, n_repeaters, name, 0.0, est.queries - before,
                                  elapsed if config.record_timing else 0.0, seed,
                                  (), type(exc).__name__)
        records.append(rec)
    return records


def _run_task(args: tuple[SuiteConfig, int, int]) -> list[BenchmarkRecord]:
    return run_graph(*args)


def run_suite(config: SuiteConfig) -> list[BenchmarkRecord]:
    """Run every algorithm on every suite graph; sorted by (graph_id, algorithm)."""
    tasks = [(config, n, i) for n in config.repeater_counts
             for i in range(config.graphs_per_count)]
    if config.workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            chunks = list(pool.map(_run_task, tasks))
    else:
        chunks = [_run_task(task) for task in tasks]
    records = [r for chunk in chunks for r in chunk]
    records.sort(key=lambda r: (r.graph_id, r.algorithm))
    return records


# -- metrics -------------------------------------------------------------


def relative_inefficiency(records: Sequence[BenchmarkRecord]) -> dict[str, float]:
    """``(best - skr) / best`` per algorithm, with best the maximum rate found.

    All records must describe the same graph. When every rate is zero the
    inefficiency is zero for every algorithm.
    """
    if not records:
        raise ValueError("need at least one record")
    if len({r.graph_id for r in records}) != 1:
        raise ValueError("records must belong to a single graph")
    best = max(r.skr_hz for r in records)
    if best <= 0:
        return {r.algorithm: 0.0 for r in records}
    return {r.algorithm: (best - r.skr_hz) / best for r in records}


def inefficiency_by_graph(records: Iterable[BenchmarkRecord]) -> dict[str, dict[str, float]]:
    groups: dict[str, list[BenchmarkRecord]] = defaultdict(list)
    for r in records:
        groups[r.graph_id].append(r)
    return {gid: relative_inefficiency(rs) for gid, rs in sorted(groups.items())}


def mean_and_stderr(values: Sequence[float]) -> tuple[float, float]:
    arr = np.asarray(values, dtype=float)
    if arr.size == 0:
        return math.nan, math.nan
    if arr.size == 1:
        return float(arr[0]), 0.0
    return float(arr.mean()), float(arr.std(ddof=1) / math.sqrt(arr.size))


# -- CSV -----------------------------------------------------------------


def _encode_route(r: BenchmarkRecord) -> str:
    if r.error is not None:
        return ERROR_PREFIX + r.error
    return "-".join(str(v) for v in r.route)


def write_csv(records: Iterable[BenchmarkRecord], out: Union[str, Path, TextIO]) -> None:
    """Write records with the fixed column order; floats use ``repr``."""
    if isinstance(out, (str, Path)):
        with open(out, "w", newline="", encoding="utf-8") as fh:
            write_csv(records, fh)
        return
    w = csv.writer(out, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in records:
        w.writerow([r.graph_id, r.n_repeaters, r.algorithm, repr(float(r.skr_hz)),
                    r.query_count, repr(float(r.wall_time_ms)), r.seed, _encode_route(r)])


def records_to_csv(records: Iterable[BenchmarkRecord]) -> str:
    buf = io.StringIO()
    write_csv(records, buf)
    return buf.getvalue()


def read_csv(source: Union[str, Path, TextIO]) -> list[BenchmarkRecord]:
    """Parse output of :func:`write_csv` back into records."""
    if isinstance(source, (str, Path)):
        with open(source, newline="", encoding="utf-8") as fh:
            return read_csv(fh)
    reader = csv.DictReader(source)
    if tuple(reader.fieldnames or ()) != CSV_COLUMNS:
        raise ValueError(f"unexpected CSV header {reader.fieldnames}")
    out = []
    for row in reader:
        route_text = row["route"]
        error = None
        route: Route = ()
        if route_text.startswith(ERROR_PREFIX):
            error = route_text[len(ERROR_PREFIX):]
        elif route_text:
            route = tuple(int(v) for v in route_text.split("-"))
        out.append(BenchmarkRecord(
            row["graph_id"], int(row["n_repeaters"]), row["algorithm"],
            float(row["skr_hz"]), int(row["query_count"]), float(row["wall_time_ms"]),
            int(row["seed"]), route, error,
        ))
    return out


# -- isotonicity scan ----------------------------------------------------


@dataclass(frozen=True)
class IsotonicityConfig:
    """Settings for both parts of the isotonicity scan.

    The witness search enumerates prefixes from ``s`` with at most
    ``max_prefix_edges`` edges on unpruned random graphs. The grid runs
    extended Dijkstra against ``reference`` on ``grid_graphs`` graphs per cell.
    """

    fidelity: float = 0.94
    coherence_time: float = 10.0
    n_graphs: int = 100
    n_repeaters: int = 8
    max_prefix_edges: int = 2
    sigmas: float = 3.0
    max_witnesses: int = 5
    grid_fidelities: tuple[float, ...] = ()
    grid_coherence_times: tuple[float, ...] = ()
    grid_graphs: int = 20
    grid_repeaters: int = 25
    reference: str = "befs_heuristic"
    graph_template: GraphGenConfig = field(default_factory=GraphGenConfig)
    samples: int = DEFAULT_SAMPLES
    master_seed: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "grid_fidelities", tuple(self.grid_fidelities))
        object.__setattr__(self, "grid_coherence_times", tuple(self.grid_coherence_times))
        if self.n_graphs < 0 or self.grid_graphs < 1:
            raise ValueError("graph counts must be >= 0 (witnesses) and >= 1 (grid)")
        if self.max_prefix_edges < 1:
            raise ValueError("max_prefix_edges must be >= 1")
        if self.max_witnesses < 0:
            raise ValueError("max_witnesses must be >= 0")
        AlgorithmSpec.parse(self.reference)
        PhysicalParams(self.fidelity, self.coherence_time)


@dataclass(frozen=True)
class Witness:
    """``skr(p1) < skr(p2)`` while ``skr(p1 + e) > skr(p2 + e)``, both significant."""

    graph_id: str
    p1: Route
    p2: Route
    edge: tuple[int, int]
    skr_p1: float
    skr_p2: float
    skr_p1e: float
    skr_p2e: float
    z_before: float
    z_after: float


@dataclass(frozen=True)
class GridPoint:
    fidelity: float
    coherence_time: float
    mean_inefficiency: float
    stderr: float
    n_graphs: int


@dataclass
class IsotonicityReport:
    witnesses: list[Witness]
    grid: list[GridPoint]


def _z(hi, lo) -> float:
    """Separation of two estimates in combined standard errors."""
    diff = hi.skr_hz - lo.skr_hz
    se = math.hypot(hi.stderr_hz, lo.stderr_hz)
    if se == 0:
        return math.inf if diff > 0 else (0.0 if diff == 0 else -math.inf)
    return diff / se


def find_witnesses(g: NetworkGraph, estimator: SkrEstimator, max_prefix_edges: int,
                   sigmas: float, limit: int, gid: str = "") -> list[Witness]:
    """Witness triples among prefixes from the first end node of ``g``."""
    if limit <= 0:
        return []
    s, _ = g.end_nodes
    by_end: dict[int, list[Route]] = defaultdict(list)
    for v in range(g.node_count):
        if v == s:
            continue
        for p in iter_simple_paths(g, s, v, max_edges=max_prefix_edges):
            by_end[v].append(p)
    out: list[Witness] = []
    for v in sorted(by_end):
        prefixes = by_end[v]
        if len(prefixes) < 2:
            continue
        est = {p: estimator.estimate(g.path_lengths(p)) for p in prefixes}
        for p1, p2 in itertools.permutations(prefixes, 2):
            z_before = _z(est[p2], est[p1])
            if z_before <= sigmas:
                continue
            for w in g.neighbors(v):
                if w in p1 or w in p2:
                    continue
                e1 = estimator.estimate(g.path_lengths(p1 + (w,)))
                e2 = estimator.estimate(g.path_lengths(p2 + (w,)))
                z_after = _z(e1, e2)
                if z_after > sigmas:
                    out.append(Witness(gid, p1, p2, (v, w), est[p1].skr_hz, est[p2].skr_hz,
                                       e1.skr_hz, e2.skr_hz, z_before, z_after))
                    if len(out) >= limit:
                        return out
    return out


def dijkstra_inefficiency(params: PhysicalParams, n_graphs: int, n_repeaters: int,
                          master_seed: int, reference: str = "befs_heuristic",
                          samples: int = DEFAULT_SAMPLES,
                          template: Optional[GraphGenConfig] = None) -> list[float]:
    """Per-graph relative inefficiency of extended Dijkstra against ``reference``."""
    config = SuiteConfig(
        repeater_counts=(n_repeaters,), graphs_per_count=n_graphs,
        graph_template=template or GraphGenConfig(), params=params,
        algorithms=("extended_dijkstra", reference), samples=samples,
        master_seed=master_seed, record_timing=False,
    )
    table = inefficiency_by_graph(run_suite(config))
    return [row["extended_dijkstra"] for row in table.values()]


def isotonicity_scan(config: IsotonicityConfig) -> IsotonicityReport:
    """Search for non-isotonic triples, then measure Dijkstra's inefficiency grid."""
    params = PhysicalParams(config.fidelity, config.coherence_time)
    witnesses: list[Witness] = []
    for i in range(config.n_graphs):
        if len(witnesses) >= config.max_witnesses:
            break
        gen = dataclasses.replace(
            config.graph_template, n_repeaters=config.n_repeaters,
            seed=derive_seed(config.master_seed, "scan-graph", i),
        )
        g = waxman_generate(gen)
        est = SkrEstimator(params, config.samples,
                           seed=derive_seed(config.master_seed, "scan-estimator", i))
        witnesses += find_witnesses(g, est, config.max_prefix_edges, config.sigmas,
                                    config.max_witnesses - len(witnesses),
                                    graph_id(config.n_repeaters, i))
    grid = []
    for fid in config.grid_fidelities:
        for coh in config.grid_coherence_times:
            values = dijkstra_inefficiency(
                PhysicalParams(fid, coh), config.grid_graphs, config.grid_repeaters,
                derive_seed(config.master_seed, "grid", fid, coh), config.reference,
                config.samples, config.graph_template,
            )
            mean, se = mean_and_stderr(values)
            grid.append(GridPoint(fid, coh, mean, se, len(values)))
    return IsotonicityReport(witnesses, grid)


SCAN_COLUMNS = (
    "kind", "graph_id", "p1", "p2", "edge", "skr_p1", "skr_p2", "skr_p1e", "skr_p2e",
    "fidelity", "coherence_time", "mean_inefficiency", "stderr", "n_graphs",
)


def write_scan_csv(report: IsotonicityReport, out: Union[str, Path, TextIO]) -> None:
    """Witness rows then grid rows under one header; unused cells are empty."""
    if isinstance(out, (str, Path)):
        with open(out, "w", newline="", encoding="utf-8") as fh:
            write_scan_csv(report, fh)
        return
    w = csv.writer(out, lineterminator="\n")
    w.writerow(SCAN_COLUMNS)
    path = lambda p: "-".join(map(str, p))  # noqa: E731
    for x in report.witnesses:
        w.writerow(["witness", x.graph_id, path(x.p1), path(x.p2), path(x.edge),
                    repr(x.skr_p1), repr(x.skr_p2), repr(x.skr_p1e), repr(x.skr_p2e),
                    "", "", "", "", ""])
    for p in report.grid:
        w.writerow(["grid", "", "", "", "", "", "", "", "", repr(p.fidelity),
                    repr(p.coherence_time), repr(p.mean_inefficiency), repr(p.stderr),
                    p.n_graphs])


# -- SVG -----------------------------------------------------------------

_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b",
            "#e377c2", "#7f7f7f", "#17becf")


def scatter_svg(records: Sequence[BenchmarkRecord], width: int = 640,
                height: int = 420) -> str:
    """Query count (log x) against relative inefficiency, one colour per algorithm."""
    ineff = inefficiency_by_graph(r for r in records if r.ok)
    points: dict[str, list[tuple[float, float]]] = defaultdict(list)
    for r in records:
        if r.ok and r.query_count > 0:
            points[r.algorithm].append((float(r.query_count), ineff[r.graph_id][r.algorithm]))
    margin_l, margin_r, margin_t, margin_b = 60, 150, 20, 50
    pw, ph = width - margin_l - margin_r, height - margin_t - margin_b
    xs = [x for pts in points.values() for x, _ in pts] or [1.0, 10.0]
    lo = math.floor(math.log10(min(xs)))
    hi = max(math.ceil(math.log10(max(xs))), lo + 1)
    ymax = max([y for pts in points.values() for _, y in pts] + [0.0])
    ymax = 1.0 if ymax <= 0 else min(1.0, ymax * 1.1)

    def px(x: float) -> float:
        return margin_l + pw * (math.log10(x) - lo) / (hi - lo)

    def py(y: float) -> float:
        return margin_t + ph * (1 - y / ymax)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'font-family="sans-serif" font-size="11">',
        f'<rect x="{margin_l}" y="{margin_t}" width="{pw}" height="{ph}" '
        'fill="none" stroke="black"/>',
    ]
    for k in range(lo, hi + 1):
        x = px(10.0 ** k)
        parts.append(f'<line x1="{x:.1f}" y1="{margin_t + ph}" x2="{x:.1f}" '
                     f'y2="{margin_t + ph + 5}" stroke="black"/>')
        parts.append(f'<text x="{x:.1f}" y="{margin_t + ph + 18}" '
                     f'text-anchor="middle">1e{k}</text>')
    for k in range(5):
        y = ymax * k / 4
        parts.append(f'<text x="{margin_l - 6}" y="{py(y) + 4:.1f}" '
                     f'text-anchor="end">{y:.2f}</text>')
    parts.append(f'<text x="{margin_l + pw / 2}" y="{height - 10}" '
                 'text-anchor="middle">query count</text>')
    parts.append(f'<text x="14" y="{margin_t + ph / 2}" text-anchor="middle" '
                 f'transform="rotate(-90 14 {margin_t + ph / 2})">relative SKR inefficiency</text>')
    for n, (name, pts) in enumerate(sorted(points.items())):
        colour = _PALETTE[n % len(_PALETTE)]
        for x, y in pts:
            parts.append(f'<circle cx="{px(x):.1f}" cy="{py(y):.1f}" r="2.5" '
                         f'fill="{colour}" fill-opacity="0.6"/>')
        ly = margin_t + 14 + 16 * n
        parts.append(f'<circle cx="{width - margin_r + 14}" cy="{ly - 4}" r="4" fill="{colour}"/>')
        parts.append(f'<text x="{width - margin_r + 24}" y="{ly}">{name}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
