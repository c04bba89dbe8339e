"""Command-line interface: ``gen``, ``find``, ``bench`` and ``scan``.

Exit codes: 0 on success, 2 on bad arguments, 1 on runtime failure.
"""

from __future__ import annotations

import argparse
import io
import json
import logging
import math
import sys
from pathlib import Path
from typing import Optional, Sequence

from qroute import bench
from qroute.algorithms import ALGORITHMS, AlgorithmSpec, find_path
from qroute.netgraph import Direction, GraphGenConfig, NetworkGraph, waxman_generate
from qroute.skr_model import DEFAULT_SAMPLES, PhysicalParams, SkrEstimator

log = logging.getLogger("qroute")


class _BadArguments(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # raise instead of exiting
        self.print_usage(sys.stderr)
        raise _BadArguments(message)


def _float(text: str) -> float:
    value = float(text)
    if math.isnan(value):
        raise argparse.ArgumentTypeError("NaN is not allowed")
    return value


def _int_list(text: str) -> list[int]:
    return [int(v) for v in text.replace(",", " ").split()]


def _float_list(text: str) -> list[float]:
    return [_float(v) for v in text.replace(",", " ").split()]


def _add_common(p: argparse.ArgumentParser, top: bool) -> None:
    # Subcommand copies default to SUPPRESS so flags given before the
    # subcommand are not overwritten.
    d = (lambda v: v) if top else (lambda v: argparse.SUPPRESS)
    p.add_argument("--fidelity", type=_float, default=d(0.96),
                   help="link fidelity F (default 0.96)")
    p.add_argument("--coherence-time", type=_float, default=d(10.0),
                   help="memory coherence time in seconds; 'inf' for perfect memory (default 10)")
    p.add_argument("--samples", type=int, default=d(DEFAULT_SAMPLES),
                   help="Monte-Carlo samples per query (default 10000)")
    p.add_argument("--seed", type=int, default=d(0), help="master seed (default 0)")
    p.add_argument("--no-prune", action="store_true", default=d(False),
                   help="skip s-t biconnected pruning")
    p.add_argument("--direction", choices=[x.value for x in Direction], default=d("mean"),
                   help="search direction rule (default mean)")
    p.add_argument("--algorithm", default=d(None),
                   help="algorithm name; comma-separated list for bench. "
                        f"Known: {', '.join(sorted(ALGORITHMS))}; sa/ga accept ':budget'")
    p.add_argument("--out", default=d(None), help="output file (default stdout)")
    p.add_argument("-v", "--verbose", action="store_true", default=d(False))


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="qroute", description="Secret-key-rate routing in repeater networks.")
    _add_common(parser, top=True)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    gen = sub.add_parser("gen", help="write a random Waxman graph as JSON")
    _add_common(gen, top=False)
    gen.add_argument("--repeaters", type=int, default=25)
    gen.add_argument("--alpha", type=_float, default=0.5, help="Waxman alpha")
    gen.add_argument("--beta", type=_float, default=0.9, help="Waxman beta")
    gen.add_argument("--scale", type=_float, default=300.0, help="Waxman length scale (km)")
    gen.add_argument("--side", type=_float, default=300.0, help="square side (km)")

    find = sub.add_parser("find", help="run one algorithm on one graph, print JSON")
    _add_common(find, top=False)
    find.add_argument("graph", help="graph JSON file")
    find.add_argument("--source", type=int, default=None)
    find.add_argument("--target", type=int, default=None)

    bn = sub.add_parser("bench", help="run a benchmark suite, write CSV")
    _add_common(bn, top=False)
    bn.add_argument("--repeaters", type=_int_list, default=[25],
                    help="comma-separated repeater counts (default 25)")
    bn.add_argument("--graphs", type=int, default=10, help="graphs per repeater count")
    bn.add_argument("--workers", type=int, default=1)
    bn.add_argument("--svg", default=None, help="also write a query/inefficiency scatter")
    bn.add_argument("--connected-only", action="store_true",
                    help="redraw graphs whose end nodes are disconnected")
    bn.add_argument("--no-timing", action="store_true",
                    help="write 0 wall times for byte-reproducible output")

    sc = sub.add_parser("scan", help="isotonicity witnesses and Dijkstra grid, write CSV")
    _add_common(sc, top=False)
    sc.add_argument("--graphs", type=int, default=100, help="graphs for the witness search")
    sc.add_argument("--repeaters", type=int, default=8, help="repeaters per witness graph")
    sc.add_argument("--max-edges", type=int, default=2, help="longest prefix considered")
    sc.add_argument("--max-witnesses", type=int, default=5)
    sc.add_argument("--grid-fidelity", type=_float_list, default=[],
                    help="comma-separated fidelities for the grid")
    sc.add_argument("--grid-coherence", type=_float_list, default=[],
                    help="comma-separated coherence times for the grid")
    sc.add_argument("--grid-graphs", type=int, default=20)
    sc.add_argument("--grid-repeaters", type=int, default=25)
    return parser


def _params(args) -> PhysicalParams:
    return PhysicalParams(args.fidelity, args.coherence_time)


def _write_text(text: str, out: Optional[str]) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text, encoding="utf-8")


def _prepare(args):
    """Validate arguments; returns a zero-argument callable doing the work."""
    params = _params(args)
    if args.samples < 1:
        raise ValueError("--samples must be >= 1")
    direction = Direction(args.direction)

    if args.command == "gen":
        cfg = GraphGenConfig(args.repeaters, args.alpha, args.beta, args.scale,
                             args.side, args.seed)

        def run() -> None:
            g = waxman_generate(cfg)
            _write_text(json.dumps(g.to_dict(), indent=2) + "\n", args.out)
        return run

    if args.command == "find":
        spec = AlgorithmSpec.parse(args.algorithm or "befs_heuristic")

        def run() -> None:
            g = NetworkGraph.from_json(Path(args.graph))
            s0, t0 = g.end_nodes
            s = s0 if args.source is None else args.source
            t = t0 if args.target is None else args.target
            est = SkrEstimator(params, args.samples, seed=args.seed)
            res = find_path(g, s, t, spec, est, seed=args.seed, prune=not args.no_prune,
                            direction=direction)
            payload = {
                "algorithm": str(spec),
                "route": list(res.route),
                "skr_hz": res.skr_hz,
                "queries": res.queries,
            }
            _write_text(json.dumps(payload) + "\n", args.out)
        return run

    if args.command == "bench":
        text = "befs_heuristic" if args.algorithm is None else args.algorithm
        names = [n.strip() for n in text.split(",") if n.strip()]
        config = bench.SuiteConfig(
            repeater_counts=tuple(args.repeaters), graphs_per_count=args.graphs,
            params=params, algorithms=tuple(names), samples=args.samples,
            master_seed=args.seed, prune=not args.no_prune, direction=direction,
            record_timing=not args.no_timing, workers=args.workers,
            connected_only=args.connected_only,
        )

        def run() -> None:
            records = bench.run_suite(config)
            _write_text(bench.records_to_csv(records), args.out)
            if args.svg:
                Path(args.svg).write_text(bench.scatter_svg(records), encoding="utf-8")
            failed = [r for r in records if not r.ok]
            if failed:
                log.warning("%d of %d runs failed", len(failed), len(records))
        return run

    if args.command == "scan":
        cfg = bench.IsotonicityConfig(
            fidelity=params.fidelity, coherence_time=params.coherence_time,
            n_graphs=args.graphs, n_repeaters=args.repeaters,
            max_prefix_edges=args.max_edges, max_witnesses=args.max_witnesses,
            grid_fidelities=tuple(args.grid_fidelity),
            grid_coherence_times=tuple(args.grid_coherence),
            grid_graphs=args.grid_graphs, grid_repeaters=args.grid_repeaters,
            samples=args.samples, master_seed=args.seed,
        )

        def run() -> None:
            buf = io.StringIO()
            bench.write_scan_csv(bench.isotonicity_scan(cfg), buf)
            _write_text(buf.getvalue(), args.out)
        return run

    raise ValueError(f"unknown command {args.command!r}")


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(message)s")
        run = _prepare(args)
    except _BadArguments as exc:
        print(f"qroute: error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, TypeError) as exc:
        print(f"qroute: error: {exc}", file=sys.stderr)
        return 2
    try:
        run()
    except Exception as exc:
        print(f"qroute: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
