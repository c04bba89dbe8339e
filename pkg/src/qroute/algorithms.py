"""Named pathfinding algorithms behind one call signature.

``find_path`` runs the standard preprocessing (s-t biconnected pruning, then
direction choice) before the selected algorithm, and always reports the
route oriented from the caller's source to the caller's destination.

Algorithm names accept an optional budget suffix: ``sa:100`` runs simulated
annealing for 100 steps, ``ga:50`` the genetic algorithm for 50 generations.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Callable, Optional

from qroute import befs_search as bs
from qroute.metaheuristics import GaConfig, SaConfig, genetic_algorithm, simulated_annealing
from qroute.netgraph import Direction, NetworkGraph, choose_direction, prune_to_st_biconnected
from qroute.skr_model import SkrEstimator

Runner = Callable[[NetworkGraph, int, int, SkrEstimator, "AlgorithmSpec", int], bs.SearchResult]


@dataclass(frozen=True)
class AlgorithmSpec:
    name: str
    budget: Optional[int] = None

    @classmethod
    def parse(cls, text: str) -> "AlgorithmSpec":
        name, _, budget = text.strip().partition(":")
        if name not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {name!r}; choose from {sorted(ALGORITHMS)}")
        if budget:
            if name not in ("sa", "ga"):
                raise ValueError(f"algorithm {name!r} takes no budget")
            value = int(budget)
            if value < 0:
                raise ValueError("budget must be >= 0")
            return cls(name, value)
        return cls(name)

    def __str__(self) -> str:
        return self.name if self.budget is None else f"{self.name}:{self.budget}"


def _befs(merit: str, bounding: bool) -> Runner:
    def run(g, s, t, est, spec, seed):
        return bs.befs(g, s, t, est, merit=merit, bounding=bounding)
    return run


def _sa(g, s, t, est, spec, seed, config: Optional[SaConfig] = None):
    config = config or SaConfig()
    changes = {"seed": seed}
    if spec.budget is not None:
        changes["n_steps"] = spec.budget
    return simulated_annealing(g, s, t, dataclasses.replace(config, **changes), est)


def _ga(g, s, t, est, spec, seed, config: Optional[GaConfig] = None):
    config = config or GaConfig()
    changes = {"seed": seed}
    if spec.budget is not None:
        changes["generations"] = spec.budget
    return genetic_algorithm(g, s, t, dataclasses.replace(config, **changes), est)


ALGORITHMS: dict[str, Runner] = {
    "enumeration": lambda g, s, t, est, spec, seed: bs.enumerate_best(g, s, t, est),
    "extended_dijkstra": lambda g, s, t, est, spec, seed: bs.extended_dijkstra(g, s, t, est),
    "befs_utility": _befs("utility", False),
    "befs_exact": _befs("exact", False),
    "befs_exact_bounded": _befs("exact", True),
    "befs_heuristic": _befs("heuristic", True),
    "befs_heuristic_plain": _befs("heuristic", False),
    "sa": _sa,
    "ga": _ga,
}


def find_path(
    g: NetworkGraph,
    s: int,
    t: int,
    algorithm: str | AlgorithmSpec,
    estimator: SkrEstimator,
    seed: int = 0,
    prune: bool = True,
    direction: Direction | str = Direction.MEAN,
    sa_config: Optional[SaConfig] = None,
    ga_config: Optional[GaConfig] = None,
) -> bs.SearchResult:
    """Preprocess and run one algorithm; ``queries`` covers the whole call."""
    spec = algorithm if isinstance(algorithm, AlgorithmSpec) else AlgorithmSpec.parse(algorithm)
    start = estimator.queries
    work = prune_to_st_biconnected(g, s, t) if prune else g
    src, dst = choose_direction(work, s, t, direction)
    runner = ALGORITHMS[spec.name]
    if spec.name == "sa":
        result = _sa(work, src, dst, estimator, spec, seed, sa_config)
    elif spec.name == "ga":
        result = _ga(work, src, dst, estimator, spec, seed, ga_config)
    else:
        result = runner(work, src, dst, estimator, spec, seed)
    route = result.route if src == s else result.route[::-1]
    extra = dict(result.extra)
    extra["reversed"] = src != s
    return bs.SearchResult(route, result.skr_hz, estimator.queries - start, extra)
