"""Simulated annealing and a genetic algorithm over simple s-t paths.

Both use the same neighbourhood: insert one repeater between two
consecutive path nodes, or drop one when its two neighbours are adjacent.
Defaults are the tuned values for a budget of about 500 queries.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from qroute.befs_search import SearchResult
from qroute.netgraph import NetworkGraph, Route, random_simple_path, shortest_path
from qroute.skr_model import SkrEstimator


@dataclass(frozen=True)
class LinearCooling:
    """``theta_i = theta0 * (1 - i / n)``."""

    theta0: float = 2.0

    def __post_init__(self) -> None:
        if not self.theta0 > 0:
            raise ValueError("theta0 must be > 0")

    def __call__(self, i: int, n: int) -> float:
        return self.theta0 * (1.0 - i / n)


@dataclass(frozen=True)
class ExponentialCooling:
    """``theta_i = theta0 * (theta_final / theta0) ** (i / n)``."""

    theta0: float = 2.0
    theta_final: float = 0.1

    def __post_init__(self) -> None:
        if not (self.theta0 > 0 and self.theta_final > 0):
            raise ValueError("temperatures must be > 0")

    def __call__(self, i: int, n: int) -> float:
        return self.theta0 * (self.theta_final / self.theta0) ** (i / n)


@dataclass(frozen=True)
class SaConfig:
    n_steps: int = 500
    length_penalty: float = 2.0
    schedule: Union[LinearCooling, ExponentialCooling] = field(default_factory=LinearCooling)
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_steps < 0:
            raise ValueError("n_steps must be >= 0")
        if self.length_penalty < 0:
            raise ValueError("length_penalty must be >= 0")


@dataclass(frozen=True)
class GaConfig:
    generations: int = 20
    population: int = 25
    selection_temperature: float = 0.5
    mutation_rate: float = 0.75
    seed: int = 0

    def __post_init__(self) -> None:
        if self.generations < 0:
            raise ValueError("generations must be >= 0")
        if self.population < 1:
            raise ValueError("population must be >= 1")
        if self.selection_temperature < 0:
            raise ValueError("selection_temperature must be >= 0")
        if not 0 <= self.mutation_rate <= 1:
            raise ValueError("mutation_rate must lie in [0, 1]")


# -- mutations -----------------------------------------------------------


def enumerate_mutations(g: NetworkGraph, p: Route) -> list[Route]:
    """All add-repeater and remove-repeater variants of ``p``, sorted."""
    on_path = set(p)
    out = set()
    for i in range(len(p) - 1):
        a, c = p[i], p[i + 1]
        nc = g.neighbors(c)
        for b in g.neighbors(a):
            if b not in on_path and b in nc:
                out.add(p[: i + 1] + (b,) + p[i + 1:])
    for i in range(1, len(p) - 1):
        if g.has_edge(p[i - 1], p[i + 1]):
            out.add(p[:i] + p[i + 1:])
    return sorted(out)


def random_mutation(g: NetworkGraph, p: Route, rng: np.random.Generator) -> Route:
    """Uniform draw from :func:`enumerate_mutations`; ``p`` if there is none."""
    options = enumerate_mutations(g, p)
    if not options:
        return p
    return options[int(rng.integers(len(options)))]


def penalized_skr(p: Route, g: NetworkGraph, estimator: SkrEstimator,
                  length_penalty: float) -> float:
    """Key rate, or ``-length_penalty * edges`` for zero-rate paths."""
    skr = estimator.skr(g.path_lengths(p))
    if skr > 0:
        return skr
    return -length_penalty * (len(p) - 1)


# -- simulated annealing -------------------------------------------------


def simulated_annealing(g: NetworkGraph, s: int, t: int, config: SaConfig,
                        estimator: SkrEstimator) -> SearchResult:
    """Anneal from the minimum-length path; return the final current path.

    The best path seen is reported under ``extra["best_seen"]``.
    """
    start = estimator.queries
    rng = np.random.default_rng(config.seed)
    current = shortest_path(g, s, t)
    value = penalized_skr(current, g, estimator, config.length_penalty)
    best = (value, current)
    n = config.n_steps
    for i in range(1, n + 1):
        cand = random_mutation(g, current, rng)
        cand_value = penalized_skr(cand, g, estimator, config.length_penalty)
        delta = cand_value - value
        theta = config.schedule(i, n)
        if delta >= 0:
            accept = True
        elif theta <= 0:
            accept = False
        else:
            accept = rng.random() < math.exp(delta / theta)
        if accept:
            current, value = cand, cand_value
        if value > best[0]:
            best = (value, current)
    return SearchResult(
        current,
        max(value, 0.0),
        estimator.queries - start,
        {"best_seen": best[1], "best_seen_skr": max(best[0], 0.0)},
    )


# -- genetic algorithm ---------------------------------------------------


def select_parent(population: Sequence[Route], skrs: Sequence[float], theta: float,
                  rng: np.random.Generator) -> Route:
    """Softmax draw with temperature ``theta``; argmax (uniform ties) at 0."""
    values = np.asarray(skrs, dtype=float)
    if theta == 0:
        top = np.flatnonzero(values == values.max())
        return population[int(top[rng.integers(len(top))])]
    weights = np.exp((values - values.max()) / theta)
    weights /= weights.sum()
    return population[int(rng.choice(len(population), p=weights))]


def remove_loops(route: Sequence[int]) -> Route:
    """Cut the stretch between repeated occurrences until the route is simple."""
    out: list[int] = []
    index: dict[int, int] = {}
    for v in route:
        if v in index:
            cut = index[v]
            for w in out[cut + 1:]:
                del index[w]
            del out[cut + 1:]
        else:
            index[v] = len(out)
            out.append(v)
    return tuple(out)


def enumerate_recombinations(g: NetworkGraph, p1: Route, p2: Route) -> list[Route]:
    """Children ``p1[..a] + p2[b..]`` for repeaters ``a`` of p1, ``b`` of p2.

    Requires the edge ``(a, b)``; loops are removed. Sorted and de-duplicated.
    """
    out = set()
    for i in range(1, len(p1) - 1):
        a = p1[i]
        nbrs = g.neighbors(a)
        for j in range(1, len(p2) - 1):
            if p2[j] in nbrs:
                out.add(remove_loops(p1[: i + 1] + p2[j:]))
    return sorted(out)


def _argmax(population: Sequence[Route], skrs: Sequence[float]) -> int:
    return min(range(len(population)),
               key=lambda k: (-skrs[k], len(population[k]), population[k]))


def genetic_algorithm(g: NetworkGraph, s: int, t: int, config: GaConfig,
                      estimator: SkrEstimator) -> SearchResult:
    """Evolve paths by softmax selection, recombination and mutation.

    Returns the best member of the final population; ``extra["best_seen"]``
    tracks the best path over all generations.
    """
    start = estimator.queries
    rng = np.random.default_rng(config.seed)
    population = [shortest_path(g, s, t)]
    for _ in range(config.population - 1):
        population.append(random_simple_path(g, s, t, rng))
    skrs = [estimator.skr(g.path_lengths(p)) for p in population]
    k = _argmax(population, skrs)
    best = (skrs[k], population[k])
    history = [best[0]]
    for _ in range(config.generations):
        children, child_skrs = [], []
        for _ in range(config.population):
            p1 = select_parent(population, skrs, config.selection_temperature, rng)
            p2 = select_parent(population, skrs, config.selection_temperature, rng)
            options = enumerate_recombinations(g, p1, p2)
            child = options[int(rng.integers(len(options)))] if options else p1
            if rng.random() < config.mutation_rate:
                child = random_mutation(g, child, rng)
            children.append(child)
            child_skrs.append(estimator.skr(g.path_lengths(child)))
        population, skrs = children, child_skrs
        k = _argmax(population, skrs)
        if skrs[k] > best[0]:
            best = (skrs[k], population[k])
        history.append(best[0])
    k = _argmax(population, skrs)
    return SearchResult(
        population[k],
        skrs[k],
        estimator.queries - start,
        {"best_seen": best[1], "best_seen_skr": best[0], "best_history": history},
    )
