from __future__ import annotations

import math
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import make_graph
from qroute.metaheuristics import (
    ExponentialCooling,
    GaConfig,
    LinearCooling,
    SaConfig,
    enumerate_mutations,
    enumerate_recombinations,
    genetic_algorithm,
    penalized_skr,
    random_mutation,
    remove_loops,
    select_parent,
    simulated_annealing,
)
from qroute.netgraph import (
    GraphGenConfig,
    connected,
    prune_to_st_biconnected,
    random_simple_path,
    waxman_generate,
)
from qroute.skr_model import PhysicalParams, SkrEstimator

P96 = PhysicalParams(0.96, 10.0)


@pytest.fixture
def chain_graph():
    return make_graph({0: (0, 0), 1: (60, 0), 2: (30, 0)}, [(0, 2, None), (2, 1, None)])


def random_graph(seed, n=10):
    g = waxman_generate(GraphGenConfig(n_repeaters=n, seed=seed))
    return prune_to_st_biconnected(g, 0, 1) if connected(g, 0, 1) else None


# -- mutations -----------------------------------------------------------


def test_mutation_examples(triangle, chain_graph):
    assert enumerate_mutations(triangle, (0, 1)) == [(0, 2, 1)]
    assert enumerate_mutations(triangle, (0, 2, 1)) == [(0, 1)]
    assert enumerate_mutations(chain_graph, (0, 2, 1)) == []


def test_random_mutation_edge_cases(triangle, chain_graph):
    rng = np.random.default_rng(0)
    assert random_mutation(chain_graph, (0, 2, 1), rng) == (0, 2, 1)
    assert all(random_mutation(triangle, (0, 1), rng) == (0, 2, 1) for _ in range(20))


def test_random_mutation_is_uniform():
    # square 0-2-1, 0-3-1 with chords 0-1 and 2-3: four mutations of (0, 2, 1)
    g = make_graph({0: (0, 0), 1: (10, 10), 2: (10, 0), 3: (0, 10), 4: (5, -5)},
                   [(0, 2, None), (2, 1, None), (0, 3, None), (3, 1, None), (0, 1, None),
                    (2, 3, None), (0, 4, None), (4, 2, None)])
    options = enumerate_mutations(g, (0, 2, 1))
    assert len(options) == 4
    rng = np.random.default_rng(1)
    n = 10_000
    counts = Counter(random_mutation(g, (0, 2, 1), rng) for _ in range(n))
    se = math.sqrt(0.25 * 0.75 / n)
    for o in options:
        assert abs(counts[o] / n - 0.25) < 3 * se


@given(st.integers(0, 2**32))
def test_mutations_are_simple_and_reversible(seed):
    g = random_graph(seed)
    if g is None:
        return
    rng = np.random.default_rng(seed)
    p = random_simple_path(g, 0, 1, rng)
    for q in enumerate_mutations(g, p):
        assert g.is_simple_path(q, 0, 1)
        if len(q) > len(p):
            assert p in enumerate_mutations(g, q)


def test_penalized_skr(triangle):
    est = SkrEstimator(P96)
    assert penalized_skr((0, 2, 1), triangle, est, 2.0) == est.skr((30.0, 30.0))
    far = make_graph({i: (200 * i, 0) for i in range(6)},
                     [(0, 2, None), (2, 3, None), (3, 4, None), (4, 5, None), (5, 1, None)])
    zero = SkrEstimator(PhysicalParams(0.94, 10.0))
    assert penalized_skr((0, 2, 3, 4, 5, 1), far, zero, 2.0) == -10.0
    assert penalized_skr((0, 2, 3, 4, 5, 1), far, zero, 0.0) == 0.0


# -- simulated annealing -------------------------------------------------


def test_cooling_schedules():
    lin = LinearCooling(2.0)
    assert lin(0, 10) == 2.0 and lin(10, 10) == 0.0 and lin(5, 10) == 1.0
    exp = ExponentialCooling(2.0, 0.1)
    assert exp(0, 10) == pytest.approx(2.0) and exp(10, 10) == pytest.approx(0.1)
    with pytest.raises(ValueError):
        LinearCooling(0.0)


def test_sa_zero_steps_returns_shortest(triangle):
    g = make_graph({0: (0, 0), 1: (60, 0), 2: (30, 1)}, [(0, 1, 60.0), (0, 2, 29.0), (2, 1, 30.0)])
    est = SkrEstimator(P96)
    res = simulated_annealing(g, 0, 1, SaConfig(n_steps=0), est)
    assert res.route == (0, 2, 1) and res.queries == 1


def test_sa_single_path(chain_graph):
    for seed in range(5):
        res = simulated_annealing(chain_graph, 0, 1, SaConfig(n_steps=20, seed=seed),
                                  SkrEstimator(P96))
        assert res.route == (0, 2, 1)


def test_sa_finds_triangle_optimum(triangle):
    est = SkrEstimator(P96)
    hits = sum(simulated_annealing(triangle, 0, 1, SaConfig(seed=s), est).route == (0, 2, 1)
               for s in range(200))
    assert hits >= 190


def test_sa_query_accounting():
    g = random_graph(3, 12)
    est = SkrEstimator(P96, n_samples=1000)
    res = simulated_annealing(g, 0, 1, SaConfig(n_steps=37), est.fork())
    assert res.queries == 38


class _Greedy:
    def __call__(self, i, n):
        return 0.0


@given(st.integers(0, 2**32))
def test_sa_at_zero_temperature_never_accepts_worse(seed):
    g = random_graph(seed, 8)
    if g is None:
        return
    est = SkrEstimator(P96, n_samples=500)
    cfg = SaConfig(n_steps=30, schedule=_Greedy(), seed=seed)
    start = penalized_skr(simulated_annealing(g, 0, 1, SaConfig(n_steps=0), est).route,
                          g, est, cfg.length_penalty)
    res = simulated_annealing(g, 0, 1, cfg, est)
    assert penalized_skr(res.route, g, est, cfg.length_penalty) >= start
    assert g.is_simple_path(res.route, 0, 1)


# -- genetic algorithm ---------------------------------------------------


def test_softmax_selection_probabilities():
    rng = np.random.default_rng(7)
    pop = [(0, 1), (0, 2, 1)]
    n = 100_000
    hits = sum(select_parent(pop, [1.0, 2.0], 1.0, rng) == (0, 2, 1) for _ in range(n))
    p = math.exp(2) / (math.exp(1) + math.exp(2))
    assert p == pytest.approx(0.7311, abs=1e-4)
    assert abs(hits / n - p) < 3 * math.sqrt(p * (1 - p) / n)


def test_selection_edge_cases():
    rng = np.random.default_rng(0)
    pop = [(0, 1), (0, 2, 1), (0, 3, 1)]
    assert all(select_parent(pop, [1.0, 5.0, 2.0], 0.0, rng) == (0, 2, 1) for _ in range(50))
    counts = Counter(select_parent(pop, [3.0, 3.0, 3.0], 0.5, rng) for _ in range(30_000))
    assert all(abs(c / 30_000 - 1 / 3) < 0.015 for c in counts.values())
    # huge rates must not overflow
    assert select_parent(pop, [1e6, 1e6 + 1, 0.0], 0.5, rng) in pop


def test_recombination_examples():
    single = make_graph({0: (0, 0), 1: (1, 0)}, [(0, 1, None)])
    assert enumerate_recombinations(single, (0, 1), (0, 1)) == []
    g = make_graph({0: (0, 0), 1: (20, 0), 2: (10, 5), 3: (10, -5)},
                   [(0, 2, None), (2, 1, None), (0, 3, None), (3, 1, None), (2, 3, None)])
    assert (0, 2, 3, 1) in enumerate_recombinations(g, (0, 2, 1), (0, 3, 1))


def test_loop_removal():
    assert remove_loops((0, 5, 6, 7, 5, 1)) == (0, 5, 1)
    assert remove_loops((0, 2, 3, 2, 4, 3, 1)) == (0, 2, 4, 3, 1)
    assert remove_loops((0, 1)) == (0, 1)


@given(st.integers(0, 2**32))
def test_recombinations_are_simple(seed):
    g = random_graph(seed)
    if g is None:
        return
    rng = np.random.default_rng(seed)
    p1, p2 = random_simple_path(g, 0, 1, rng), random_simple_path(g, 0, 1, rng)
    for c in enumerate_recombinations(g, p1, p2):
        assert g.is_simple_path(c, 0, 1)


def test_ga_trivial_configs(chain_graph, triangle):
    est = SkrEstimator(P96)
    res = genetic_algorithm(triangle, 0, 1, GaConfig(generations=0, population=1), est)
    assert res.route == (0, 1) or res.route == (0, 2, 1)
    assert res.queries == 1
    res = genetic_algorithm(chain_graph, 0, 1, GaConfig(generations=3), SkrEstimator(P96))
    assert res.route == (0, 2, 1)


def test_ga_finds_triangle_optimum(triangle):
    est = SkrEstimator(P96)
    hits = sum(genetic_algorithm(triangle, 0, 1, GaConfig(seed=s), est).route == (0, 2, 1)
               for s in range(200))
    assert hits >= 190


def test_ga_query_accounting_and_history():
    g = random_graph(5, 12)
    est = SkrEstimator(P96, n_samples=1000)
    cfg = GaConfig(generations=4, population=7, seed=2)
    res = genetic_algorithm(g, 0, 1, cfg, est.fork())
    assert res.queries == 7 * 5
    hist = res.extra["best_history"]
    assert all(b >= a for a, b in zip(hist, hist[1:]))
    assert g.is_simple_path(res.route, 0, 1)


def test_config_validation():
    with pytest.raises(ValueError):
        SaConfig(n_steps=-1)
    with pytest.raises(ValueError):
        GaConfig(population=0)
    with pytest.raises(ValueError):
        GaConfig(mutation_rate=1.5)
