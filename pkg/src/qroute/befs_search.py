"""Best-first search over the path tree, plus the two classical baselines.

All searches share one convention: a merit function maps a route (a tuple
of node ids starting at the source) to a score in Hz, and the route that is
popped first among full paths is returned. Routes whose merit is exactly 0
without reaching the destination are retired: no completion of them can
have a positive key rate, so they are never expanded. When only zero-rate
paths exist, the fewest-hop path is returned.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from qroute.netgraph import (
    UNREACHABLE,
    NetworkGraph,
    NoPathError,
    Route,
    connected,
    fewest_hops_path,
    iter_simple_paths,
)
from qroute.skr_model import SkrEstimator, link_limit

SENTINEL = math.inf
# Only used when perfect links leave the number of suffix segments unbounded.
MAX_SUFFIX_SEGMENTS = 1024

MeritFn = Callable[[Route], float]


@dataclass
class SearchResult:
    """Outcome of one pathfinding run.

    ``skr_hz`` is the utility the algorithm itself measured for ``route``
    (matched-seed, so re-estimating the route gives the same number).
    """

    route: Route
    skr_hz: float
    queries: int = 0
    extra: dict = field(default_factory=dict)


def expand(g: NetworkGraph, p: Route) -> list[Route]:
    """One-edge extensions of ``p`` to neighbors it does not visit yet."""
    return [p + (v,) for v in g.neighbors(p[-1]) if v not in p]


def _queue_key(merit: float, route: Route) -> tuple:
    return (-merit, len(route) - 1, route)


# -- merit functions -----------------------------------------------------


def merit_utility(p: Route, g: NetworkGraph, t: int, estimator: SkrEstimator) -> float:
    """Key rate of the prefix as a standalone chain; the root scores +inf."""
    if len(p) < 2:
        return SENTINEL
    return estimator.skr(g.path_lengths(p))


def merit_exact(p: Route, g: NetworkGraph, t: int, estimator: SkrEstimator) -> float:
    """Admissible merit: best perfect-memory homogeneous completion.

    Every count ``N`` of equal suffix segments spanning the graph distance to
    ``t`` that keeps the total link count below the threshold is evaluated,
    with perfect memories at the prefix end and beyond.

    Raises:
        ValueError: for perfect link fidelity (no finite link limit).
    """
    if len(p) < 2:
        return SENTINEL
    if p[-1] == t:
        return estimator.skr(g.path_lengths(p))
    if estimator.params.fidelity >= 1.0:
        raise ValueError("the exact merit is not applicable for fidelity 1")
    d = g.distances_to(t)[p[-1]]
    if d == UNREACHABLE:
        return 0.0
    prefix = g.path_lengths(p)
    edges = len(prefix)
    top = math.floor(link_limit(estimator.params.fidelity) - edges)
    best = 0.0
    for n in range(1, top + 1):
        lengths = prefix + (d / n,) * n
        flags = (False,) * (edges - 1) + (True,) * n
        best = max(best, estimator.skr(lengths, flags))
    return best


def unimodal_peak_search(bound: Callable[[int], float]) -> float:
    """Maximum of a unimodal function on the positive integers.

    Windowed exponential search: slide the window ``(a, b, c)`` up by
    doubling while the top keeps improving, then shrink it around the peak.
    Values are memoized, so each argument is evaluated at most once. On a
    function that is not unimodal the result is some local peak.
    """
    memo: dict[int, float] = {}

    def f(n: int) -> float:
        if n not in memo:
            memo[n] = bound(n)
        return memo[n]

    a, b, c = 1, 2, 4
    if f(a) >= f(b):
        return f(a)
    while f(c) > f(b):
        a, b, c = b, c, 2 * c
    while a + 1 != b or b + 1 != c:
        if c - b > b - a:
            d = (b + c) // 2
            if f(d) > f(b):
                a, b, c = b, d, c
            else:
                a, b, c = a, b, d
        else:
            d = (a + b) // 2
            if f(d) > f(b):
                a, b, c = a, d, b
            else:
                a, b, c = d, b, c
    return f(b)


def merit_heuristic(p: Route, g: NetworkGraph, t: int, estimator: SkrEstimator) -> float:
    """Homogeneous completion with realistic memories, peak-searched over N."""
    if len(p) < 2:
        return SENTINEL
    if p[-1] == t:
        return estimator.skr(g.path_lengths(p))
    d = g.distances_to(t)[p[-1]]
    if d == UNREACHABLE:
        return 0.0
    prefix = g.path_lengths(p)
    limit = link_limit(estimator.params.fidelity)
    cap = MAX_SUFFIX_SEGMENTS if math.isinf(limit) else math.inf

    def bound(n: int) -> float:
        if len(prefix) + n >= limit or n > cap:
            return 0.0
        return estimator.skr(prefix + (d / n,) * n)

    return unimodal_peak_search(bound)


MERITS = {
    "utility": merit_utility,
    "exact": merit_exact,
    "heuristic": merit_heuristic,
}


def make_merit(kind: str, g: NetworkGraph, t: int, estimator: SkrEstimator) -> MeritFn:
    fn = MERITS[kind]
    return lambda p: fn(p, g, t, estimator)


# -- dominance -----------------------------------------------------------


def dominates(p: Sequence[float], q: Sequence[float]) -> bool:
    """Order-preserving injection of ``p`` into ``q`` with ``p[i] <= q[j]``.

    Greedy: match each length of ``p`` to the earliest remaining length of
    ``q`` that is at least as long. Identical tuples dominate each other;
    excluding a path from dominating itself is up to the caller.
    """
    if len(p) > len(q):
        return False
    j, nq = 0, len(q)
    for x in p:
        while j < nq and q[j] < x:
            j += 1
        if j == nq:
            return False
        j += 1
    return True


def merit_dominates(p: Route, q: Route, g: NetworkGraph, t: int) -> bool:
    """Length dominance plus "at least as close to ``t``".

    Two distinct routes with identical length tuples and equal distances are
    ordered by their node-id sequences, so exactly one dominates the other.
    """
    if p == q:
        return False
    dist = g.distances_to(t)
    dp, dq = dist[p[-1]], dist[q[-1]]
    if dp > dq:
        return False
    lp, lq = g.path_lengths(p), g.path_lengths(q)
    if not dominates(lp, lq):
        return False
    if lp == lq and dp == dq:
        return p < q
    return True


# -- searches ------------------------------------------------------------


def _zero_rate_result(g: NetworkGraph, s: int, t: int, estimator: Optional[SkrEstimator]):
    route = fewest_hops_path(g, s, t)
    skr = estimator.skr(g.path_lengths(route)) if estimator is not None else 0.0
    return route, skr


def _check_endpoints(g: NetworkGraph, s: int, t: int) -> None:
    if s == t:
        raise ValueError("source and destination must differ")
    if not connected(g, s, t):
        raise NoPathError(f"no path between {s} and {t}")


def best_first_search(
    g: NetworkGraph,
    s: int,
    t: int,
    merit_fn: MeritFn,
    estimator: Optional[SkrEstimator] = None,
) -> SearchResult:
    """Plain best-first search on the path tree.

    ``estimator`` is only needed to score the fallback path when every
    completion was retired with zero merit; its counter also fills
    ``SearchResult.queries``.
    """
    _check_endpoints(g, s, t)
    start = estimator.queries if estimator is not None else 0
    root = (s,)
    heap = [_queue_key(merit_fn(root), root)]
    pops = 0
    while heap:
        neg, _, p = heapq.heappop(heap)
        pops += 1
        if p[-1] == t:
            return _result(p, -neg, estimator, start, pops=pops)
        for child in expand(g, p):
            m = merit_fn(child)
            if m > 0 or child[-1] == t:
                heapq.heappush(heap, _queue_key(m, child))
    route, skr = _zero_rate_result(g, s, t, estimator)
    return _result(route, skr, estimator, start, pops=pops, fallback=True)


def _result(route, skr, estimator, start, **extra) -> SearchResult:
    queries = estimator.queries - start if estimator is not None else 0
    return SearchResult(route, skr, queries, extra)


_TOP_K = 6


class DominancePoset:
    """Pending prefixes with the domination relations among them.

    A vectorized prefilter on necessary conditions limits the exact
    injection test to plausible pairs: if ``p`` dominates ``q`` then ``p`` is
    no farther from ``t``, has no more edges, and its k-th longest edge is no
    longer than the k-th longest edge of ``q``.
    """

    def __init__(self, g: NetworkGraph, t: int) -> None:
        self.g = g
        self.t = t
        self.dist = g.distances_to(t)
        self.lengths: dict[Route, tuple[float, ...]] = {}
        self.dominators: dict[Route, set[Route]] = {}
        self.dominated: dict[Route, set[Route]] = {}
        self.checks = 0
        self._slot: dict[Route, int] = {}
        self._routes: list[Route] = []
        self._stats = np.empty((16, 2 + _TOP_K))
        self._alive = np.zeros(16, dtype=bool)

    def __contains__(self, r: Route) -> bool:
        return r in self.lengths

    def __len__(self) -> int:
        return len(self.lengths)

    def is_maximal(self, r: Route) -> bool:
        return not self.dominators[r]

    def _dominates(self, p: Route, lp, dp, q: Route, lq, dq) -> bool:
        if dp > dq or len(lp) > len(lq):
            return False
        if not dominates(lp, lq):
            return False
        if lp == lq and dp == dq:
            return p < q
        return True

    def add(self, r: Route) -> None:
        if r in self.lengths:
            return
        lr = self.g.path_lengths(r)
        dr = self.dist[r[-1]]
        top = sorted(lr, reverse=True)[:_TOP_K]
        stats = (dr, len(lr), *top, *(0.0,) * (_TOP_K - len(top)))
        n = len(self._routes)
        if n == len(self._alive):
            self._stats = np.concatenate([self._stats, np.empty_like(self._stats)])
            self._alive = np.concatenate([self._alive, np.zeros_like(self._alive)])
        live = self._alive[:n]
        block = self._stats[:n]
        ge = np.all(block >= stats, axis=1) & live
        le = np.all(block <= stats, axis=1) & live
        self.lengths[r] = lr
        self.dominators[r] = set()
        self.dominated[r] = set()
        for k in np.flatnonzero(ge | le):
            o = self._routes[k]
            lo = self.lengths[o]
            do = self.dist[o[-1]]
            self.checks += 1
            if ge[k] and self._dominates(r, lr, dr, o, lo, do):
                self.dominated[r].add(o)
                self.dominators[o].add(r)
            elif le[k] and self._dominates(o, lo, do, r, lr, dr):
                self.dominated[o].add(r)
                self.dominators[r].add(o)
        self._slot[r] = n
        self._routes.append(r)
        self._stats[n] = stats
        self._alive[n] = True

    def remove(self, r: Route) -> list[Route]:
        """Drop ``r``; return the routes that became maximal as a result."""
        freed = []
        for o in self.dominated.pop(r):
            doms = self.dominators[o]
            doms.discard(r)
            if not doms:
                freed.append(o)
        for o in self.dominators.pop(r):
            self.dominated[o].discard(r)
        del self.lengths[r]
        self._alive[self._slot.pop(r)] = False
        return freed


def prefix_bounding_search(
    g: NetworkGraph,
    s: int,
    t: int,
    merit_fn: MeritFn,
    estimator: Optional[SkrEstimator] = None,
) -> SearchResult:
    """Best-first search that defers merit evaluation of dominated prefixes.

    Pending prefixes live in a :class:`DominancePoset`; only maximal ones
    (dominated by no other pending route) get a merit and enter the queue.
    A retired zero-merit prefix stays in the poset, still deferring what it
    dominates, exactly as it would while sitting at the bottom of the queue.
    """
    _check_endpoints(g, s, t)
    start = estimator.queries if estimator is not None else 0
    root = (s,)
    poset = DominancePoset(g, t)
    poset.add(root)
    queued = {root}
    heap = [_queue_key(merit_fn(root), root)]
    pops = 0
    while heap:
        neg, _, p = heapq.heappop(heap)
        pops += 1
        queued.discard(p)
        freed = poset.remove(p)
        if p[-1] == t:
            return _result(p, -neg, estimator, start, pops=pops, checks=poset.checks)
        children = expand(g, p)
        for child in children:
            poset.add(child)
        seen: set[Route] = set()
        for r in (*freed, *children):
            if r in seen or r in queued or r not in poset or not poset.is_maximal(r):
                continue
            seen.add(r)
            m = merit_fn(r)
            if m > 0 or r[-1] == t:
                heapq.heappush(heap, _queue_key(m, r))
                queued.add(r)
            else:
                # retired: counts as evaluated, never popped
                queued.add(r)
    route, skr = _zero_rate_result(g, s, t, estimator)
    return _result(route, skr, estimator, start, pops=pops, checks=poset.checks,
                   fallback=True)


def extended_dijkstra(g: NetworkGraph, s: int, t: int, estimator: SkrEstimator) -> SearchResult:
    """Node-settling search that keeps only the best prefix per node.

    Optimal when the utility is monotonic and isotonic; on key rates it can
    discard the prefix whose extension would have been best.
    """
    _check_endpoints(g, s, t)
    start = estimator.queries
    best: dict[int, tuple[float, Route]] = {s: (SENTINEL, (s,))}
    settled: set[int] = set()
    heap = [_queue_key(SENTINEL, (s,))]
    while heap:
        neg, _, route = heapq.heappop(heap)
        v = route[-1]
        if v in settled or best[v][1] != route:
            continue
        settled.add(v)
        if v == t:
            return SearchResult(route, -neg, estimator.queries - start)
        for w in g.neighbors(v):
            if w in settled or w in route:
                continue
            cand = route + (w,)
            u = estimator.skr(g.path_lengths(cand))
            if w not in best or u > best[w][0]:
                best[w] = (u, cand)
                heapq.heappush(heap, _queue_key(u, cand))
    raise NoPathError(f"no path between {s} and {t}")


def enumerate_best(g: NetworkGraph, s: int, t: int, estimator: SkrEstimator) -> SearchResult:
    """Evaluate every simple path; ties go to fewer edges, then smaller ids."""
    _check_endpoints(g, s, t)
    start = estimator.queries
    best: Optional[tuple] = None
    n_paths = 0
    for route in iter_simple_paths(g, s, t):
        n_paths += 1
        u = estimator.skr(g.path_lengths(route))
        key = (-u, len(route), route)
        if best is None or key < best:
            best = key
    assert best is not None
    return SearchResult(best[2], -best[0], estimator.queries - start, {"paths": n_paths})


def befs(g: NetworkGraph, s: int, t: int, estimator: SkrEstimator,
         merit: str = "heuristic", bounding: bool = True) -> SearchResult:
    """Best-first search with a named merit, optionally with prefix bounding."""
    fn = make_merit(merit, g, t, estimator)
    search = prefix_bounding_search if bounding else best_first_search
    return search(g, s, t, fn, estimator)


def full_extensions(g: NetworkGraph, p: Route, t: int) -> Iterable[Route]:
    """Every full path that starts with prefix ``p`` (for brute-force checks)."""
    used = set(p)
    path = list(p)

    def rec():
        u = path[-1]
        if u == t:
            yield tuple(path)
            return
        for v in g.neighbors(u):
            if v in used:
                continue
            used.add(v)
            path.append(v)
            yield from rec()
            path.pop()
            used.discard(v)

    yield from rec()
