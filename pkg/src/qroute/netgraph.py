"""Network graphs: representation, Waxman generation, pruning, geometry.

Node ids are dense integers. Generated graphs put the two end nodes at ids
0 and 1 and the repeaters after them.
"""

from __future__ import annotations

import enum
import heapq
import json
import math
import os
import statistics
from collections import deque
from dataclasses import dataclass
from types import MappingProxyType
from typing import Iterable, Iterator, Mapping, Optional, Sequence, Union

import numpy as np

Route = tuple[int, ...]
UNREACHABLE = math.inf


class NoPathError(Exception):
    """Raised when the two requested nodes are not connected."""


class DegenerateEndpointsError(ValueError):
    """Raised when source and destination share a position."""


class NodeKind(enum.Enum):
    END = "end"
    REPEATER = "repeater"


class Direction(enum.Enum):
    MEAN = "mean"
    MEDIAN = "median"
    NONE = "none"


@dataclass(frozen=True)
class NetworkNode:
    id: int
    x: float
    y: float
    kind: NodeKind = NodeKind.REPEATER

    @property
    def position(self) -> tuple[float, float]:
        return (self.x, self.y)


@dataclass(frozen=True)
class GraphGenConfig:
    """Waxman RG1 generator settings.

    ``waxman_alpha``, ``waxman_beta`` and ``waxman_scale`` (km) enter the
    edge probability ``beta * exp(-d / (scale * alpha))``. Repeaters are
    placed uniformly in a ``side`` x ``side`` km square.
    """

    n_repeaters: int = 25
    waxman_alpha: float = 0.5
    waxman_beta: float = 0.9
    waxman_scale: float = 300.0
    side: float = 300.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_repeaters < 0:
            raise ValueError("n_repeaters must be >= 0")
        if not self.waxman_alpha > 0:
            raise ValueError("waxman_alpha must be > 0")
        if not 0 <= self.waxman_beta <= 1:
            raise ValueError("waxman_beta must lie in [0, 1]")
        if not self.waxman_scale > 0:
            raise ValueError("waxman_scale must be > 0")
        if not self.side > 0:
            raise ValueError("side must be > 0")


def _key(u: int, v: int) -> tuple[int, int]:
    return (u, v) if u < v else (v, u)


class NetworkGraph:
    """Immutable undirected graph with node coordinates and edge lengths (km).

    Args:
        nodes: Nodes with ids ``0 .. len(nodes) - 1`` (any order).
        edges: Mapping from unordered id pairs to lengths.
    """

    __slots__ = ("_nodes", "_edges", "_adj", "_dist_cache")

    def __init__(
        self,
        nodes: Iterable[NetworkNode],
        edges: Union[Mapping[tuple[int, int], float], Iterable[tuple[int, int, float]]],
    ) -> None:
        ordered = sorted(nodes, key=lambda n: n.id)
        if [n.id for n in ordered] != list(range(len(ordered))):
            raise ValueError("node ids must be unique and dense in [0, node_count)")
        items = edges.items() if isinstance(edges, Mapping) else (
            ((u, v), w) for u, v, w in edges
        )
        table: dict[tuple[int, int], float] = {}
        adj: list[dict[int, float]] = [dict() for _ in ordered]
        for (u, v), length in items:
            u, v, length = int(u), int(v), float(length)
            if u == v:
                raise ValueError(f"self-loop at node {u}")
            if not (0 <= u < len(ordered) and 0 <= v < len(ordered)):
                raise ValueError(f"edge ({u}, {v}) references an unknown node")
            if not length > 0:
                raise ValueError(f"edge ({u}, {v}) must have positive length")
            k = _key(u, v)
            if k in table:
                raise ValueError(f"duplicate edge {k}")
            table[k] = length
            adj[u][v] = length
            adj[v][u] = length
        self._nodes = tuple(ordered)
        self._edges = MappingProxyType(dict(sorted(table.items())))
        self._adj = tuple(MappingProxyType(dict(sorted(a.items()))) for a in adj)
        self._dist_cache: dict[int, tuple[float, ...]] = {}

    # -- accessors -------------------------------------------------------

    @property
    def nodes(self) -> tuple[NetworkNode, ...]:
        return self._nodes

    @property
    def edges(self) -> Mapping[tuple[int, int], float]:
        return self._edges

    @property
    def node_count(self) -> int:
        return len(self._nodes)

    @property
    def edge_count(self) -> int:
        return len(self._edges)

    @property
    def end_nodes(self) -> tuple[int, ...]:
        return tuple(n.id for n in self._nodes if n.kind is NodeKind.END)

    @property
    def n_repeaters(self) -> int:
        return sum(1 for n in self._nodes if n.kind is NodeKind.REPEATER)

    def neighbors(self, u: int) -> Mapping[int, float]:
        """Neighbor -> edge length, in increasing neighbor id."""
        return self._adj[u]

    def degree(self, u: int) -> int:
        return len(self._adj[u])

    def has_edge(self, u: int, v: int) -> bool:
        return v in self._adj[u]

    def length(self, u: int, v: int) -> float:
        return self._adj[u][v]

    def path_lengths(self, route: Sequence[int]) -> tuple[float, ...]:
        adj = self._adj
        return tuple(adj[a][b] for a, b in zip(route, route[1:]))

    def is_simple_path(self, route: Sequence[int], s: Optional[int] = None,
                       t: Optional[int] = None) -> bool:
        if len(route) == 0 or len(set(route)) != len(route):
            return False
        if s is not None and route[0] != s:
            return False
        if t is not None and route[-1] != t:
            return False
        return all(b in self._adj[a] for a, b in zip(route, route[1:]))

    def with_edges(self, keep: Iterable[tuple[int, int]]) -> "NetworkGraph":
        """Subgraph on all nodes with only the listed edges."""
        return NetworkGraph(self._nodes, {_key(u, v): self._edges[_key(u, v)] for u, v in keep})

    def distances_to(self, target: int) -> tuple[float, ...]:
        """Graph distance from every node to ``target`` (cached)."""
        d = self._dist_cache.get(target)
        if d is None:
            d = tuple(_dijkstra(self, target)[0])
            self._dist_cache[target] = d
        return d

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, NetworkGraph):
            return NotImplemented
        return self._nodes == other._nodes and dict(self._edges) == dict(other._edges)

    def __hash__(self) -> int:
        return hash((self._nodes, tuple(self._edges.items())))

    def __repr__(self) -> str:
        return f"NetworkGraph(nodes={self.node_count}, edges={self.edge_count})"

    # -- serialization ---------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "nodes": [
                {"id": n.id, "x": n.x, "y": n.y, "kind": n.kind.value} for n in self._nodes
            ],
            "edges": [{"u": u, "v": v, "length": w} for (u, v), w in self._edges.items()],
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "NetworkGraph":
        """Build a graph from the JSON layout; missing lengths are Euclidean.

        Raises:
            ValueError: on coincident node positions or malformed entries.
        """
        nodes = [
            NetworkNode(int(n["id"]), float(n["x"]), float(n["y"]),
                        NodeKind(n.get("kind", "repeater")))
            for n in data["nodes"]
        ]
        seen: dict[tuple[float, float], int] = {}
        for n in nodes:
            if n.position in seen:
                raise ValueError(f"nodes {seen[n.position]} and {n.id} share a position")
            seen[n.position] = n.id
        by_id = {n.id: n for n in nodes}
        edges = {}
        for e in data.get("edges", []):
            u, v = int(e["u"]), int(e["v"])
            if u not in by_id or v not in by_id:
                raise ValueError(f"edge ({u}, {v}) references an unknown node")
            length = e.get("length")
            if length is None:
                length = euclidean(by_id[u].position, by_id[v].position)
            k = _key(u, v)
            if k in edges:
                raise ValueError(f"duplicate edge {k}")
            edges[k] = float(length)
        return cls(nodes, edges)

    def to_json(self, path: Union[str, os.PathLike, None] = None) -> str:
        text = json.dumps(self.to_dict(), indent=1)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text + "\n")
        return text

    @classmethod
    def from_json(cls, source: Union[str, os.PathLike]) -> "NetworkGraph":
        """Load from a JSON file path or a JSON string."""
        text = str(source)
        if not text.lstrip().startswith("{"):
            with open(source) as fh:
                text = fh.read()
        return cls.from_dict(json.loads(text))


def euclidean(a: Sequence[float], b: Sequence[float]) -> float:
    return math.hypot(a[0] - b[0], a[1] - b[1])


# -- generation ----------------------------------------------------------


def waxman_generate(config: GraphGenConfig) -> NetworkGraph:
    """Random Waxman (RG1) network with end nodes on the square's diagonal.

    Every unordered pair, the end-node pair included, gets an edge of its
    Euclidean length with probability ``beta * exp(-d / (scale * alpha))``.
    """
    rng = np.random.default_rng(config.seed)
    side = config.side
    pos = np.empty((config.n_repeaters + 2, 2))
    pos[0] = (side / 4, side / 4)
    pos[1] = (3 * side / 4, 3 * side / 4)
    pos[2:] = rng.uniform(0.0, side, size=(config.n_repeaters, 2))
    nodes = [
        NetworkNode(i, float(x), float(y), NodeKind.END if i < 2 else NodeKind.REPEATER)
        for i, (x, y) in enumerate(pos)
    ]
    iu, ju = np.triu_indices(len(nodes), k=1)
    d = np.hypot(pos[iu, 0] - pos[ju, 0], pos[iu, 1] - pos[ju, 1])
    prob = config.waxman_beta * np.exp(-d / (config.waxman_scale * config.waxman_alpha))
    draws = rng.random(d.shape[0])
    keep = (draws < prob) & (d > 0)
    edges = {(int(u), int(v)): float(w) for u, v, w in zip(iu[keep], ju[keep], d[keep])}
    return NetworkGraph(nodes, edges)


# -- distances and simple paths -----------------------------------------


def _dijkstra(g: NetworkGraph, source: int) -> tuple[list[float], list[int]]:
    dist = [UNREACHABLE] * g.node_count
    pred = [-1] * g.node_count
    dist[source] = 0.0
    heap = [(0.0, source)]
    while heap:
        d, u = heapq.heappop(heap)
        if d > dist[u]:
            continue
        for v, w in g.neighbors(u).items():
            nd = d + w
            if nd < dist[v]:
                dist[v] = nd
                pred[v] = u
                heapq.heappush(heap, (nd, v))
    return dist, pred


def graph_distance(g: NetworkGraph, u: int, v: int) -> float:
    """Shortest summed edge length from ``u`` to ``v`` (``inf`` if unreachable)."""
    if u == v:
        return 0.0
    return g.distances_to(v)[u]


def connected(g: NetworkGraph, u: int, v: int) -> bool:
    seen = {u}
    todo = deque([u])
    while todo:
        a = todo.popleft()
        if a == v:
            return True
        for b in g.neighbors(a):
            if b not in seen:
                seen.add(b)
                todo.append(b)
    return False


def shortest_path(g: NetworkGraph, s: int, t: int) -> Route:
    """Minimum-total-length simple path from ``s`` to ``t``."""
    dist, pred = _dijkstra(g, s)
    if dist[t] == UNREACHABLE:
        raise NoPathError(f"no path between {s} and {t}")
    route = [t]
    while route[-1] != s:
        route.append(pred[route[-1]])
    return tuple(reversed(route))


def fewest_hops_path(g: NetworkGraph, s: int, t: int) -> Route:
    """Breadth-first path with the fewest edges (smallest ids on ties)."""
    pred = {s: s}
    todo = deque([s])
    while todo:
        a = todo.popleft()
        if a == t:
            break
        for b in g.neighbors(a):
            if b not in pred:
                pred[b] = a
                todo.append(b)
    if t not in pred:
        raise NoPathError(f"no path between {s} and {t}")
    route = [t]
    while route[-1] != s:
        route.append(pred[route[-1]])
    return tuple(reversed(route))


def iter_simple_paths(g: NetworkGraph, s: int, t: int,
                      max_edges: Optional[int] = None) -> Iterator[Route]:
    """All simple ``s``-``t`` paths in depth-first, increasing-id order."""
    path = [s]
    on_path = {s}
    stack = [iter(g.neighbors(s))]
    while stack:
        nxt = next(stack[-1], None)
        if nxt is None:
            stack.pop()
            on_path.discard(path.pop())
            continue
        if nxt in on_path:
            continue
        if nxt == t:
            yield tuple(path) + (t,)
            continue
        if max_edges is not None and len(path) >= max_edges:
            continue
        path.append(nxt)
        on_path.add(nxt)
        stack.append(iter(g.neighbors(nxt)))


def count_simple_paths(g: NetworkGraph, s: int, t: int) -> int:
    return sum(1 for _ in iter_simple_paths(g, s, t))


def random_simple_path(g: NetworkGraph, s: int, t: int,
                       seed: Union[int, np.random.Generator, None] = None) -> Route:
    """A simple path found by DFS with uniformly shuffled neighbor order."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)

    def shuffled(u: int) -> list[int]:
        nbrs = list(g.neighbors(u))
        rng.shuffle(nbrs)
        return nbrs

    path = [s]
    visited = {s}
    stack = [iter(shuffled(s))]
    while stack:
        if path[-1] == t:
            return tuple(path)
        nxt = next(stack[-1], None)
        if nxt is None:
            stack.pop()
            path.pop()
            continue
        if nxt in visited:
            continue
        visited.add(nxt)
        path.append(nxt)
        stack.append(iter(shuffled(nxt)))
    raise NoPathError(f"no path between {s} and {t}")


# -- pruning -------------------------------------------------------------


def _biconnected_edge_sets(n: int, edge_list: Sequence[tuple[int, int]]) -> list[list[int]]:
    """Tarjan's biconnected components over edge ids (parallel edges allowed)."""
    inc: list[list[tuple[int, int]]] = [[] for _ in range(n)]
    for eid, (u, v) in enumerate(edge_list):
        inc[u].append((v, eid))
        inc[v].append((u, eid))
    disc = [-1] * n
    low = [0] * n
    timer = 0
    comps: list[list[int]] = []
    edge_stack: list[int] = []
    for root in range(n):
        if disc[root] != -1 or not inc[root]:
            continue
        disc[root] = low[root] = timer
        timer += 1
        # frames: (node, id of the tree edge used to reach it, incidence iterator)
        frames = [(root, -1, iter(inc[root]))]
        while frames:
            u, parent_eid, it = frames[-1]
            advanced = False
            for v, eid in it:
                if eid == parent_eid:
                    continue
                if disc[v] == -1:
                    edge_stack.append(eid)
                    disc[v] = low[v] = timer
                    timer += 1
                    frames.append((v, eid, iter(inc[v])))
                    advanced = True
                    break
                if disc[v] < disc[u]:
                    edge_stack.append(eid)
                    low[u] = min(low[u], disc[v])
            if advanced:
                continue
            frames.pop()
            if frames:
                p = frames[-1][0]
                low[p] = min(low[p], low[u])
                if low[u] >= disc[p]:
                    comp = []
                    while True:
                        e = edge_stack.pop()
                        comp.append(e)
                        if e == parent_eid:
                            break
                    comps.append(comp)
    return comps


def prune_to_st_biconnected(g: NetworkGraph, s: int, t: int) -> NetworkGraph:
    """Keep exactly the edges that lie on some simple ``s``-``t`` path.

    A virtual ``s``-``t`` edge is added, and the biconnected component that
    contains it (minus the virtual edge) is returned.

    Raises:
        NoPathError: if ``s`` and ``t`` are disconnected.
    """
    if s == t:
        raise ValueError("source and destination must differ")
    if not connected(g, s, t):
        raise NoPathError(f"no path between {s} and {t}")
    edge_list = list(g.edges)
    virtual = len(edge_list)
    edge_list.append((s, t))
    for comp in _biconnected_edge_sets(g.node_count, edge_list):
        if virtual in comp:
            return g.with_edges(edge_list[e] for e in comp if e != virtual)
    raise AssertionError("virtual edge missing from every component")


# -- geometry and direction ---------------------------------------------


def normalize_coordinates(g: NetworkGraph, s: int, t: int) -> list[tuple[float, float]]:
    """Similarity transform sending ``s`` to (-1, 0) and ``t`` to (1, 0)."""
    zs = complex(*g.nodes[s].position)
    zt = complex(*g.nodes[t].position)
    if zs == zt:
        raise DegenerateEndpointsError(f"nodes {s} and {t} share a position")
    mid = (zs + zt) / 2
    half = (zt - zs) / 2
    out = []
    for n in g.nodes:
        z = (complex(n.x, n.y) - mid) / half
        out.append((z.real, z.imag))
    return out


def choose_direction(g: NetworkGraph, s: int, t: int,
                     heuristic: Union[Direction, str] = Direction.MEAN) -> tuple[int, int]:
    """Pick the search orientation from where the repeaters cluster.

    Uses the normalized x-coordinates of every connected node other than the
    two ends: a non-negative mean (or median) keeps ``(s, t)``, a negative
    one returns ``(t, s)``.
    """
    heuristic = Direction(heuristic)
    if heuristic is Direction.NONE:
        return (s, t)
    coords = normalize_coordinates(g, s, t)
    xs = [coords[n.id][0] for n in g.nodes if n.id not in (s, t) and g.degree(n.id) > 0]
    if not xs:
        return (s, t)
    centre = statistics.fmean(xs) if heuristic is Direction.MEAN else statistics.median(xs)
    return (s, t) if centre >= 0 else (t, s)
