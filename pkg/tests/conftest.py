from __future__ import annotations

import math

import pytest
from hypothesis import HealthCheck, settings

from qroute.netgraph import NetworkGraph, NetworkNode, NodeKind
from qroute.skr_model import PhysicalParams, SkrEstimator

settings.register_profile(
    "default", deadline=None, max_examples=60,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")


def make_graph(positions, edges, ends=(0, 1)) -> NetworkGraph:
    """Graph from ``{id: (x, y)}`` and ``[(u, v, length or None)]``."""
    nodes = [
        NetworkNode(i, float(x), float(y), NodeKind.END if i in ends else NodeKind.REPEATER)
        for i, (x, y) in sorted(positions.items())
    ]
    table = {}
    for u, v, w in edges:
        if w is None:
            (x1, y1), (x2, y2) = positions[u], positions[v]
            w = math.hypot(x1 - x2, y1 - y2)
        table[(u, v)] = w
    return NetworkGraph(nodes, table)


@pytest.fixture
def triangle() -> NetworkGraph:
    """s=0, t=1, m=2; s-t 60 km direct, s-m-t 30 + 30 km."""
    return make_graph({0: (0, 0), 1: (60, 0), 2: (30, 1)},
                      [(0, 1, 60.0), (0, 2, 30.0), (2, 1, 30.0)])


@pytest.fixture
def detour_graph() -> NetworkGraph:
    """A=0, D=1, B=2, C=3: two hops beat the direct A-C edge, then C-D."""
    return make_graph({0: (0, 0), 1: (130, 0), 2: (50, 10), 3: (100, 0)},
                      [(0, 2, 50.0), (2, 3, 50.0), (0, 3, 100.0), (3, 1, 30.0)])


@pytest.fixture
def est96() -> SkrEstimator:
    return SkrEstimator(PhysicalParams(0.96, 10.0), cache={})


@pytest.fixture
def est94() -> SkrEstimator:
    return SkrEstimator(PhysicalParams(0.94, 10.0), cache={})


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
