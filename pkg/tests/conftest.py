import numpy as np
import pytest
from hypothesis import strategies as st

from noc_forge.topology import Placement, TileKind, Topology
from noc_forge.traffic import TrafficMatrix

GRIDS = [(2, 2), (2, 3), (3, 3), (2, 5), (3, 4), (2, 6)]


def random_connected_edges(n, n_edges, rng):
    """Random spanning tree plus extra distinct edges."""
    order = rng.permutation(n)
    edges = set()
    for k in range(1, n):
        a, b = int(order[k]), int(order[rng.integers(k)])
        edges.add((min(a, b), max(a, b)))
    pool = [(a, b) for a in range(n) for b in range(a + 1, n) if (a, b) not in edges]
    extra = max(0, min(n_edges - len(edges), len(pool)))
    for k in rng.choice(len(pool), size=extra, replace=False):
        edges.add(pool[k])
    return sorted(edges)


def random_placement(rows, cols, rng, n_mc=1):
    kinds = [TileKind.GPU] * (rows * cols)
    for r in rng.choice(rows * cols, size=n_mc, replace=False):
        kinds[int(r)] = TileKind.MC
    return Placement(rows, cols, tuple(kinds))


def random_traffic(n, rng, density=0.5):
    f = rng.random((n, n)) * (rng.random((n, n)) < density)
    np.fill_diagonal(f, 0.0)
    return TrafficMatrix(f)


@st.composite
def irregular_instance(draw):
    """(topology, traffic) on a random connected graph with at most 12 routers."""
    rows, cols = draw(st.sampled_from(GRIDS))
    n = rows * cols
    seed = draw(st.integers(0, 2**32 - 1))
    rng = np.random.default_rng(seed)
    n_edges = draw(st.integers(n - 1, min(n * (n - 1) // 2, 2 * n)))
    edges = random_connected_edges(n, n_edges, rng)
    placement = random_placement(rows, cols, rng, n_mc=draw(st.integers(0, 2)))
    topo = Topology(placement, tuple(edges), None, "random")
    return topo, random_traffic(n, rng, draw(st.floats(0.05, 1.0)))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
