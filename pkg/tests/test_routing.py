from collections import deque

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import irregular_instance, random_connected_edges, random_placement
from noc_forge.errors import PreconditionError, SchemeMismatchError
from noc_forge.routing import (IRREGULAR, XY, XYYX, default_root, dump_hops_csv, hop_matrix, hops,
                               is_deadlock_free, path_links, route_for, route_irregular, route_xy,
                               route_xyyx)
from noc_forge.topology import Placement, TileKind, Topology, make_mesh
from noc_forge.traffic import TrafficMatrix


def bfs_levels(topo, root):
    lvl = {root: 0}
    q = deque([root])
    while q:
        u = q.popleft()
        for v in sorted(topo.neighbors(u)):
            if v not in lvl:
                lvl[v] = lvl[u] + 1
                q.append(v)
    return lvl


def legal_shortest_oracle(topo, root):
    """All-pairs shortest up*/down*-legal hop counts by plain BFS over (router, went_down)."""
    lvl = bfs_levels(topo, root)
    n = topo.n_routers

    def is_up(u, v):
        return (lvl[v], v) < (lvl[u], u)

    out = np.full((n, n), -1)
    for s in range(n):
        dist = {(s, 0): 0}
        q = deque([(s, 0)])
        while q:
            u, down = q.popleft()
            for v in topo.neighbors(u):
                if is_up(u, v):
                    if down:
                        continue
                    nxt = (v, 0)
                else:
                    nxt = (v, 1)
                if nxt not in dist:
                    dist[nxt] = dist[(u, down)] + 1
                    q.append(nxt)
        for d in range(n):
            out[s, d] = min(dist.get((d, 0), 10**9), dist.get((d, 1), 10**9))
    return out


def floyd_warshall(topo):
    n = topo.n_routers
    d = np.full((n, n), np.inf)
    np.fill_diagonal(d, 0)
    for u, v in topo.edges:
        d[u, v] = d[v, u] = 1
    for k in range(n):
        d = np.minimum(d, d[:, [k]] + d[[k], :])
    return d


def test_xy_example():
    m = make_mesh(2, 3)    # 3 columns (x), 2 rows (y)
    rt = route_xy(m)
    assert rt.path(0, 5) == (0, 1, 2, 5)
    assert hops(rt, 0, 5) == 3
    assert rt.path(4, 4) == (4,)
    assert path_links(rt, 4, 4) == []


def test_xy_manhattan_and_minimal():
    m = make_mesh(8, 8)
    rt = route_xy(m)
    h = hop_matrix(rt)
    p = m.placement
    for i in range(64):
        for j in range(64):
            assert h[i, j] == p.manhattan(i, j)


def test_dimension_order_needs_mesh():
    p = Placement(2, 2, (TileKind.GPU,) * 4)
    ring = Topology(p, ((0, 1), (1, 2), (2, 3), (0, 3)))
    with pytest.raises(SchemeMismatchError):
        route_xy(ring)
    with pytest.raises(SchemeMismatchError):
        route_xyyx(ring)


def _max_load(rt, tm):
    load = {}
    for i, j, f in tm.flows():
        for l in path_links(rt, i, j):
            load[l] = load.get(l, 0.0) + f
    return max(load.values())


def test_xyyx_balances_corner_pairs():
    m = make_mesh(4, 4)
    f = np.zeros((16, 16))
    for a, b in [(0, 15), (1, 15), (4, 15), (15, 0), (14, 0), (11, 0), (3, 12), (12, 3)]:
        f[a, b] = 1.0
    tm = TrafficMatrix(f)
    rt = route_xyyx(m, tm)
    classes = [rt.vc_class(i, j) for i, j, _ in tm.flows()]
    assert 0 in classes and 1 in classes
    assert _max_load(rt, tm) <= _max_load(route_xy(m), tm)


def test_xyyx_single_flow_and_zero_traffic():
    m = make_mesh(4, 4)
    f = np.zeros((16, 16))
    f[0, 15] = 0.3
    rt = route_xyyx(m, TrafficMatrix(f))
    assert rt.vc_class(0, 15) == 0
    z = route_xyyx(m, TrafficMatrix.zeros(16))
    assert np.array_equal(hop_matrix(z), hop_matrix(route_xy(m)))
    assert all(z.path(i, j) == route_xy(m).path(i, j) for i in range(16) for j in range(16))


def test_ring_tie_break():
    p = Placement(2, 2, (TileKind.GPU,) * 4)
    ring = Topology(p, ((0, 1), (1, 2), (2, 3), (0, 3)))
    rt = route_irregular(ring)
    assert rt.path(0, 2) == (0, 1, 2)


def test_tree_paths_are_unique_tree_paths(rng):
    for _ in range(20):
        n = 12
        edges = random_connected_edges(n, n - 1, rng)
        t = Topology(random_placement(3, 4, rng), tuple(edges))
        rt = route_irregular(t)
        fw = floyd_warshall(t)
        assert np.array_equal(hop_matrix(rt), fw.astype(int))


def test_disconnected_irregular():
    p = Placement(2, 2, (TileKind.GPU,) * 4)
    with pytest.raises(PreconditionError):
        route_irregular(Topology(p, ((0, 1), (2, 3))))


@settings(max_examples=120, deadline=None)
@given(irregular_instance())
def test_irregular_matches_oracle(inst):
    topo, _ = inst
    rt = route_irregular(topo)
    legal = legal_shortest_oracle(topo, default_root(topo))
    h = hop_matrix(rt)
    assert np.array_equal(h, legal)
    assert (h >= floyd_warshall(topo)).all()
    # every step follows an existing link
    for i in range(topo.n_routers):
        for j in range(topo.n_routers):
            for a, b in path_links(rt, i, j):
                assert topo.has_edge(a, b)


@settings(max_examples=60, deadline=None)
@given(irregular_instance())
def test_irregular_deadlock_free_and_deterministic(inst):
    topo, _ = inst
    rt = route_irregular(topo)
    assert is_deadlock_free(rt)
    again = route_irregular(Topology(topo.placement, topo.edges))
    assert np.array_equal(rt.next_hop_table, again.next_hop_table)


def test_walk_matches_path(rng):
    topo = make_mesh(4, 4)
    for scheme in (XY, XYYX, IRREGULAR):
        rt = route_for(topo, None, scheme)
        src = rng.integers(0, 16, 40)
        dst = rng.integers(0, 16, 40)
        fl, us, vs = rt.walk(src, dst)
        for k in range(40):
            got = list(zip(us[fl == k].tolist(), vs[fl == k].tolist()))
            assert got == path_links(rt, int(src[k]), int(dst[k]))


def test_mesh_schemes_deadlock_free():
    m = make_mesh(5, 5)
    assert is_deadlock_free(route_xy(m))
    rng = np.random.default_rng(0)
    f = rng.random((25, 25))
    np.fill_diagonal(f, 0)
    assert is_deadlock_free(route_xyyx(m, TrafficMatrix(f)))
    assert is_deadlock_free(route_irregular(m))


def test_route_for_dispatch():
    m = make_mesh(3, 3)
    assert route_for(m).scheme == XYYX
    p = Placement(2, 2, (TileKind.GPU,) * 4)
    assert route_for(Topology(p, ((0, 1), (1, 2), (2, 3), (0, 3)))).scheme == IRREGULAR
    with pytest.raises(PreconditionError):
        route_for(m, None, "west-first")


def test_hops_csv(tmp_path):
    rt = route_xy(make_mesh(2, 2))
    dump_hops_csv(rt, tmp_path / "h.csv")
    lines = (tmp_path / "h.csv").read_text().splitlines()
    assert lines[0] == "src,dst,hop_count"
    assert len(lines) == 1 + 12
    assert "0,3,2" in lines
