"""Deterministic deadlock-free routing: XY, XY+YX and up*/down* shortest paths.

A table maps ``(tag, router, destination)`` to the next router.  The tag is
scheme state carried by a packet: always 0 for XY, the XY/YX class for
XY+YX (one virtual-channel class each), and the up*/down* phase for
irregular routing (0 while up-links are still allowed, 1 once a down-link
has been taken).
"""
from __future__ import annotations

import csv
import graphlib
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .errors import PreconditionError, SchemeMismatchError
from .topology import TileKind, Topology
from .traffic import TrafficMatrix

XY, XYYX, IRREGULAR = "xy", "xyyx", "irregular"


@dataclass(eq=False)
class RoutingTable:
    scheme: str
    next_hop_table: np.ndarray                 # int, shape (tags, R, R); -1 on the diagonal
    initial_tag: np.ndarray                    # int, shape (R, R)
    down: np.ndarray | None = None             # bool (R, R): u->v is a down link (irregular only)
    root: int | None = None
    _paths: dict = field(default_factory=dict, repr=False)

    @property
    def n(self) -> int:
        return self.next_hop_table.shape[1]

    def next_tag(self, tag: int, u: int, v: int) -> int:
        if self.down is not None and self.down[u, v]:
            return 1
        return tag

    def next_hop(self, router: int, dst: int, tag: int = 0) -> int:
        return int(self.next_hop_table[tag, router, dst])

    def path(self, i: int, j: int) -> tuple[int, ...]:
        """Routers visited from i to j, both ends included."""
        key = (i, j)
        p = self._paths.get(key)
        if p is None:
            nxt = self.next_hop_table
            tag = int(self.initial_tag[i, j])
            out = [i]
            r = i
            while r != j:
                n = int(nxt[tag, r, j])
                if n < 0 or len(out) > self.n:
                    raise PreconditionError(f"no route from {i} to {j}")
                tag = self.next_tag(tag, r, n)
                out.append(n)
                r = n
            p = self._paths[key] = tuple(out)
        return p

    def walk(self, src: np.ndarray, dst: np.ndarray):
        """Links of every route src[k] -> dst[k] as flow-major (flow, u, v) arrays."""
        src = np.asarray(src, dtype=int)
        dst = np.asarray(dst, dtype=int)
        nxt = self.next_hop_table
        cur = src.copy()
        tag = self.initial_tag[src, dst].copy()
        live = np.flatnonzero(cur != dst)
        fl, us, vs = [], [], []
        for _ in range(self.n):
            if live.size == 0:
                break
            c, d, t = cur[live], dst[live], tag[live]
            n = nxt[t, c, d]
            if (n < 0).any():
                k = live[np.argmax(n < 0)]
                raise PreconditionError(f"no route from {int(src[k])} to {int(dst[k])}")
            fl.append(live)
            us.append(c)
            vs.append(n)
            if self.down is not None:
                tag[live] = np.where(self.down[c, n], 1, t)
            cur[live] = n
            live = live[n != d]
        else:
            if live.size:
                raise PreconditionError("routing table has a loop")
        if not fl:
            e = np.empty(0, dtype=int)
            return e, e, e
        fl, us, vs = np.concatenate(fl), np.concatenate(us), np.concatenate(vs)
        order = np.argsort(fl, kind="stable")
        return fl[order], us[order], vs[order]

    def vc_class(self, i: int, j: int) -> int:
        """Virtual-channel class a packet i->j must use (XY+YX only)."""
        return int(self.initial_tag[i, j]) if self.scheme == XYYX else 0


def hops(table: RoutingTable, i: int, j: int) -> int:
    return len(table.path(i, j)) - 1


def path_links(table: RoutingTable, i: int, j: int) -> list[tuple[int, int]]:
    p = table.path(i, j)
    return list(zip(p[:-1], p[1:]))


def hop_matrix(table: RoutingTable) -> np.ndarray:
    n = table.n
    h = np.zeros((n, n), dtype=int)
    for i in range(n):
        for j in range(n):
            if i != j:
                h[i, j] = hops(table, i, j)
    return h


# -- mesh schemes --------------------------------------------------------

def _dim_order_table(topology: Topology, x_first: bool) -> np.ndarray:
    rows, cols = topology.grid_dims
    n = rows * cols
    r = np.arange(n) // cols
    c = np.arange(n) % cols
    rr, rd = r[:, None], r[None, :]
    cc, cd = c[:, None], c[None, :]
    here = np.arange(n)[:, None] + np.zeros((1, n), dtype=int)
    step_x = here + np.sign(cd - cc)
    step_y = here + np.sign(rd - rr) * cols
    if x_first:
        nxt = np.where(cc != cd, step_x, step_y)
    else:
        nxt = np.where(rr != rd, step_y, step_x)
    np.fill_diagonal(nxt, -1)
    return nxt


def _require_mesh(topology: Topology):
    if not topology.is_mesh():
        raise SchemeMismatchError("dimension-ordered routing needs a 2D mesh topology")


def route_xy(topology: Topology) -> RoutingTable:
    """Minimal X-then-Y routing, X being the column index."""
    _require_mesh(topology)
    n = topology.n_routers
    return RoutingTable(XY, _dim_order_table(topology, True)[None], np.zeros((n, n), dtype=int))


def route_xyyx(topology: Topology, traffic: TrafficMatrix | None = None) -> RoutingTable:
    """Per-pair choice of XY or YX, greedily balancing predicted link load.

    Pairs are visited by descending rate (ties by (src, dst)); each takes the
    orientation whose path would carry the smaller peak load after adding it,
    XY on ties.  Class 0 (XY) and class 1 (YX) packets use disjoint virtual
    channels, which keeps the union deadlock-free.
    """
    _require_mesh(topology)
    n = topology.n_routers
    table = np.stack([_dim_order_table(topology, True), _dim_order_table(topology, False)])
    tags = np.zeros((n, n), dtype=int)
    rt = RoutingTable(XYYX, table, tags)
    if traffic is None:
        return rt
    if traffic.n != n:
        raise PreconditionError(f"traffic has {traffic.n} routers, topology {n}")
    load: dict[tuple[int, int], float] = {}
    flows = sorted(traffic.flows(), key=lambda t: (-t[2], t[0], t[1]))
    for i, j, rate in flows:
        best = None
        for tag in (0, 1):
            tags[i, j] = tag
            rt._paths.pop((i, j), None)
            links = path_links(rt, i, j)
            peak = max(load.get(l, 0.0) + rate for l in links)
            if best is None or peak < best[0]:
                best = (peak, tag, links)
        _, tag, links = best
        tags[i, j] = tag
        rt._paths.pop((i, j), None)
        for l in links:
            load[l] = load.get(l, 0.0) + rate
    return rt


# -- irregular: up*/down* constrained shortest paths ------------------------

def updown_levels(topology: Topology, root: int) -> np.ndarray:
    """BFS depth of every router in the spanning tree rooted at ``root``."""
    n = topology.n_routers
    level = np.full(n, -1)
    level[root] = 0
    q = deque([root])
    while q:
        u = q.popleft()
        for v in topology.neighbors(u):
            if level[v] < 0:
                level[v] = level[u] + 1
                q.append(v)
    return level


def default_root(topology: Topology) -> int:
    mcs = topology.placement.routers_of(TileKind.MC)
    return min(mcs) if mcs else 0


def route_irregular(topology: Topology, root: int | None = None) -> RoutingTable:
    """Shortest up*/down*-legal paths, ties broken by lowest next-hop id.

    A link u->v is "up" when v is closer to the root in the BFS spanning
    tree (equal depth: lower id counts as closer).  Legal paths take zero or
    more up links followed by zero or more down links.
    """
    n = topology.n_routers
    root = default_root(topology) if root is None else root
    level = updown_levels(topology, root)
    if (level < 0).any():
        raise PreconditionError("route_irregular needs a fully connected topology")
    rank = level * n + np.arange(n)

    e = np.array(topology.edges, dtype=int).reshape(-1, 2)
    src = np.concatenate([e[:, 0], e[:, 1]])
    dst = np.concatenate([e[:, 1], e[:, 0]])
    is_down = rank[dst] > rank[src]
    down = np.zeros((n, n), dtype=bool)
    down[src, dst] = is_down

    # State graph: node v (phase 0, may still go up) and n + v (phase 1, down only).
    up_e = ~is_down
    s_from = np.concatenate([src[up_e], src[is_down], n + src[is_down]])
    s_to = np.concatenate([dst[up_e], n + dst[is_down], n + dst[is_down]])
    adj = np.zeros((2 * n, 2 * n), dtype=np.float32)
    adj[s_from, s_to] = 1.0
    # to_dest[s, d]: legal hops from state s to router d, grown one level at a time
    reach = np.zeros((2 * n, n), dtype=bool)
    reach[np.arange(2 * n), np.arange(2 * n) % n] = True
    to_dest = np.where(reach, 0.0, np.inf)
    for k in range(1, 2 * n):
        new = (adj @ reach.astype(np.float32) > 0) & ~reach
        if not new.any():
            break
        to_dest[new] = k
        reach |= new
    if not np.isfinite(to_dest[:n]).all():
        raise PreconditionError("up*/down* labeling left some pair unreachable")

    # next hop: lowest-id successor that stays on a shortest legal path
    big = n
    cand = np.where(to_dest[s_to] == to_dest[s_from] - 1, (s_to % n)[:, None], big)   # (E, n)
    order = np.argsort(s_from, kind="stable")
    states, starts = np.unique(s_from[order], return_index=True)
    best = np.full((2 * n, n), big)
    best[states] = np.minimum.reduceat(cand[order], starts, axis=0)
    best[best == big] = -1
    nxt = best.reshape(2, n, n)
    idx = np.arange(n)
    nxt[:, idx, idx] = -1
    return RoutingTable(IRREGULAR, nxt, np.zeros((n, n), dtype=int), down, root)


def route_for(topology: Topology, traffic: TrafficMatrix | None = None, scheme: str | None = None) -> RoutingTable:
    """Pick the natural scheme: XY+YX on a mesh, up*/down* otherwise."""
    if scheme is None:
        scheme = XYYX if topology.is_mesh() else IRREGULAR
    if scheme == XY:
        return route_xy(topology)
    if scheme == XYYX:
        return route_xyyx(topology, traffic)
    if scheme == IRREGULAR:
        return route_irregular(topology)
    raise PreconditionError(f"unknown routing scheme {scheme!r}")


# -- checks and dumps ----------------------------------------------------------

def channel_dependencies(table: RoutingTable, pairs=None) -> dict:
    """Channel-dependency graph {(link, class): set of successor channels}."""
    n = table.n
    if pairs is None:
        pairs = [(i, j) for i in range(n) for j in range(n) if i != j]
    deps: dict = {}
    for i, j in pairs:
        cls = table.vc_class(i, j)
        links = path_links(table, i, j)
        for a, b in zip(links[:-1], links[1:]):
            deps.setdefault((b, cls), set())
            deps.setdefault((a, cls), set()).add((b, cls))
    return deps


def is_deadlock_free(table: RoutingTable, pairs=None) -> bool:
    deps = channel_dependencies(table, pairs)
    # graphlib wants predecessors; a cycle is a cycle either way.
    try:
        graphlib.TopologicalSorter(deps).prepare()
    except graphlib.CycleError:
        return False
    return True


def dump_hops_csv(table: RoutingTable, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["src", "dst", "hop_count"])
        for i in range(table.n):
            for j in range(table.n):
                if i != j:
                    w.writerow([i, j, hops(table, i, j)])
