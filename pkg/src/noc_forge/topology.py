"""Grid placements and wireline topologies (mesh, irregular, HetNoC).

Routers are numbered row-major on a ``rows x cols`` tile grid; router ``r``
sits at ``(r // cols, r % cols)``.  Positions are stored as ``(row, col)``;
the routing code treats the column as the X dimension.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import TYPE_CHECKING, Iterable, NamedTuple

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .errors import ConfigurationError, ConstraintViolation, PreconditionError

if TYPE_CHECKING:
    from .wireless import WirelessPlan


class TileKind(Enum):
    CPU = "cpu"
    GPU = "gpu"  # a GPU cluster tile (several cores concentrated on one router)
    MC = "mc"


class Router(NamedTuple):
    id: int
    kind: TileKind
    pos: tuple[int, int]


class Link(NamedTuple):
    src: int
    dst: int
    length: int


@dataclass(frozen=True)
class Placement:
    """Tile kind for every grid position, stored row-major."""

    rows: int
    cols: int
    kinds: tuple[TileKind, ...]

    def __post_init__(self):
        if len(self.kinds) != self.rows * self.cols:
            raise ConfigurationError(
                f"placement has {len(self.kinds)} tiles, grid needs {self.rows * self.cols}")

    @classmethod
    def from_mapping(cls, rows: int, cols: int, mapping: dict, default=TileKind.GPU) -> "Placement":
        kinds = [default] * (rows * cols)
        for (r, c), kind in mapping.items():
            if not (0 <= r < rows and 0 <= c < cols):
                raise ConfigurationError(f"tile position {(r, c)} outside {rows}x{cols} grid")
            kinds[r * cols + c] = TileKind(kind)
        return cls(rows, cols, tuple(kinds))

    def as_mapping(self) -> dict[tuple[int, int], TileKind]:
        return {self.position(i): k for i, k in enumerate(self.kinds)}

    @property
    def size(self) -> int:
        return self.rows * self.cols

    def position(self, rid: int) -> tuple[int, int]:
        return divmod(rid, self.cols)

    def router_at(self, row: int, col: int) -> int:
        return row * self.cols + col

    def routers_of(self, kind: TileKind) -> list[int]:
        return [i for i, k in enumerate(self.kinds) if k is kind]

    def counts(self) -> dict[TileKind, int]:
        return {k: self.kinds.count(k) for k in TileKind}

    def quadrant(self, rid: int) -> int:
        r, c = self.position(rid)
        return 2 * (r >= self.rows / 2) + (c >= self.cols / 2)

    def manhattan(self, a: int, b: int) -> int:
        (ra, ca), (rb, cb) = self.position(a), self.position(b)
        return abs(ra - rb) + abs(ca - cb)


def _center_block(rows, cols):
    r0, c0 = rows // 2 - 1, cols // 2 - 1
    return [(r0, c0), (r0, c0 + 1), (r0 + 1, c0), (r0 + 1, c0 + 1)]


def wihetnoc_placement(rows: int = 8, cols: int = 8) -> Placement:
    """CPUs on the four centre tiles, one MC at the centre of each quadrant."""
    if rows < 4 or cols < 4:
        raise ConfigurationError("the quadrant placement needs at least a 4x4 grid")
    qr, qc = (rows // 2 - 1) // 2, (cols // 2 - 1) // 2
    mcs = [(qr, qc), (qr, cols - 1 - qc), (rows - 1 - qr, qc), (rows - 1 - qr, cols - 1 - qc)]
    mapping = {p: TileKind.CPU for p in _center_block(rows, cols)}
    for p in mcs:
        if p in mapping:
            raise ConfigurationError(f"grid {rows}x{cols} too small to separate CPUs and MCs")
        mapping[p] = TileKind.MC
    return Placement.from_mapping(rows, cols, mapping)


def mesh_opt_placement(rows: int = 8, cols: int = 8) -> Placement:
    """Clustered placement used for the optimized mesh baseline.

    CPUs occupy the centre 2x2 block and the four MCs wrap around it in a
    pinwheel, one per quadrant, so CPU-MC distances are 1-2 hops.
    """
    if rows < 4 or cols < 4:
        raise ConfigurationError("the clustered placement needs at least a 4x4 grid")
    r0, c0 = rows // 2 - 1, cols // 2 - 1
    mapping = {p: TileKind.CPU for p in _center_block(rows, cols)}
    for p in [(r0 - 1, c0), (r0, c0 + 2), (r0 + 2, c0 + 1), (r0 + 1, c0 - 1)]:
        mapping[p] = TileKind.MC
    return Placement.from_mapping(rows, cols, mapping)


def mesh_edges(rows: int, cols: int) -> list[tuple[int, int]]:
    edges = []
    for r in range(rows):
        for c in range(cols):
            i = r * cols + c
            if c + 1 < cols:
                edges.append((i, i + 1))
            if r + 1 < rows:
                edges.append((i, i + cols))
    return sorted(edges)


def mesh_link_budget(rows: int, cols: int) -> int:
    """Undirected link count of a rows x cols mesh."""
    return rows * (cols - 1) + cols * (rows - 1)


def _norm_edge(u, v):
    return (u, v) if u < v else (v, u)


@dataclass(frozen=True, eq=False)
class Topology:
    """Routers on a grid joined by undirected wireline edges.

    Every undirected edge yields two directed links; utilization is tracked
    per direction.  ``wireless`` optionally holds a WirelessPlan.
    """

    placement: Placement
    edges: tuple[tuple[int, int], ...]
    wireless: "WirelessPlan | None" = None
    name: str = ""
    _adj: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        edges = tuple(sorted(_norm_edge(u, v) for u, v in self.edges))
        object.__setattr__(self, "edges", edges)
        adj = [[] for _ in range(self.placement.size)]
        for u, v in edges:
            adj[u].append(v)
            adj[v].append(u)
        object.__setattr__(self, "_adj", tuple(tuple(sorted(a)) for a in adj))

    def __eq__(self, other):
        if not isinstance(other, Topology):
            return NotImplemented
        return self.to_dict() == other.to_dict()

    def __hash__(self):
        return hash((self.placement, self.edges))

    @property
    def n_routers(self) -> int:
        return self.placement.size

    @property
    def grid_dims(self) -> tuple[int, int]:
        return self.placement.rows, self.placement.cols

    @property
    def routers(self) -> list[Router]:
        p = self.placement
        return [Router(i, k, p.position(i)) for i, k in enumerate(p.kinds)]

    @property
    def link_budget(self) -> int:
        return mesh_link_budget(*self.grid_dims)

    def neighbors(self, r: int) -> tuple[int, ...]:
        return self._adj[r]

    def degree(self, r: int) -> int:
        return len(self._adj[r])

    def degrees(self) -> np.ndarray:
        return np.array([len(a) for a in self._adj])

    def has_edge(self, u: int, v: int) -> bool:
        return v in self._adj[u]

    def link_length(self, u: int, v: int) -> int:
        return self.placement.manhattan(u, v)

    @property
    def wire_links(self) -> tuple[Link, ...]:
        """Directed wireline links, sorted by (src, dst)."""
        out = []
        for u, v in self.edges:
            d = self.link_length(u, v)
            out.append(Link(u, v, d))
            out.append(Link(v, u, d))
        return tuple(sorted(out))

    def is_mesh(self) -> bool:
        return list(self.edges) == mesh_edges(*self.grid_dims)

    def is_connected(self) -> bool:
        return is_connected(self.n_routers, self.edges)

    def with_wireless(self, plan: "WirelessPlan | None", name: str | None = None) -> "Topology":
        return Topology(self.placement, self.edges, plan, self.name if name is None else name)

    # -- serialization -------------------------------------------------
    def to_dict(self) -> dict:
        p = self.placement
        return {
            "name": self.name,
            "grid": [p.rows, p.cols],
            "tiles": [{"pos": list(p.position(i)), "kind": k.value} for i, k in enumerate(p.kinds)],
            "edges": [list(e) for e in self.edges],
            "wireless": None if self.wireless is None else self.wireless.to_dict(),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "Topology":
        from .wireless import WirelessPlan

        try:
            rows, cols = doc["grid"]
            mapping = {tuple(t["pos"]): TileKind(t["kind"]) for t in doc["tiles"]}
            edges = [tuple(e) for e in doc["edges"]]
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigurationError(f"malformed topology document: {exc}") from exc
        if len(mapping) != rows * cols:
            raise ConfigurationError(f"topology lists {len(mapping)} tiles for a {rows}x{cols} grid")
        placement = Placement.from_mapping(rows, cols, mapping)
        plan = doc.get("wireless")
        plan = None if plan is None else WirelessPlan.from_dict(plan)
        return cls(placement, tuple(edges), plan, doc.get("name", ""))

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True) + "\n"

    def save(self, path) -> None:
        Path(path).write_text(self.dumps())

    @classmethod
    def load(cls, path) -> "Topology":
        return cls.from_dict(json.loads(Path(path).read_text()))


def is_connected(n: int, edges: Iterable[tuple[int, int]]) -> bool:
    edges = list(edges)
    if n <= 1:
        return True
    if not edges:
        return False
    u, v = np.array(edges).T
    g = coo_matrix((np.ones(len(u)), (u, v)), shape=(n, n))
    ncomp, _ = connected_components(g, directed=False)
    return ncomp == 1


# -- constructors --------------------------------------------------------

def make_mesh(rows: int, cols: int, placement: Placement | None = None, name: str = "mesh") -> Topology:
    if rows < 2 or cols < 2:
        raise ConfigurationError(f"mesh needs rows >= 2 and cols >= 2, got {rows}x{cols}")
    if placement is None:
        placement = Placement(rows, cols, (TileKind.GPU,) * (rows * cols))
    if (placement.rows, placement.cols) != (rows, cols):
        raise ConfigurationError(
            f"placement is {placement.rows}x{placement.cols}, mesh is {rows}x{cols}")
    return Topology(placement, tuple(mesh_edges(rows, cols)), None, name)


def make_custom(rows: int, cols: int, placement: Placement, edges, k_max: int | None = None,
                link_budget: int | None | str = "mesh", name: str = "custom") -> Topology:
    """Materialize an undirected edge list as a Topology, enforcing the constraints.

    ``link_budget="mesh"`` requires exactly the mesh link count; pass an int
    for another exact budget or None to skip the check.
    """
    if (placement.rows, placement.cols) != (rows, cols):
        raise ConfigurationError(
            f"placement is {placement.rows}x{placement.cols}, grid is {rows}x{cols}")
    n = rows * cols
    seen = set()
    for u, v in edges:
        if not (0 <= u < n and 0 <= v < n):
            raise ConstraintViolation(f"edge ({u}, {v}) references a router outside 0..{n - 1}")
        if u == v:
            raise ConstraintViolation(f"self-loop at router {u}")
        e = _norm_edge(u, v)
        if e in seen:
            raise ConstraintViolation(f"duplicate edge {e}")
        seen.add(e)
    budget = mesh_link_budget(rows, cols) if link_budget == "mesh" else link_budget
    if budget is not None and len(seen) != budget:
        raise ConstraintViolation(f"link budget: {len(seen)} edges, expected {budget}")
    if not is_connected(n, seen):
        raise ConstraintViolation("fullyConnected: topology is disconnected")
    topo = Topology(placement, tuple(seen), None, name)
    if k_max is not None:
        deg = topo.degrees()
        bad = np.flatnonzero(deg > k_max)
        if bad.size:
            raise ConstraintViolation(
                f"k_max: router {int(bad[0])} has {int(deg[bad[0]])} ports > {k_max}")
    return topo


def make_hetnoc(wihetnoc: Topology, name: str = "hetnoc") -> Topology:
    """Replace every wireless shortcut by a pipelined wireline link.

    Shortcuts are the CPU-MC pairs of the CPU channel and the GPU-MC pairs of
    each GPU channel.  Pairs that already share a wire are not duplicated.
    """
    plan = wihetnoc.wireless
    if plan is None:
        raise PreconditionError("make_hetnoc needs a topology with a wireless plan")
    edges = set(wihetnoc.edges)
    for a, b in plan.shortcuts(wihetnoc.placement):
        edges.add(_norm_edge(a, b))
    return Topology(wihetnoc.placement, tuple(edges), None, name)


# -- validation ----------------------------------------------------------

@dataclass(frozen=True)
class Violation:
    constraint: str  # "router_count" | "link_budget" | "fully_connected" | "k_max" | "k_avg" | "edge"
    element: object
    message: str

    def __str__(self):
        return f"{self.constraint}: {self.message}"


def validate(topology: Topology, k_max: int | None = None, k_avg: float | None = None,
             link_budget: int | None | str = "mesh") -> list[Violation]:
    """Return every broken structural invariant; empty means the topology is valid.

    ``k_avg`` defaults to the mean port count implied by the mesh budget
    (2 * budget / R), which an exact-budget topology meets with equality.
    """
    out = []
    p = topology.placement
    n = topology.n_routers
    if len(p.kinds) != n:
        out.append(Violation("router_count", n, f"{len(p.kinds)} tiles for {n} routers"))
    for u, v in topology.edges:
        if u == v or not (0 <= u < n and 0 <= v < n):
            out.append(Violation("edge", (u, v), f"invalid edge ({u}, {v})"))
    if len(set(topology.edges)) != len(topology.edges):
        out.append(Violation("edge", None, "duplicate edges"))
    budget = topology.link_budget if link_budget == "mesh" else link_budget
    if budget is not None and len(topology.edges) != budget:
        out.append(Violation("link_budget", len(topology.edges),
                             f"{len(topology.edges)} undirected links, budget is {budget}"))
    if not topology.is_connected():
        out.append(Violation("fully_connected", None, "no path between some router pairs"))
    deg = topology.degrees()
    if k_max is not None:
        for r in np.flatnonzero(deg > k_max):
            out.append(Violation("k_max", int(r), f"router {int(r)} has {int(deg[r])} ports > {k_max}"))
    if k_avg is None and budget is not None:
        k_avg = 2 * budget / n
    if k_avg is not None and deg.mean() > k_avg + 1e-12:
        out.append(Violation("k_avg", float(deg.mean()), f"mean port count {deg.mean():.3f} > {k_avg:.3f}"))
    return out
