"""Archived multi-objective simulated annealing over wireline connectivities.

Objectives are (mean link utilization, its standard deviation) under
up*/down* routing.  Candidates keep the mesh link count, stay connected and
respect a per-router port bound ``k_max``.
"""
from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigurationError, PreconditionError
from .metrics import link_utilization, network_edp
from .models import EnergyModel, LatencyModel
from .routing import IRREGULAR, route_for
from .topology import Topology, is_connected, validate
from .traffic import TrafficMatrix

log = logging.getLogger(__name__)


def dominates(a, b) -> bool:
    """Pareto dominance for minimization."""
    return all(x <= y for x, y in zip(a, b)) and any(x < y for x, y in zip(a, b))


@dataclass(frozen=True)
class Candidate:
    edges: tuple[tuple[int, int], ...]
    u_mean: float
    u_std: float
    feasible: dict = field(default_factory=dict, compare=False)

    @property
    def objectives(self) -> tuple[float, float]:
        return (self.u_mean, self.u_std)

    def topology(self, base: Topology) -> Topology:
        return Topology(base.placement, self.edges, None, base.name)


@dataclass(frozen=True)
class AnnealSchedule:
    t_init: float = 1.0
    t_min: float = 1e-5
    alpha: float = 0.95
    iters_per_temp: int = 50

    def __post_init__(self):
        if not (self.t_init >= self.t_min > 0):
            raise ConfigurationError("schedule needs t_init >= t_min > 0")
        if not 0 < self.alpha < 1:
            raise ConfigurationError("cooling ratio alpha must lie in (0, 1)")
        if self.iters_per_temp < 1:
            raise ConfigurationError("iters_per_temp must be >= 1")

    @property
    def n_temps(self) -> int:
        if self.t_init == self.t_min:
            return 1
        return math.ceil(math.log(self.t_min / self.t_init) / math.log(self.alpha)) + 1

    @property
    def total_iterations(self) -> int:
        return self.n_temps * self.iters_per_temp

    def temperatures(self):
        t = self.t_init
        for _ in range(self.n_temps):
            yield t
            t *= self.alpha

    @classmethod
    def for_iterations(cls, iterations: int, t_init: float = 1.0, t_min: float = 1e-5,
                       alpha: float = 0.95) -> "AnnealSchedule":
        """Schedule with at least ``iterations`` moves over the same cooling curve."""
        base = cls(t_init, t_min, alpha, 1)
        return cls(t_init, t_min, alpha, max(1, math.ceil(iterations / base.n_temps)))


class Evaluator:
    """Objective cache keyed by edge tuple."""

    def __init__(self, base: Topology, traffic: TrafficMatrix, scheme: str = IRREGULAR):
        self.base = base
        self.traffic = traffic
        self.scheme = scheme
        self._cache: dict = {}
        self.evaluations = 0

    def __call__(self, edges) -> Candidate:
        edges = tuple(sorted(edges))
        c = self._cache.get(edges)
        if c is None:
            topo = Topology(self.base.placement, edges, None, self.base.name)
            rt = route_for(topo, self.traffic, self.scheme)
            lu = link_utilization(topo, self.traffic, rt)
            c = self._cache[edges] = Candidate(edges, lu.mean_u, lu.std_u)
            self.evaluations += 1
        return c


# -- perturbation ----------------------------------------------------------------

@dataclass(frozen=True)
class Perturbation:
    edges: tuple[tuple[int, int], ...]
    changed: bool


def perturb(edges, n_routers: int, k_max: int | None, rng: np.random.Generator,
            max_tries: int = 100, max_link_length: int | None = None,
            placement=None) -> Perturbation:
    """Swap one random edge for one random absent edge, keeping the graph feasible."""
    edges = tuple(sorted(edges))
    present = set(edges)
    deg = np.zeros(n_routers, dtype=int)
    for u, v in edges:
        deg[u] += 1
        deg[v] += 1
    n_pairs = n_routers * (n_routers - 1) // 2
    if len(edges) >= n_pairs:
        return Perturbation(edges, False)
    for _ in range(max_tries):
        drop = edges[int(rng.integers(len(edges)))]
        while True:
            u, v = (int(x) for x in rng.integers(n_routers, size=2))
            if u != v and (min(u, v), max(u, v)) not in present:
                break
        add = (min(u, v), max(u, v))
        if k_max is not None:
            d = deg.copy()
            d[list(drop)] -= 1
            d[list(add)] += 1
            if d.max() > k_max:
                continue
        if max_link_length is not None and placement is not None \
                and placement.manhattan(*add) > max_link_length:
            continue
        new = tuple(sorted((present - {drop}) | {add}))
        if not is_connected(n_routers, new):
            continue
        return Perturbation(new, True)
    return Perturbation(edges, False)


# -- archive ------------------------------------------------------------------------

class ParetoArchive:
    """Mutually non-dominated feasible candidates with soft/hard size limits."""

    def __init__(self, soft_limit: int = 60, hard_limit: int = 30, witness=None):
        if not soft_limit > hard_limit >= 1:
            raise ConfigurationError("archive limits need soft_limit > hard_limit >= 1")
        self.soft_limit = soft_limit
        self.hard_limit = hard_limit
        self.witness = witness   # objective point some member must weakly dominate
        self.members: list[Candidate] = []

    def __len__(self):
        return len(self.members)

    def __iter__(self):
        return iter(self.members)

    def dominating(self, c: Candidate) -> list[Candidate]:
        return [m for m in self.members if dominates(m.objectives, c.objectives)]

    def dominated_by(self, c: Candidate) -> list[Candidate]:
        return [m for m in self.members if dominates(c.objectives, m.objectives)]

    def contains(self, c: Candidate) -> bool:
        return any(m.edges == c.edges for m in self.members)

    def add(self, c: Candidate) -> None:
        if self.contains(c) or self.dominating(c):
            return
        if any(m.objectives == c.objectives for m in self.members):
            return
        self.members = [m for m in self.members if not dominates(c.objectives, m.objectives)]
        self.members.append(c)
        if len(self.members) > self.soft_limit:
            self.cluster()

    def ranges(self, *extra: Candidate) -> np.ndarray:
        pts = np.array([m.objectives for m in self.members] + [e.objectives for e in extra])
        r = pts.max(axis=0) - pts.min(axis=0)
        return np.where(r > 0, r, 1.0)

    def _protected(self) -> set[int]:
        pts = [m.objectives for m in self.members]
        keep = {min(range(len(pts)), key=lambda i: (pts[i][0], pts[i][1])),
                min(range(len(pts)), key=lambda i: (pts[i][1], pts[i][0]))}
        if self.witness is not None:
            w = [i for i, p in enumerate(pts) if all(a <= b for a, b in zip(p, self.witness))]
            if w and not keep & set(w):
                keep.add(w[0])
        return keep

    def cluster(self) -> None:
        """Single-linkage pruning down to the hard limit, sparing the extremes."""
        while len(self.members) > self.hard_limit:
            pts = np.array([m.objectives for m in self.members]) / self.ranges()
            d = np.linalg.norm(pts[:, None, :] - pts[None, :, :], axis=-1)
            np.fill_diagonal(d, np.inf)
            protected = self._protected()
            free = [k for k in range(len(self.members)) if k not in protected]
            if not free:
                return
            # drop the unprotected member closest to any neighbour, later index on ties
            victim = min(free, key=lambda k: (d[k].min(), -k))
            del self.members[victim]

    def check(self) -> None:
        for a in self.members:
            for b in self.members:
                if a is not b and dominates(a.objectives, b.objectives):
                    raise AssertionError("archive holds a dominated pair")

    def best(self, objective: int) -> Candidate:
        return min(self.members, key=lambda m: (m.objectives[objective], m.objectives[1 - objective], m.edges))

    def to_list(self, edp: dict | None = None) -> list[dict]:
        out = []
        for m in sorted(self.members, key=lambda m: (m.u_mean, m.u_std, m.edges)):
            out.append({"edges": [list(e) for e in m.edges], "u_mean": m.u_mean, "u_std": m.u_std,
                        "edp": None if edp is None else edp.get(m.edges)})
        return out


def _delta_dom(a, b, ranges) -> float:
    prod = 1.0
    for x, y, r in zip(a, b, ranges):
        if x != y:
            prod *= abs(x - y) / r
    return prod


def _accept(prob: float, rng) -> bool:
    return bool(rng.random() < prob)


def _logistic(x: float) -> float:
    # 1 / (1 + exp(x)) without overflow
    if x > 700:
        return 0.0
    return 1.0 / (1.0 + math.exp(x))


@dataclass
class AmosaResult:
    archive: ParetoArchive
    seed: Candidate
    iterations: int
    evaluations: int
    accepted: int
    failed_perturbations: int


def amosa_run(seed_topology: Topology, traffic: TrafficMatrix, routing_scheme: str = IRREGULAR,
              k_max: int = 6, schedule: AnnealSchedule | None = None, rng_seed: int = 0,
              soft_limit: int = 60, hard_limit: int = 30, initial_archive=None,
              max_link_length: int | None = None, evaluator: Evaluator | None = None) -> AmosaResult:
    """Anneal from ``seed_topology``, returning the final Pareto archive.

    ``initial_archive`` (candidates from an earlier run, e.g. a smaller
    k_max) is re-validated against ``k_max`` and merged into the start
    archive.
    """
    schedule = schedule or AnnealSchedule()
    bad = validate(seed_topology.with_wireless(None), k_max=k_max)
    if bad:
        raise PreconditionError(f"infeasible seed topology: {bad[0]}")
    n = seed_topology.n_routers
    rng = np.random.default_rng(rng_seed)
    ev = evaluator or Evaluator(seed_topology, traffic, routing_scheme)
    seed = ev(seed_topology.edges)
    archive = ParetoArchive(soft_limit, hard_limit, witness=seed.objectives)
    archive.add(seed)
    for c in initial_archive or ():
        topo = c.topology(seed_topology)
        if not validate(topo, k_max=k_max):
            archive.add(ev(c.edges))
    current = archive.members[int(rng.integers(len(archive)))]
    accepted = failed = iters = 0

    for temp in schedule.temperatures():
        for _ in range(schedule.iters_per_temp):
            iters += 1
            p = perturb(current.edges, n, k_max, rng, max_link_length=max_link_length,
                        placement=seed_topology.placement)
            if not p.changed:
                failed += 1
                continue
            new = ev(p.edges)
            rg = archive.ranges(new, current)
            if dominates(current.objectives, new.objectives):
                doms = archive.dominating(new)
                total = sum(_delta_dom(m.objectives, new.objectives, rg) for m in doms)
                total += _delta_dom(current.objectives, new.objectives, rg)
                if _accept(_logistic(total / (len(doms) + 1) / temp), rng):
                    current = new
                    accepted += 1
            elif dominates(new.objectives, current.objectives):
                doms = archive.dominating(new)
                if doms:
                    deltas = [_delta_dom(m.objectives, new.objectives, rg) for m in doms]
                    k = int(np.argmin(deltas))
                    if _accept(_logistic(-deltas[k]), rng):
                        current = doms[k]
                    else:
                        current = new
                else:
                    archive.add(new)
                    current = new
                accepted += 1
            else:
                doms = archive.dominating(new)
                if doms:
                    avg = sum(_delta_dom(m.objectives, new.objectives, rg) for m in doms) / len(doms)
                    if _accept(_logistic(avg / temp), rng):
                        current = new
                        accepted += 1
                else:
                    archive.add(new)
                    current = new
                    accepted += 1
    log.info("amosa k_max=%d: %d iterations, %d evaluations, archive %d",
             k_max, iters, ev.evaluations, len(archive))
    return AmosaResult(archive, seed, iters, ev.evaluations, accepted, failed)


# -- selection -----------------------------------------------------------------------

def candidate_edp(candidate: Candidate, base: Topology, traffic: TrafficMatrix,
                  latency_model: LatencyModel | None = None, energy_model: EnergyModel | None = None,
                  scheme: str = IRREGULAR) -> float:
    topo = candidate.topology(base)
    rt = route_for(topo, traffic, scheme)
    return network_edp(topo, traffic, rt, energy_model or EnergyModel(), latency_model or LatencyModel())[2]


def select_final(archive, edp_of) -> tuple[Candidate, float]:
    """Member with the least EDP; ties by sigma, then mean, then edge list.

    ``edp_of`` maps a Candidate to its EDP.
    """
    members = list(archive)
    if not members:
        raise PreconditionError("cannot select from an empty archive")
    scored = [(edp_of(m), m.u_std, m.u_mean, m.edges, m) for m in members]
    best = min(scored, key=lambda t: t[:4])
    return best[4], best[0]


@dataclass
class SweepEntry:
    k_max: int
    result: AmosaResult
    selected: Candidate
    edp: float
    edps: dict


def sweep_kmax(seed_topology: Topology, traffic: TrafficMatrix, k_values=(4, 5, 6, 7),
               schedule: AnnealSchedule | None = None, rng_seed: int = 0,
               latency_model: LatencyModel | None = None, energy_model: EnergyModel | None = None,
               warm_start: bool = True, **kwargs) -> dict[int, SweepEntry]:
    """AMOSA per k_max in ascending order, each warm-started from the previous archive."""
    k_values = sorted(k_values)
    if not k_values:
        raise ConfigurationError("empty k_max range")
    ev = Evaluator(seed_topology, traffic, kwargs.pop("routing_scheme", IRREGULAR))
    out = {}
    prev = None
    for k in k_values:
        res = amosa_run(seed_topology, traffic, ev.scheme, k, schedule, rng_seed,
                        initial_archive=prev if warm_start else None, evaluator=ev, **kwargs)
        edps = {m.edges: candidate_edp(m, seed_topology, traffic, latency_model, energy_model, ev.scheme)
                for m in res.archive}
        sel, edp = select_final(res.archive, lambda m: edps[m.edges])
        out[k] = SweepEntry(k, res, sel, edp, edps)
        prev = list(res.archive)
    return out


def save_archive(archive: ParetoArchive, path, edps: dict | None = None) -> None:
    Path(path).write_text(json.dumps(archive.to_list(edps), indent=1) + "\n")


def load_archive(path) -> list[Candidate]:
    doc = json.loads(Path(path).read_text())
    return [Candidate(tuple(tuple(e) for e in d["edges"]), d["u_mean"], d["u_std"]) for d in doc]
