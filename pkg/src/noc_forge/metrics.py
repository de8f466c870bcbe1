"""Analytic evaluation of (topology, traffic, routing): link loads, CDFs, EDP."""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .models import EnergyModel, LatencyModel, require_models
from .routing import RoutingTable, hops
from .topology import Topology
from .traffic import TrafficMatrix


@dataclass(frozen=True, eq=False)
class LinkUtilization:
    links: tuple[tuple[int, int], ...]   # directed wireline links
    u: np.ndarray                        # flits/cycle on each link
    mean_u: float
    std_u: float
    twhc: float                          # sum f_ij * h_ij
    total_traffic: float

    @property
    def n_links(self) -> int:
        return len(self.links)

    @property
    def mean_hops(self) -> float:
        return self.twhc / self.total_traffic if self.total_traffic else 0.0

    def as_dict(self) -> dict:
        return dict(zip(self.links, self.u.tolist()))


def _check(topology: Topology, traffic: TrafficMatrix):
    if traffic.n != topology.n_routers:
        raise ValidationError(
            f"traffic covers {traffic.n} routers, topology has {topology.n_routers}")


def link_utilization(topology: Topology, traffic: TrafficMatrix, routing: RoutingTable) -> LinkUtilization:
    """Expected per-link load U_k = sum_ij f_ij p_ijk, its mean and population std.

    Only wireline links enter the statistics.  All routes are walked in
    lockstep and loads are summed per link in flow order.
    """
    _check(topology, traffic)
    links = tuple((l.src, l.dst) for l in topology.wire_links)
    R = topology.n_routers
    link_id = np.full((R, R), -1)
    for k, (a, b) in enumerate(links):
        link_id[a, b] = k
    src, dst = np.nonzero(traffic.f)
    rates = traffic.f[src, dst]
    fl, us, vs = routing.walk(src, dst)
    ids = link_id[us, vs]
    if (ids < 0).any():
        k = int(np.argmax(ids < 0))
        raise ValidationError(f"route {int(src[fl[k]])}->{int(dst[fl[k]])} uses ({int(us[k])}, {int(vs[k])}), "
                              "which is not a wireline link")
    # flow-major order: each link sums its flows in row-major flow order
    u = np.bincount(ids, weights=rates[fl], minlength=len(links)).astype(float)
    h = np.bincount(fl, minlength=len(src))
    twhc = 0.0
    for r, hk in zip(rates.tolist(), h.tolist()):
        twhc += r * hk
    n = len(links)
    mean = float(u.sum() / n) if n else 0.0
    std = float(np.sqrt(((u - mean) ** 2).sum() / n)) if n else 0.0
    return LinkUtilization(links, u, mean, std, twhc, traffic.total)


def objectives(topology: Topology, traffic: TrafficMatrix, routing: RoutingTable) -> tuple[float, float]:
    lu = link_utilization(topology, traffic, routing)
    return lu.mean_u, lu.std_u


def utilization_cdf(lu: LinkUtilization, normalizer: float) -> list[tuple[float, float]]:
    """Empirical CDF of normalized link loads as (value, fraction <= value) steps."""
    if not normalizer > 0:
        raise ValidationError("CDF normalizer must be positive")
    vals = np.sort(lu.u / normalizer)
    n = len(vals)
    out = []
    for k, v in enumerate(vals):
        if k + 1 < n and vals[k + 1] == v:
            continue
        out.append((float(v), (k + 1) / n))
    return out


def fraction_at_least(lu: LinkUtilization, threshold: float, normalizer: float = 1.0) -> float:
    return float(np.mean(lu.u / normalizer >= threshold)) if lu.n_links else 0.0


def fraction_above(lu: LinkUtilization, threshold: float, normalizer: float = 1.0) -> float:
    return float(np.mean(lu.u / normalizer > threshold)) if lu.n_links else 0.0


# -- analytic latency / energy -----------------------------------------------

def _segment_cost(topology, routing, i, j, lat, eng, deg):
    """Header cycles and per-flit energy of the wireline route i->j, routers included."""
    p = routing.path(i, j)
    cycles = 0
    energy = 0.0
    for r in p:
        st = lat.stages(deg[r])
        cycles += st
        energy += eng.router(st, deg[r])
    for a, b in zip(p[:-1], p[1:]):
        length = topology.link_length(a, b)
        cycles += lat.link_cycles(length)
        energy += eng.wire(length)
    return cycles, energy, len(p) - 1


def message_cost(topology, routing, i, j, latency_model, energy_model, hybrid=None):
    """Zero-load (latency cycles, energy per message, hop count) for one pair."""
    lat, eng = latency_model, energy_model
    deg = topology.degrees()
    flits = lat.flits_per_message
    route = hybrid.route(i, j) if hybrid is not None else None
    if route is None:
        cyc, e, h = _segment_cost(topology, routing, i, j, lat, eng, deg)
        return cyc + (flits - 1), flits * e, h
    a, b, ch = route
    c1, e1, h1 = _segment_cost(topology, routing, i, a, lat, eng, deg)
    c2, e2, h2 = _segment_cost(topology, routing, b, j, lat, eng, deg)
    cpf = lat.wireless_cycles_per_flit
    head = c1 + lat.mac_overhead(hybrid.members(ch)) + cpf + c2
    return head + (flits - 1) * cpf, flits * (e1 + e2 + eng.wireless_per_flit), h1 + h2 + 1


def network_edp(topology: Topology, traffic: TrafficMatrix, routing: RoutingTable,
                energy_model: EnergyModel, latency_model: LatencyModel, hybrid=None):
    """Traffic-weighted zero-load (avg latency, avg energy per message, product).

    Load-independent: it ranks candidates, the simulator measures them.
    """
    require_models(latency_model, energy_model)
    _check(topology, traffic)
    flows = traffic.flows()
    if not flows:
        return 0.0, 0.0, 0.0
    w = np.array([f for _, _, f in flows])
    lat = np.empty(len(flows))
    en = np.empty(len(flows))
    for k, (i, j, _) in enumerate(flows):
        lat[k], en[k], _ = message_cost(topology, routing, i, j, latency_model, energy_model, hybrid)
    avg_lat = float((w * lat).sum() / w.sum())
    avg_en = float((w * en).sum() / w.sum())
    return avg_lat, avg_en, avg_lat * avg_en


def traffic_weighted_hops(traffic: TrafficMatrix, routing: RoutingTable) -> tuple[float, float]:
    """(total sum f_ij h_ij, per-flit mean)."""
    total = sum(f * hops(routing, i, j) for i, j, f in traffic.flows())
    return total, (total / traffic.total if traffic.total else 0.0)


# -- CSV emitters -------------------------------------------------------------

def write_link_csv(lu: LinkUtilization, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["src", "dst", "u"])
        for (a, b), u in zip(lu.links, lu.u):
            w.writerow([a, b, repr(float(u))])


def write_cdf_csv(cdf, path, label: str = "") -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["label", "u_normalized", "cumulative_fraction"])
        for v, c in cdf:
            w.writerow([label, repr(float(v)), repr(float(c))])


def write_summary_csv(rows: list[dict], path) -> None:
    keys = list(rows[0]) if rows else ["u_mean", "u_std", "twhc", "edp"]
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=keys)
        w.writeheader()
        for r in rows:
            w.writerow({k: repr(float(v)) if isinstance(v, (float, np.floating)) else v for k, v in r.items()})


def read_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))
