"""Wireless interface placement, hybrid route selection and the slotted MAC.

Channel 0 is dedicated to CPU<->MC messages and holds one WI on every CPU
and MC router.  GPU channels 1..C each hold one MC-hosted WI (round-robin
over MCs) plus GPU-hosted WIs.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import shortest_path

from .errors import ConfigurationError, ProtocolError
from .models import LatencyModel
from .routing import RoutingTable, hop_matrix
from .topology import Placement, TileKind, Topology
from .traffic import TrafficMatrix

CPU_CHANNEL = 0
MAX_CHANNELS = 5


class WirelessInterface(NamedTuple):
    id: int
    router: int
    channel: int


class Channel(NamedTuple):
    id: int
    members: tuple[int, ...]   # WI ids, also the MAC slot order


@dataclass(frozen=True)
class WirelessPlan:
    interfaces: tuple[WirelessInterface, ...]

    def __post_init__(self):
        ids = [w.id for w in self.interfaces]
        if ids != list(range(len(ids))):
            raise ConfigurationError("WI ids must be 0..n-1 in order")
        for ch in self.channels:
            hosts = [self.interfaces[m].router for m in ch.members]
            if len(set(hosts)) != len(hosts):
                raise ConfigurationError(f"channel {ch.id} has two WIs on one router")

    @property
    def channels(self) -> tuple[Channel, ...]:
        ids = sorted({w.channel for w in self.interfaces})
        return tuple(Channel(c, tuple(w.id for w in self.interfaces if w.channel == c)) for c in ids)

    def channel(self, cid: int) -> Channel:
        for ch in self.channels:
            if ch.id == cid:
                return ch
        raise KeyError(cid)

    def hosts(self, cid: int) -> list[int]:
        return [w.router for w in self.interfaces if w.channel == cid]

    def wi_at(self, router: int, cid: int) -> int:
        for w in self.interfaces:
            if w.router == router and w.channel == cid:
                return w.id
        raise KeyError((router, cid))

    @property
    def gpu_channel_ids(self) -> list[int]:
        return [c.id for c in self.channels if c.id != CPU_CHANNEL]

    def n_wis(self, which: str = "all") -> int:
        if which == "gpu":
            return sum(1 for w in self.interfaces if w.channel != CPU_CHANNEL)
        return len(self.interfaces)

    def shortcuts(self, placement: Placement) -> list[tuple[int, int]]:
        """Router pairs given a single wireless hop: CPU-MC on channel 0, GPU-MC elsewhere."""
        out = []
        for ch in self.channels:
            hosts = [self.interfaces[m].router for m in ch.members]
            mcs = [h for h in hosts if placement.kinds[h] is TileKind.MC]
            if ch.id == CPU_CHANNEL:
                others = [h for h in hosts if placement.kinds[h] is TileKind.CPU]
            else:
                others = [h for h in hosts if placement.kinds[h] is not TileKind.MC]
            out += [(o, m) for o in others for m in mcs]
        return out

    def to_dict(self) -> dict:
        return {"interfaces": [{"id": w.id, "router": w.router, "channel": w.channel}
                               for w in self.interfaces]}

    @classmethod
    def from_dict(cls, doc: dict) -> "WirelessPlan":
        try:
            return cls(tuple(WirelessInterface(int(w["id"]), int(w["router"]), int(w["channel"]))
                             for w in doc["interfaces"]))
        except (KeyError, TypeError) as exc:
            raise ConfigurationError(f"malformed wireless plan: {exc}") from exc


# -- route selection ------------------------------------------------------------

def zero_load_costs(topology: Topology, latency_model: LatencyModel) -> np.ndarray:
    """Symmetric min header cycles between routers (routers at both ends included)."""
    n = topology.n_routers
    st = np.array([latency_model.stages(d) for d in topology.degrees()], dtype=float)
    src, dst, w = [], [], []
    for u, v in topology.edges:
        c = latency_model.link_cycles(topology.link_length(u, v)) + (st[u] + st[v]) / 2
        src += [u, v]
        dst += [v, u]
        w += [c, c]
    g = csr_matrix((w, (src, dst)), shape=(n, n))
    d = shortest_path(g, method="D", directed=False)
    return d + (st[:, None] + st[None, :]) / 2


def _cpu_mc_mask(placement: Placement) -> np.ndarray:
    k = np.array([x.value for x in placement.kinds])
    cpu, mc = k == "cpu", k == "mc"
    return (cpu[:, None] & mc[None, :]) | (mc[:, None] & cpu[None, :])


def _channel_options(cost, hosts, overhead):
    """Best (cost, a, b) over host pairs a != b for every (src, dst)."""
    n = cost.shape[0]
    best = np.full((n, n), np.inf)
    ba = np.full((n, n), -1)
    bb = np.full((n, n), -1)
    for a in hosts:
        for b in hosts:
            if a == b:
                continue
            c = cost[:, a][:, None] + overhead + cost[b, :][None, :]
            better = c < best
            best = np.where(better, c, best)
            ba = np.where(better, a, ba)
            bb = np.where(better, b, bb)
    return best, ba, bb


class HybridRoutes:
    """Per-pair choice between the wireline route and a wireless shortcut.

    CPU<->MC messages always take channel 0 when both ends host a channel-0
    WI.  Other messages may use a GPU channel when its zero-load cost
    (wireline to WI, MAC request period, one flit, wireline from WI) beats
    the wireline cost.  Costs are symmetric, so i->j and j->i are eligible
    together.
    """

    def __init__(self, topology: Topology, latency_model: LatencyModel | None = None):
        self.topology = topology
        self.plan = topology.wireless
        lat = latency_model or LatencyModel()
        n = topology.n_routers
        self.cost = zero_load_costs(topology, lat)
        self.channel = np.full((n, n), -1)
        self.src_wi_router = np.full((n, n), -1)
        self.dst_wi_router = np.full((n, n), -1)
        self._members = {}
        if self.plan is None:
            return
        cpu_mc = _cpu_mc_mask(topology.placement)
        best = self.cost.copy()
        for ch in self.plan.channels:
            hosts = self.plan.hosts(ch.id)
            self._members[ch.id] = len(hosts)
            ov = lat.mac_overhead(len(hosts)) + lat.wireless_cycles_per_flit
            if ch.id == CPU_CHANNEL:
                hs = np.zeros(n, dtype=bool)
                hs[hosts] = True
                ok = cpu_mc & hs[:, None] & hs[None, :]
                idx = np.nonzero(ok)
                self.channel[idx] = ch.id
                self.src_wi_router[idx] = idx[0]
                self.dst_wi_router[idx] = idx[1]
                continue
            c, a, b = _channel_options(self.cost, hosts, ov)
            take = (c < best) & ~cpu_mc & (self.channel != CPU_CHANNEL)
            best = np.where(take, c, best)
            self.channel = np.where(take, ch.id, self.channel)
            self.src_wi_router = np.where(take, a, self.src_wi_router)
            self.dst_wi_router = np.where(take, b, self.dst_wi_router)
        np.fill_diagonal(self.channel, -1)

    def route(self, i: int, j: int):
        """(source WI router, destination WI router, channel) or None for wireline."""
        ch = int(self.channel[i, j])
        if ch < 0:
            return None
        return int(self.src_wi_router[i, j]), int(self.dst_wi_router[i, j]), ch

    def members(self, cid: int) -> int:
        return self._members[cid]

    def wireless_share(self, traffic: TrafficMatrix) -> float:
        """Fraction of traffic eligible for a wireless shortcut."""
        if traffic.total == 0:
            return 0.0
        return float(traffic.f[self.channel >= 0].sum() / traffic.total)


# -- placement --------------------------------------------------------------------

def _flow_arrays(traffic):
    flows = [(i, j, f) for i, j, f in traffic.flows()]
    s = np.array([i for i, _, _ in flows], dtype=int)
    d = np.array([j for _, j, _ in flows], dtype=int)
    f = np.array([x for _, _, x in flows])
    return s, d, f


def _plan_from_hosts(placement: Placement, channel_hosts: dict[int, list[int]]) -> WirelessPlan:
    wis = []
    for cid in sorted(channel_hosts):
        for r in channel_hosts[cid]:
            wis.append(WirelessInterface(len(wis), r, cid))
    return WirelessPlan(tuple(wis))


class _Evaluator:
    """Traffic-weighted hop count of a partial plan, for greedy WI selection."""

    def __init__(self, topology, routing, traffic, lat):
        self.lat = lat
        self.cost = zero_load_costs(topology, lat)
        self.hops = hop_matrix(routing).astype(float)
        s, d, f = _flow_arrays(traffic)
        self.s, self.d, self.f = s, d, f
        cpu_mc = _cpu_mc_mask(topology.placement)
        self.gpu_eligible = ~cpu_mc[s, d]
        self.wire_cost = self.cost[s, d]
        self.wire_hops = self.hops[s, d]

    def channel_option(self, hosts):
        """(cost, hops) of the best route through one GPU channel, per flow."""
        n_fl = len(self.s)
        if len(hosts) < 2 or n_fl == 0:
            return np.full(n_fl, np.inf), np.full(n_fl, np.inf)
        h = np.array(hosts)
        ov = self.lat.mac_overhead(len(h)) + self.lat.wireless_cycles_per_flit
        ca = self.cost[self.s][:, h]                  # (F, H)
        cb = self.cost[h][:, self.d].T                # (F, H)
        tot = ca[:, :, None] + ov + cb[:, None, :]
        diag = np.eye(len(h), dtype=bool)
        tot[:, diag] = np.inf
        flat = tot.reshape(len(self.s), -1).argmin(axis=1)
        ia, ib = np.unravel_index(flat, (len(h), len(h)))
        best = tot.reshape(len(self.s), -1)[np.arange(len(self.s)), flat]
        hop = self.hops[self.s, h[ia]] + 1 + self.hops[h[ib], self.d]
        return best, hop

    def twhc(self, options):
        cost = self.wire_cost.copy()
        hop = self.wire_hops.copy()
        for c, h in options:
            take = (c < cost) & self.gpu_eligible
            cost = np.where(take, c, cost)
            hop = np.where(take, h, hop)
        return float((self.f * hop).sum()), float((self.f * cost).sum())


def place_wis(topology: Topology, traffic: TrafficMatrix, wi_budget: int, channel_count: int,
              routing: RoutingTable | None = None, mode: str = "greedy", rng=None,
              latency_model: LatencyModel | None = None,
              max_channels: int | None = MAX_CHANNELS) -> WirelessPlan | None:
    """Place ``wi_budget`` GPU-channel WIs over ``channel_count`` channels.

    Channel 0 (CPU<->MC) is added on top of the budget.  Each GPU channel
    gets one MC-hosted WI and then GPU-hosted WIs, picked greedily (round by
    round, channel by channel) for the largest drop in traffic-weighted hop
    count, ties to the lower cost then lower router id.  ``mode="random"``
    picks GPU hosts uniformly instead.  A zero budget returns None.
    """
    from .routing import route_for

    if wi_budget == 0 or channel_count == 0:
        return None
    if channel_count < 0 or wi_budget < 0:
        raise ConfigurationError("wi_budget and channel_count must be non-negative")
    if wi_budget % channel_count:
        raise ConfigurationError(f"wi_budget {wi_budget} not divisible by {channel_count} channels")
    if wi_budget < channel_count:
        raise ConfigurationError("budget too small: every GPU channel needs an MC-hosted WI")
    if max_channels is not None and channel_count + 1 > max_channels:
        raise ConfigurationError(
            f"{channel_count} GPU channels + the CPU channel exceed {max_channels} channels")
    pl = topology.placement
    mcs = pl.routers_of(TileKind.MC)
    cpus = pl.routers_of(TileKind.CPU)
    gpus = pl.routers_of(TileKind.GPU)
    if not mcs:
        raise ConfigurationError("placement has no MC to host WIs")
    per = wi_budget // channel_count
    if (per - 1) * channel_count > len(gpus):
        raise ConfigurationError(f"not enough GPU tiles for {wi_budget} WIs")
    lat = latency_model or LatencyModel()
    topology = topology.with_wireless(None)
    if routing is None:
        routing = route_for(topology)

    hosts = {CPU_CHANNEL: sorted(cpus + mcs)} if cpus else {}
    gpu_ch = list(range(1, channel_count + 1))
    for k, cid in enumerate(gpu_ch):
        hosts[cid] = [mcs[k % len(mcs)]]

    if mode == "random":
        rng = np.random.default_rng(rng)
        picked = rng.choice(gpus, size=(per - 1) * channel_count, replace=False)
        for k, g in enumerate(picked):
            hosts[gpu_ch[k % channel_count]].append(int(g))
        return _plan_from_hosts(pl, hosts)
    if mode != "greedy":
        raise ConfigurationError(f"unknown WI placement mode {mode!r}")

    ev = _Evaluator(topology, routing, traffic, lat)
    options = {cid: ev.channel_option(hosts[cid]) for cid in gpu_ch}
    used = set()
    for _ in range(per - 1):
        for cid in gpu_ch:
            base_twhc, _ = ev.twhc(options.values())
            best = None
            for g in gpus:
                if g in used:
                    continue
                trial = dict(options)
                trial[cid] = ev.channel_option(hosts[cid] + [g])
                t, c = ev.twhc(trial.values())
                key = (t - base_twhc, c, g)
                if best is None or key < best[0]:
                    best = (key, g, trial[cid])
            _, g, opt = best
            hosts[cid].append(g)
            used.add(g)
            options[cid] = opt
    return _plan_from_hosts(pl, hosts)


def effective_twhc(topology: Topology, traffic: TrafficMatrix, routing: RoutingTable,
                   latency_model: LatencyModel | None = None) -> float:
    """Traffic-weighted hops when eligible flows take their wireless shortcut."""
    lat = latency_model or LatencyModel()
    ev = _Evaluator(topology, routing, traffic, lat)
    plan = topology.wireless
    opts = [] if plan is None else [ev.channel_option(plan.hosts(c)) for c in plan.gpu_channel_ids]
    twhc, _ = ev.twhc(opts)
    if plan is not None and CPU_CHANNEL in [c.id for c in plan.channels]:
        hs = set(plan.hosts(CPU_CHANNEL))
        cpu_mc = ~ev.gpu_eligible & np.array([a in hs and b in hs for a, b in zip(ev.s, ev.d)], dtype=bool)
        twhc -= float((ev.f[cpu_mc] * (ev.wire_hops[cpu_mc] - 1)).sum())
    return twhc


# -- MAC ---------------------------------------------------------------------------

FREE, REQUEST, GRANTED = "free", "request", "granted"


@dataclass(frozen=True)
class MacState:
    """Medium status of one channel plus its grant history.

    ``last_grant`` holds, per member WI, the sequence number of its most
    recent grant (-1 if never granted); the selection rule favours the
    least-recently-granted requester, which under continuous requesting is
    the one with the fewest grants.
    """

    members: tuple[int, ...]
    status: str = FREE
    slot: int = 0
    holder: int | None = None
    grants: tuple[int, ...] = ()
    last_grant: tuple[int, ...] = ()
    sequence: int = 0

    def __post_init__(self):
        n = len(self.members)
        if not self.grants:
            object.__setattr__(self, "grants", (0,) * n)
        if not self.last_grant:
            object.__setattr__(self, "last_grant", (-1,) * n)

    @property
    def n_slots(self) -> int:
        return len(self.members)

    def grant_count(self, wi: int) -> int:
        return self.grants[self.members.index(wi)]


def mac_arbitrate(channel: Channel, requests, state: MacState) -> tuple[int | None, MacState]:
    """Resolve one request period.

    A busy medium grants nobody (requesters fall back to wireline).  A free
    medium with requests grants the least-recently-granted requester,
    lowest WI id on ties, after the N-slot request period.
    """
    requests = set(requests)
    bad = requests - set(channel.members)
    if bad:
        raise ProtocolError(f"WIs {sorted(bad)} are not members of channel {channel.id}")
    if state.members != channel.members:
        raise ProtocolError("MAC state belongs to a different channel")
    if state.status == GRANTED or not requests:
        return None, state
    idx = {m: k for k, m in enumerate(state.members)}
    winner = min(requests, key=lambda w: (state.last_grant[idx[w]], w))
    k = idx[winner]
    grants = list(state.grants)
    grants[k] += 1
    last = list(state.last_grant)
    last[k] = state.sequence
    return winner, replace(state, status=GRANTED, slot=0, holder=winner,
                           grants=tuple(grants), last_grant=tuple(last), sequence=state.sequence + 1)


def mac_release(state: MacState) -> MacState:
    return replace(state, status=FREE, holder=None, slot=0)


@dataclass
class MacTrace:
    """Cycle-level record of one simulated channel."""

    members: tuple[int, ...]
    cycles: int
    arbitrations: list = field(default_factory=list)   # (cycle, requesters, winner, persistent)
    max_transmitters: int = 0
    waits: list = field(default_factory=list)          # grants to others between request and own grant

    @property
    def winners(self) -> list[int]:
        return [w for _, _, w, _ in self.arbitrations]

    def grant_counts(self) -> dict[int, int]:
        out = {m: 0 for m in self.members}
        for w in self.winners:
            out[w] += 1
        return out


def simulate_mac(n_members: int = 6, cycles: int = 100_000, request_prob: float = 0.2,
                 flits: int = 4, phase_cycles: int = 2000, seed: int = 0,
                 latency_model: LatencyModel | None = None) -> MacTrace:
    """Drive one channel through random request patterns.

    Every ``phase_cycles`` a random subset of members becomes persistent
    (re-requests right after each grant); the rest raise a request with
    probability ``request_prob`` per idle cycle.  A raised request stays up
    until granted.
    """
    if n_members < 1 or cycles < 1 or flits < 1:
        raise ConfigurationError("members, cycles and flits must be positive")
    lat = latency_model or LatencyModel()
    rng = np.random.default_rng(seed)
    members = tuple(range(n_members))
    channel = Channel(0, members)
    state = MacState(members)
    trace = MacTrace(members, cycles)
    period = lat.mac_overhead(n_members)
    tx_time = flits * lat.wireless_cycles_per_flit
    pending: dict[int, int] = {}        # wi -> grant count on channel when request raised
    persistent: frozenset = frozenset()
    n_grants = 0
    busy_until = -1
    phase_end = -1
    t = 0
    while t < cycles:
        if t >= phase_end:
            persistent = frozenset(np.flatnonzero(rng.random(n_members) < 0.5).tolist())
            phase_end = t + phase_cycles
        if t < busy_until:
            t = busy_until
            continue
        for w in members:
            if w not in pending and (w in persistent or rng.random() < request_prob):
                pending[w] = n_grants
        if not pending:
            t += 1
            continue
        # request period: one slot per member, then selection
        snapshot = frozenset(pending)
        winner, state = mac_arbitrate(channel, snapshot, state)
        start = t + period
        trace.arbitrations.append((start, snapshot, winner, persistent))
        trace.waits.append(n_grants - pending.pop(winner))
        n_grants += 1
        # exactly one WI drives the medium during the transfer
        transmitters = sum(1 for w in members if state.holder == w)
        trace.max_transmitters = max(trace.max_transmitters, transmitters)
        busy_until = start + tx_time
        state = mac_release(state)
        t = start
    return trace


def wireless_hop_latency(members: int, flits: int, arbitrated: bool = True,
                         latency_model: LatencyModel | None = None) -> int:
    """Cycles for one wireless hop: request period and selection (if arbitrated) plus flit time."""
    if flits < 1:
        raise ConfigurationError("a wireless transfer carries at least one flit")
    lat = latency_model or LatencyModel()
    mac = lat.mac_overhead(members) if arbitrated else 0
    return mac + flits * lat.wireless_cycles_per_flit


def area_overhead(plan_or_count, die_mm: float = 20.0, wi_area: float = 0.25, which: str = "all") -> float:
    """Silicon area fraction taken by WI transceivers (die_mm x die_mm die)."""
    if die_mm <= 0 or wi_area <= 0:
        raise ConfigurationError("die size and WI area must be positive")
    if plan_or_count is None:
        n = 0
    elif isinstance(plan_or_count, WirelessPlan):
        n = plan_or_count.n_wis(which)
    else:
        n = int(plan_or_count)
    return n * wi_area / (die_mm * die_mm)


# -- sweeps ------------------------------------------------------------------------

@dataclass
class SweepRow:
    value: int
    edp: float
    latency: float
    energy: float
    wireless_utilization: float
    report: object = field(default=None, repr=False)


def _sweep(base, preset, peak_rate, affinity, sim_config, plans, routing):
    from .netsim import run_layer_sequence

    rows = []
    for value, plan in plans:
        topo = base.with_wireless(plan)
        agg = run_layer_sequence(topo, routing, preset, sim_config, peak_rate, affinity)
        rows.append(SweepRow(value, agg.edp, agg.avg_latency, agg.avg_energy,
                             agg.wireless_utilization, agg))
    return rows


def _placement_traffic(base, preset, peak_rate, affinity):
    from .traffic import aggregate_matrix

    return aggregate_matrix(base.placement, preset, peak_rate, affinity)


def sweep_wi_count(base: Topology, preset, peak_rate: float, sim_config, counts,
                   channel_count: int = 4, routing: RoutingTable | None = None,
                   mode: str = "greedy", affinity: str = "uniform") -> list[SweepRow]:
    """Regenerate the WI plan for each GPU-WI budget and simulate the layer sequence.

    A budget of 0 leaves the network wireline-only.
    """
    from .routing import route_for

    if not counts:
        raise ConfigurationError("empty WI count list")
    wired = base.with_wireless(None)
    routing = routing or route_for(wired)
    tm = _placement_traffic(wired, preset, peak_rate, affinity)
    plans = [(c, place_wis(wired, tm, c, channel_count if c else 0, routing, mode,
                           latency_model=sim_config.latency)) for c in counts]
    return _sweep(wired, preset, peak_rate, affinity, sim_config, plans, routing)


def sweep_channels(base: Topology, preset, peak_rate: float, sim_config, channel_counts,
                   wis_per_channel: int = 6, routing: RoutingTable | None = None,
                   mode: str = "greedy", affinity: str = "uniform") -> list[SweepRow]:
    """Vary the number of GPU-MC channels at a fixed WI count per channel."""
    from .routing import route_for

    if not channel_counts:
        raise ConfigurationError("empty channel count list")
    wired = base.with_wireless(None)
    routing = routing or route_for(wired)
    tm = _placement_traffic(wired, preset, peak_rate, affinity)
    plans = [(c, place_wis(wired, tm, c * wis_per_channel, c, routing, mode,
                           latency_model=sim_config.latency, max_channels=None))
             for c in channel_counts]
    return _sweep(wired, preset, peak_rate, affinity, sim_config, plans, routing)
