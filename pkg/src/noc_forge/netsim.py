"""Cycle-driven flit-level NoC simulator.

Wormhole switching with virtual channels and credit flow control.  A flit
arriving at a router at cycle ``a`` may cross the switch at ``a + S - 1``
(``S`` pipeline stages), spends the link's cycle count on the wire and
lands downstream one cycle later; ejection completes the cycle after the
switch.  Wireless hops eject into a transmit queue at the source WI, win
the channel through the slotted MAC and re-enter the network from a receive
queue at the destination WI.
"""
from __future__ import annotations

import heapq
import json
import logging
import math
from collections import deque
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import ConfigurationError, PreconditionError, ProtocolError
from .metrics import message_cost, network_edp
from .models import EnergyModel, LatencyModel
from .routing import XYYX, RoutingTable, is_deadlock_free
from .topology import TileKind, Topology
from .traffic import TrafficMatrix, build_many_to_few
from .wireless import Channel, HybridRoutes, MacState, mac_arbitrate, mac_release

log = logging.getLogger(__name__)

_LINK, _EJECT, _WTX = 0, 1, 2
_FREE, _REQUEST, _TRANSMIT = 0, 1, 2


@dataclass(frozen=True)
class SimConfig:
    latency: LatencyModel = field(default_factory=LatencyModel)
    energy: EnergyModel = field(default_factory=EnergyModel)
    buffer_depth: int = 4
    virtual_channels: int = 2
    warmup_cycles: int = 1000
    measure_cycles: int = 10000
    drain_cycles: int = 20000
    max_backlog: int = 20000           # queued messages that flag saturation
    rng_seed: int = 0
    local_ports: dict = field(default_factory=lambda: {"cpu": 1, "gpu": 1, "mc": 4})
    clock_ghz: float = 2.5             # informational

    def __post_init__(self):
        for k in ("buffer_depth", "virtual_channels", "measure_cycles", "max_backlog"):
            if getattr(self, k) < 1:
                raise ConfigurationError(f"sim config {k} must be >= 1")
        for k in ("warmup_cycles", "drain_cycles"):
            if getattr(self, k) < 0:
                raise ConfigurationError(f"sim config {k} must be >= 0")
        for kind in ("cpu", "gpu", "mc"):
            if self.local_ports.get(kind, 1) < 1:
                raise ConfigurationError(f"local_ports[{kind}] must be >= 1")

    @property
    def flits_per_message(self) -> int:
        return self.latency.flits_per_message

    def with_(self, **kw) -> "SimConfig":
        d = {f: getattr(self, f) for f in self.__dataclass_fields__}
        d.update(kw)
        return SimConfig(**d)


@dataclass
class SimReport:
    avg_latency: float | None          # cycles per message, None without messages
    cpu_mc_latency: float | None
    throughput: float                  # accepted flits/cycle/node
    offered_load: float                # configured flits/cycle/node
    total_energy: float
    avg_energy: float | None
    edp: float | None
    messages: int
    injected_flits: int
    delivered_flits: int
    wireless_messages: int
    wireless_utilization: float        # share of measured messages that took a wireless hop
    wireless_mc_to_core_flits: int
    wireless_core_to_mc_flits: int
    fallback_messages: int
    grants: int
    link_utilization: dict             # "src-dst" -> measured flits/cycle
    drained: bool
    saturated: bool
    cycles: int

    @property
    def wireless_asymmetry(self) -> float | None:
        if not self.wireless_core_to_mc_flits:
            return None
        return self.wireless_mc_to_core_flits / self.wireless_core_to_mc_flits

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=1) + "\n"


# -- internal structures -----------------------------------------------------------

class _Msg:
    __slots__ = ("id", "src", "dst", "created", "steps", "n", "delivered", "measured",
                 "energy", "channel", "tx_arr", "cpu_mc", "direction", "steps_rx")

    def __init__(self, mid, src, dst, created, steps, n, measured, energy, channel, cpu_mc, direction):
        self.id = mid
        self.src = src
        self.dst = dst
        self.created = created
        self.steps = steps          # [(router, out port index, vc class)], one per router visit
        self.n = n
        self.delivered = 0
        self.measured = measured
        self.energy = energy
        self.channel = channel      # wireless channel used, or -1
        self.tx_arr = []
        self.cpu_mc = cpu_mc
        self.direction = direction  # +1 MC->core, -1 core->MC, 0 otherwise
        self.steps_rx = -1          # step index of the receiving WI router


class _VC:
    __slots__ = ("buf", "out", "ovc", "idx")

    def __init__(self, idx):
        self.buf = deque()
        self.out = -1
        self.ovc = -1
        self.idx = idx


class _InPort:
    __slots__ = ("vcs", "up_out", "up_delay")

    def __init__(self, n_vcs, up_out=None, up_delay=0):
        self.vcs = [_VC(k) for k in range(n_vcs)]
        self.up_out = up_out        # upstream _Out for credit return
        self.up_delay = up_delay


class _Out:
    __slots__ = ("kind", "dst", "dst_in", "delay", "credits", "owner", "cap", "count", "channel", "key")

    def __init__(self, kind, cap=1, dst=-1, dst_in=-1, delay=0, n_vcs=0, depth=0, channel=-1, key=None):
        self.kind = kind
        self.dst = dst
        self.dst_in = dst_in
        self.delay = delay
        self.credits = [depth] * n_vcs
        self.owner = [None] * n_vcs
        self.cap = cap
        self.count = 0
        self.channel = channel
        self.key = key


class _Router:
    __slots__ = ("id", "stages", "inports", "outs", "rr", "nbuf", "out_of", "inj", "rx", "inj_next")

    def __init__(self, rid, stages):
        self.id = rid
        self.stages = stages
        self.inports = []
        self.outs = []
        self.rr = []
        self.nbuf = 0
        self.out_of = {}            # neighbour -> out index
        self.inj = []               # injection inport indices
        self.rx = {}                # channel -> inport index
        self.inj_next = 0


class _Chan:
    __slots__ = ("ch", "hosts", "slot", "queues", "status", "start", "decide_at", "holder",
                 "msg", "sent", "next_send", "free_at", "state", "tx_busy_until", "grants")

    def __init__(self, ch: Channel, hosts):
        self.ch = ch
        self.hosts = hosts
        self.slot = {r: k for k, r in enumerate(hosts)}
        self.queues = [deque() for _ in hosts]
        self.status = _FREE
        self.start = 0
        self.decide_at = 0
        self.holder = -1
        self.msg = None
        self.sent = 0
        self.next_send = 0
        self.free_at = 0
        self.state = MacState(ch.members)
        self.tx_busy_until = -1
        self.grants = 0


class _Network:
    def __init__(self, topology: Topology, routing: RoutingTable, cfg: SimConfig, hybrid):
        lat = cfg.latency
        self.topology = topology
        self.routing = routing
        self.cfg = cfg
        self.lat = lat
        self.hybrid = hybrid
        self.V = cfg.virtual_channels
        if routing.scheme == XYYX and self.V < 2:
            raise ConfigurationError("XY+YX routing needs at least 2 virtual channels")
        n = topology.n_routers
        deg = topology.degrees()
        self.deg = deg
        kinds = topology.placement.kinds
        self.routers = [_Router(r, lat.stages(int(deg[r]))) for r in range(n)]
        # link inports first so credit bookkeeping can reference them
        for r in range(n):
            R = self.routers[r]
            for v in topology.neighbors(r):
                R.out_of[v] = len(R.outs)
                R.outs.append(None)
        for r in range(n):
            R = self.routers[r]
            for v in topology.neighbors(r):
                D = self.routers[v]
                delay = lat.link_cycles(topology.link_length(r, v))
                # long pipelined wires get extra slots covering their credit round trip
                depth = cfg.buffer_depth + 2 * (delay - 1)
                out = _Out(_LINK, 1, v, len(D.inports), delay, self.V, depth, key=(r, v))
                R.outs[R.out_of[v]] = out
                D.inports.append(_InPort(self.V, out, delay))
        for r in range(n):
            R = self.routers[r]
            ports = cfg.local_ports.get(kinds[r].value, 1)
            for _ in range(ports):
                R.inj.append(len(R.inports))
                R.inports.append(_InPort(1))
            R.outs.append(_Out(_EJECT, ports))
        self.chans = {}
        self.wtx = {}                # (router, channel) -> out index
        plan = topology.wireless
        if plan is not None and hybrid is not None:
            for ch in plan.channels:
                hosts = plan.hosts(ch.id)
                self.chans[ch.id] = _Chan(ch, hosts)
                for h in hosts:
                    R = self.routers[h]
                    self.wtx[(h, ch.id)] = len(R.outs)
                    R.outs.append(_Out(_WTX, 1, channel=ch.id))
                    R.rx[ch.id] = len(R.inports)
                    R.inports.append(_InPort(1))
        for R in self.routers:
            R.rr = [0] * len(R.outs)
        if routing.scheme == XYYX:
            self.allowed = [[c] for c in range(2)]
        else:
            self.allowed = [list(range(self.V))] * 2
        self.mc = np.array([k is TileKind.MC for k in kinds])
        self.cpu = np.array([k is TileKind.CPU for k in kinds])
        self._seg_cache = {}
        self._energy_cache = {}

    def segment(self, i, j, final_out=None, channel=-1):
        """Steps along the wireline route i->j, finishing at ``final_out`` (eject default)."""
        key = (i, j, channel)
        s = self._seg_cache.get(key)
        if s is None:
            p = self.routing.path(i, j)
            cls = self.routing.vc_class(i, j)
            s = []
            for a, b in zip(p[:-1], p[1:]):
                s.append((a, self.routers[a].out_of[b], cls))
            last = p[-1]
            out = self.wtx[(last, channel)] if channel >= 0 else len(self.topology.neighbors(last))
            s.append((last, out, cls))
            s = self._seg_cache[key] = tuple(s)
        return s

    def energy(self, i, j, wireless):
        key = (i, j, wireless)
        e = self._energy_cache.get(key)
        if e is None:
            h = self.hybrid if wireless else None
            _, e, _ = message_cost(self.topology, self.routing, i, j, self.lat, self.cfg.energy, h)
            self._energy_cache[key] = e
        return e


def _arrivals(traffic: TrafficMatrix, flits: int, horizon: int, rng: np.random.Generator):
    """Bernoulli message arrivals per flow as (times, src, dst), time-sorted."""
    ts, ss, ds = [], [], []
    for i, j, f in traffic.flows():
        p = f / flits
        if p > 1:
            raise ConfigurationError(f"flow {i}->{j} offers {f} flits/cycle, above one message per cycle")
        times = []
        t = 0
        while t < horizon:
            gaps = rng.geometric(p, size=max(16, int(p * (horizon - t) * 1.1) + 16))
            c = t + np.cumsum(gaps)
            times.append(c)
            t = int(c[-1])
        c = np.concatenate(times) if times else np.empty(0, dtype=int)
        c = c[c < horizon]
        ts.append(c)
        ss.append(np.full(len(c), i))
        ds.append(np.full(len(c), j))
    if not ts:
        return np.empty(0, dtype=int), np.empty(0, dtype=int), np.empty(0, dtype=int)
    t = np.concatenate(ts)
    s = np.concatenate(ss)
    d = np.concatenate(ds)
    order = np.lexsort((d, s, t))
    return t[order], s[order], d[order]


def simulate(topology: Topology, routing: RoutingTable, traffic: TrafficMatrix,
             sim_config: SimConfig | None = None, hybrid: HybridRoutes | None = None,
             check_deadlock: bool = True) -> SimReport:
    """Run one workload: warmup, measurement window, then drain.

    Messages created during the measurement window are measured.  Generation
    stops at the end of the window; the run then drains until empty or until
    ``drain_cycles`` pass, in which case ``saturated`` is set.
    """
    cfg = sim_config or SimConfig()
    if traffic.n != topology.n_routers:
        raise PreconditionError("traffic and topology disagree on router count")
    if routing.n != topology.n_routers:
        raise PreconditionError("routing table and topology disagree on router count")
    for u, v in topology.edges:
        if routing.next_hop_table.shape[1] <= max(u, v):
            raise PreconditionError("routing table does not cover the topology")
    if check_deadlock and traffic.flows() and not is_deadlock_free(
            routing, [(i, j) for i, j, _ in traffic.flows()]):
        raise PreconditionError("routing has a cyclic channel dependency")
    if topology.wireless is not None and hybrid is None:
        hybrid = HybridRoutes(topology, cfg.latency)
    net = _Network(topology, routing, cfg, hybrid)
    return _run(net, traffic)


def _run(net: _Network, traffic: TrafficMatrix) -> SimReport:
    cfg, lat = net.cfg, net.lat
    flits = lat.flits_per_message
    warm, meas = cfg.warmup_cycles, cfg.measure_cycles
    gen_end = warm + meas
    rng = np.random.default_rng(cfg.rng_seed)
    a_t, a_s, a_d = _arrivals(traffic, flits, gen_end, rng)
    a_t, a_s, a_d = a_t.tolist(), a_s.tolist(), a_d.tolist()
    n_arr = len(a_t)
    routers = net.routers
    chans = net.chans
    hybrid = net.hybrid
    allowed = net.allowed
    cpf = lat.wireless_cycles_per_flit
    slot_c, sel_c = lat.mac_slot_cycles, lat.mac_selection_cycles

    credits = {}                # time -> [(out, vc idx)]
    credit_times = []
    active = set()
    backlog = 0                 # messages created but not yet fully injected
    ai = 0
    now = 0
    mid = 0
    in_flight_msgs = 0
    injected = delivered = 0
    stats = dict(lat_sum=0, lat_n=0, cm_sum=0, cm_n=0, energy=0.0, wl=0, fb=0,
                 m2c=0, c2m=0, meas_flits=0)
    saturated = False
    drain_limit = gen_end + cfg.drain_cycles

    def put(D, ip, vc_idx, rec):
        D.inports[ip].vcs[vc_idx].buf.append(rec)
        D.nbuf += 1
        active.add(D.id)

    def deliver(msg, t):
        nonlocal delivered, in_flight_msgs
        msg.delivered += 1
        delivered += 1
        if msg.delivered == msg.n:
            in_flight_msgs -= 1
            if msg.measured:
                L = t - msg.created
                stats["lat_sum"] += L
                stats["lat_n"] += 1
                stats["meas_flits"] += msg.n
                if msg.cpu_mc:
                    stats["cm_sum"] += L
                    stats["cm_n"] += 1

    while True:
        moved = False
        # credits
        while credit_times and credit_times[0] <= now:
            t = heapq.heappop(credit_times)
            for out, k in credits.pop(t):
                out.credits[k] += 1
            moved = True

        # channels
        for cid, C in chans.items():
            if C.status == _FREE:
                if now >= C.free_at:
                    for q in C.queues:
                        if q and q[0].tx_arr[0] <= now:
                            C.status = _REQUEST
                            C.start = now
                            C.decide_at = now + len(C.hosts) * slot_c + sel_c
                            moved = True
                            break
            if C.status == _REQUEST and now >= C.decide_at:
                reqs = set()
                for k, q in enumerate(C.queues):
                    if q and q[0].tx_arr[0] <= C.start + k * slot_c:
                        reqs.add(C.ch.members[k])
                winner, C.state = mac_arbitrate(C.ch, reqs, C.state)
                if winner is None:
                    raise ProtocolError(f"channel {cid}: request period without requesters")
                C.holder = C.ch.members.index(winner)
                C.msg = C.queues[C.holder].popleft()
                C.sent = 0
                C.next_send = now
                C.status = _TRANSMIT
                C.grants += 1
                moved = True
            if C.status == _TRANSMIT and now >= C.next_send:
                m = C.msg
                if len(m.tx_arr) > C.sent and m.tx_arr[C.sent] <= now:
                    if C.tx_busy_until > now:
                        raise ProtocolError(f"channel {cid}: overlapping transmissions")
                    recv = now + cpf
                    C.tx_busy_until = recv
                    # the receiving router is the first step of the second segment
                    pos = m.steps_rx
                    b = m.steps[pos][0]
                    D = routers[b]
                    put(D, D.rx[cid], 0, [m, C.sent, recv + D.stages - 1, pos])
                    if m.measured:
                        if m.direction > 0:
                            stats["m2c"] += 1
                        elif m.direction < 0:
                            stats["c2m"] += 1
                    C.sent += 1
                    C.next_send = recv
                    moved = True
                    if C.sent == m.n:
                        q = C.queues[C.holder]
                        if q and q[0].tx_arr and q[0].tx_arr[0] <= now:
                            # holder continues its burst without a new request period
                            C.msg = q.popleft()
                            C.sent = 0
                            continue
                        C.status = _FREE
                        C.free_at = recv
                        C.msg = None
                        C.state = mac_release(C.state)

        # injection
        while ai < n_arr and a_t[ai] <= now and not saturated:
            s, d = a_s[ai], a_d[ai]
            measured = warm <= a_t[ai] < gen_end
            route = hybrid.route(s, d) if hybrid is not None else None
            ch = -1
            if route is not None:
                a, b, c = route
                if chans[c].status != _FREE:
                    route = None
                    if measured:
                        stats["fb"] += 1
                else:
                    ch = c
            if route is None:
                steps = net.segment(s, d)
                rx_pos = -1
            else:
                seg1 = net.segment(s, a, channel=ch)
                steps = seg1 + net.segment(b, d)
                rx_pos = len(seg1)
            cpu_mc = bool((net.cpu[s] and net.mc[d]) or (net.mc[s] and net.cpu[d]))
            direction = 1 if net.mc[s] and not net.mc[d] else (-1 if net.mc[d] and not net.mc[s] else 0)
            m = _Msg(mid, s, d, now, steps, flits, measured, net.energy(s, d, ch >= 0), ch, cpu_mc, direction)
            m.steps_rx = rx_pos
            mid += 1
            in_flight_msgs += 1
            if measured:
                stats["energy"] += m.energy
                if ch >= 0:
                    stats["wl"] += 1
            R = routers[s]
            ip = R.inj[R.inj_next]
            R.inj_next = (R.inj_next + 1) % len(R.inj)
            ready = now + R.stages - 1
            vc = R.inports[ip].vcs[0]
            for k in range(flits):
                vc.buf.append([m, k, ready, 0])
            R.nbuf += flits
            active.add(s)
            injected += flits
            backlog += 1
            ai += 1
            moved = True
        if backlog > cfg.max_backlog and not saturated:
            saturated = True

        # routers
        for r in sorted(active):
            R = routers[r]
            req = {}
            for ip_i, ip in enumerate(R.inports):
                for vc in ip.vcs:
                    buf = vc.buf
                    if buf and buf[0][2] <= now:
                        out = vc.out
                        if out < 0:
                            fl = buf[0]
                            out = fl[0].steps[fl[3]][1]
                        if out in req:
                            req[out].append((ip_i, vc))
                        else:
                            req[out] = [(ip_i, vc)]
            if not req:
                continue
            used = set()
            n_in = len(R.inports)
            for out, cands in req.items():
                op = R.outs[out]
                start = R.rr[out]
                if len(cands) > 1:
                    cands.sort(key=lambda c: (c[0] - start) % n_in)
                sent = 0
                for ip_i, vc in cands:
                    if sent >= op.cap:
                        break
                    if ip_i in used:
                        continue
                    fl = vc.buf[0]
                    kind = op.kind
                    if kind == _LINK:
                        if vc.out < 0:
                            cls = fl[0].steps[fl[3]][2]
                            ovc = -1
                            for k in allowed[cls]:
                                if op.owner[k] is None:
                                    ovc = k
                                    break
                            if ovc < 0:
                                continue
                            op.owner[ovc] = vc
                            vc.out = out
                            vc.ovc = ovc
                        ovc = vc.ovc
                        if op.credits[ovc] <= 0:
                            continue
                        vc.buf.popleft()
                        op.credits[ovc] -= 1
                        D = routers[op.dst]
                        if fl[1] == 0:
                            fl[3] += 1
                        fl[2] = now + op.delay + D.stages
                        put(D, op.dst_in, ovc, fl)
                        if warm <= now < gen_end:
                            op.count += 1
                        if fl[1] == fl[0].n - 1:
                            op.owner[ovc] = None
                    else:
                        if vc.out < 0:
                            vc.out = out
                        vc.buf.popleft()
                        m = fl[0]
                        if kind == _EJECT:
                            deliver(m, now + 1)
                        else:
                            m.tx_arr.append(now + 1)
                            if fl[1] == 0:
                                C = chans[op.channel]
                                C.queues[C.slot[r]].append(m)
                    R.nbuf -= 1
                    if fl[1] == fl[0].n - 1:
                        vc.out = -1
                        vc.ovc = -1
                    upin = R.inports[ip_i]
                    if upin.up_out is not None:
                        t = now + upin.up_delay
                        if t in credits:
                            credits[t].append((upin.up_out, vc.idx))
                        else:
                            credits[t] = [(upin.up_out, vc.idx)]
                            heapq.heappush(credit_times, t)
                    if ip_i in R.inj and fl[1] == fl[0].n - 1:
                        backlog -= 1
                    used.add(ip_i)
                    sent += 1
                    R.rr[out] = ip_i + 1
                    moved = True
            if R.nbuf == 0:
                active.discard(r)

        # termination
        done_gen = ai >= n_arr or saturated
        if done_gen and in_flight_msgs == 0 and not active and all(
                C.status == _FREE and not any(C.queues) for C in chans.values()):
            break
        if now >= drain_limit or (saturated and now >= drain_limit):
            saturated = True
            break
        if moved:
            now += 1
            continue
        nxt = math.inf
        if ai < n_arr and not saturated:
            nxt = a_t[ai]
        if credit_times:
            nxt = min(nxt, credit_times[0])
        for C in chans.values():
            if C.status == _REQUEST:
                nxt = min(nxt, C.decide_at)
            elif C.status == _TRANSMIT:
                m = C.msg
                if len(m.tx_arr) > C.sent:
                    nxt = min(nxt, max(C.next_send, m.tx_arr[C.sent]))
            elif any(C.queues):
                heads = [q[0].tx_arr[0] for q in C.queues if q]
                nxt = min(nxt, max(C.free_at, min(heads)))
        for r in active:
            for ip in routers[r].inports:
                for vc in ip.vcs:
                    if vc.buf:
                        t = vc.buf[0][2]
                        if t > now:
                            nxt = min(nxt, t)
        if nxt == math.inf:
            if in_flight_msgs:
                log.warning("simulation stalled with %d messages in flight", in_flight_msgs)
                saturated = True
            break
        now = max(now + 1, int(nxt))

    n = net.topology.n_routers
    drained = in_flight_msgs == 0 and ai >= n_arr
    msgs = stats["lat_n"]
    avg_lat = stats["lat_sum"] / msgs if msgs else None
    measured_created = sum(1 for t in a_t if warm <= t < gen_end)
    avg_e = stats["energy"] / measured_created if measured_created else None
    links = {}
    for R in routers:
        for op in R.outs:
            if op.kind == _LINK:
                links[f"{op.key[0]}-{op.key[1]}"] = op.count / meas
    grants = sum(C.grants for C in chans.values())
    return SimReport(
        avg_latency=avg_lat,
        cpu_mc_latency=stats["cm_sum"] / stats["cm_n"] if stats["cm_n"] else None,
        throughput=stats["meas_flits"] / (meas * n),
        offered_load=traffic.total / n,
        total_energy=stats["energy"],
        avg_energy=avg_e,
        edp=avg_lat * avg_e if avg_lat is not None and avg_e is not None else None,
        messages=msgs,
        injected_flits=injected,
        delivered_flits=delivered,
        wireless_messages=stats["wl"],
        wireless_utilization=stats["wl"] / measured_created if measured_created else 0.0,
        wireless_mc_to_core_flits=stats["m2c"],
        wireless_core_to_mc_flits=stats["c2m"],
        fallback_messages=stats["fb"],
        grants=grants,
        link_utilization=links,
        drained=drained and not saturated,
        saturated=saturated,
        cycles=now,
    )


# -- experiment drivers -------------------------------------------------------------

def zero_load_latency(topology: Topology, routing: RoutingTable, traffic: TrafficMatrix,
                      sim_config: SimConfig | None = None, hybrid: HybridRoutes | None = None) -> float:
    """Analytic traffic-weighted message latency without contention."""
    cfg = sim_config or SimConfig()
    if topology.wireless is not None and hybrid is None:
        hybrid = HybridRoutes(topology, cfg.latency)
    return network_edp(topology, traffic, routing, cfg.energy, cfg.latency, hybrid)[0]


@dataclass
class SweepPoint:
    offered: float
    accepted: float
    latency: float | None
    cpu_mc_latency: float | None
    saturated: bool


@dataclass
class SweepCurve:
    points: list
    zero_load_latency: float
    saturation_throughput: float
    limit_factor: float = 3.0

    def rows(self) -> list[dict]:
        return [asdict(p) for p in self.points]


def latency_throughput_sweep(topology: Topology, routing: RoutingTable, traffic_shape: TrafficMatrix,
                             load_points, sim_config: SimConfig | None = None, limit_factor: float = 3.0,
                             stop_at_saturation: bool = True) -> SweepCurve:
    """Simulate ``traffic_shape`` rescaled to each offered load (flits/cycle/node).

    The saturation throughput is the largest accepted load among points whose
    latency stays within ``limit_factor`` times the zero-load latency.
    """
    cfg = sim_config or SimConfig()
    loads = list(load_points)
    if not loads:
        raise ConfigurationError("no load points")
    if any(b <= a for a, b in zip(loads, loads[1:])):
        raise ConfigurationError("load points must be strictly increasing")
    if traffic_shape.total <= 0:
        raise ConfigurationError("traffic shape carries no traffic")
    n = topology.n_routers
    hybrid = HybridRoutes(topology, cfg.latency) if topology.wireless is not None else None
    zl = zero_load_latency(topology, routing, traffic_shape, cfg, hybrid)
    points = []
    best = 0.0
    for load in loads:
        tm = traffic_shape.scaled(load * n / traffic_shape.total)
        rep = simulate(topology, routing, tm, cfg, hybrid, check_deadlock=not points)
        over = rep.saturated or rep.avg_latency is None or rep.avg_latency > limit_factor * zl
        points.append(SweepPoint(load, rep.throughput, rep.avg_latency, rep.cpu_mc_latency, over))
        if not over:
            best = max(best, rep.throughput)
        elif stop_at_saturation:
            break
    return SweepCurve(points, zl, best, limit_factor)


@dataclass
class LayerSequenceReport:
    layers: list                       # [(layer name, SimReport)]
    weights: list
    avg_latency: float
    avg_energy: float
    edp: float
    wireless_utilization: float
    wireless_mc_to_core_flits: int
    wireless_core_to_mc_flits: int
    drained: bool

    def layer(self, name: str) -> SimReport:
        for n, r in self.layers:
            if n == name:
                return r
        raise KeyError(name)


def run_layer_sequence(topology: Topology, routing: RoutingTable, preset, sim_config: SimConfig | None = None,
                       peak_rate: float | None = None, affinity: str = "uniform",
                       matrices: list[TrafficMatrix] | None = None) -> LayerSequenceReport:
    """Simulate each layer for its duration; combine latency, energy and EDP by duration.

    Each layer gets its own seed derived from ``sim_config.rng_seed``.
    """
    cfg = sim_config or SimConfig()
    preset = list(preset)
    if not preset:
        raise ConfigurationError("empty layer preset")
    if matrices is None:
        if peak_rate is None:
            raise ConfigurationError("run_layer_sequence needs peak_rate or explicit matrices")
        matrices = [build_many_to_few(topology.placement, p, peak_rate, affinity) for p in preset]
    if len(matrices) != len(preset):
        raise ConfigurationError("one traffic matrix per layer is required")
    hybrid = HybridRoutes(topology, cfg.latency) if topology.wireless is not None else None
    seeds = np.random.SeedSequence(cfg.rng_seed).generate_state(len(preset))
    out = []
    for k, (layer, tm) in enumerate(zip(preset, matrices)):
        lc = cfg.with_(measure_cycles=layer.duration, rng_seed=int(seeds[k]))
        out.append((layer.name, simulate(topology, routing, tm, lc, hybrid, check_deadlock=k == 0)))
    w = np.array([l.duration for l in preset], dtype=float)
    w /= w.sum()
    reps = [r for _, r in out]
    if any(r.avg_latency is None for r in reps):
        raise PreconditionError("a layer produced no measured messages; raise peak_rate or duration")
    lat = float(sum(wk * r.avg_latency for wk, r in zip(w, reps)))
    en = float(sum(wk * r.avg_energy for wk, r in zip(w, reps)))
    edp = float(sum(wk * r.edp for wk, r in zip(w, reps)))
    if len(reps) == 1:
        lat, en, edp = reps[0].avg_latency, reps[0].avg_energy, reps[0].edp
    msgs = sum(r.messages for r in reps)
    wl = sum(r.wireless_messages for r in reps)
    return LayerSequenceReport(
        out, w.tolist(), lat, en, edp, wl / msgs if msgs else 0.0,
        sum(r.wireless_mc_to_core_flits for r in reps), sum(r.wireless_core_to_mc_flits for r in reps),
        all(r.drained for r in reps))
