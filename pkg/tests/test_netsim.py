import numpy as np
import pytest

from noc_forge.errors import ConfigurationError, PreconditionError
from noc_forge.metrics import link_utilization, message_cost
from noc_forge.models import EnergyModel, LatencyModel
from noc_forge.netsim import (SimConfig, latency_throughput_sweep, run_layer_sequence, simulate,
                              zero_load_latency)
from noc_forge.routing import XY, XYYX, route_for, route_irregular, route_xyyx
from noc_forge.topology import Placement, TileKind, Topology, make_mesh, wihetnoc_placement
from noc_forge.traffic import TrafficMatrix, aggregate_matrix, layer_matrices, workload_preset
from noc_forge.wireless import HybridRoutes, place_wis

FAST = SimConfig(warmup_cycles=200, measure_cycles=3000, drain_cycles=20000)


def pair(f01=0.0):
    p = Placement(1, 2, (TileKind.GPU,) * 2)
    t = Topology(p, ((0, 1),))
    f = np.zeros((2, 2))
    f[0, 1] = f01
    return t, TrafficMatrix(f)


def test_single_hop_latency():
    t, tm = pair(0.002)
    rep = simulate(t, route_irregular(t), tm, SimConfig(warmup_cycles=0, measure_cycles=20000))
    assert rep.messages > 0
    assert rep.avg_latency == 10.0
    assert rep.drained


def test_zero_traffic():
    t, tm = pair()
    rep = simulate(t, route_irregular(t), tm, FAST)
    assert rep.avg_latency is None and rep.throughput == 0 and rep.drained
    assert rep.injected_flits == 0


@pytest.fixture(scope="module")
def mesh4():
    p = wihetnoc_placement(4, 4)
    m = make_mesh(4, 4, p)
    tm = aggregate_matrix(p, workload_preset("lenet"), 1.0)
    return m, tm


def test_conservation_and_determinism(mesh4):
    m, tm = mesh4
    rt = route_for(m, tm, XYYX)
    a = simulate(m, rt, tm, FAST)
    b = simulate(m, rt, tm, FAST)
    assert a.drained and not a.saturated
    assert a.injected_flits == a.delivered_flits > 0
    assert a.to_json() == b.to_json()
    c = simulate(m, rt, tm, FAST.with_(rng_seed=1))
    assert c.to_json() != a.to_json()
    # sampling noise allowance on the Bernoulli source
    assert a.throughput <= a.offered_load * 1.05


def test_xyyx_needs_two_vcs(mesh4):
    m, tm = mesh4
    with pytest.raises(ConfigurationError):
        simulate(m, route_xyyx(m, tm), tm, FAST.with_(virtual_channels=1))


def test_bad_inputs(mesh4):
    m, tm = mesh4
    with pytest.raises(PreconditionError):
        simulate(m, route_for(m), TrafficMatrix.zeros(4), FAST)
    with pytest.raises(ConfigurationError):
        SimConfig(measure_cycles=0)


def test_zero_load_matches_analytic(mesh4):
    m, tm = mesh4
    rt = route_for(m, tm, XY)
    light = tm.scaled(0.02)
    rep = simulate(m, rt, light, SimConfig(warmup_cycles=0, measure_cycles=40000))
    assert rep.avg_latency == pytest.approx(zero_load_latency(m, rt, light), rel=0.10)


def test_wireless_single_message_timing():
    p = wihetnoc_placement()
    m = make_mesh(8, 8, p)
    tm = aggregate_matrix(p, workload_preset("lenet"), 1.0)
    rt = route_for(m)
    topo = m.with_wireless(place_wis(m, tm, 24, 4, rt))
    hyb = HybridRoutes(topo)
    i, j = next((i, j) for i in range(64) for j in range(64)
                if hyb.route(i, j) is not None and hyb.route(i, j)[2] != 0)
    f = np.zeros((64, 64))
    f[i, j] = 0.002
    rep = simulate(topo, rt, TrafficMatrix(f), SimConfig(warmup_cycles=0, measure_cycles=20000), hyb)
    cyc, _, _ = message_cost(topo, rt, i, j, LatencyModel(), EnergyModel(), hyb)
    assert rep.wireless_messages == rep.messages
    assert rep.avg_latency == cyc


def test_fallback_still_delivers():
    p = wihetnoc_placement()
    m = make_mesh(8, 8, p)
    tm = aggregate_matrix(p, workload_preset("lenet"), 6.0)
    rt = route_for(m)
    topo = m.with_wireless(place_wis(m, tm, 24, 4, rt))
    rep = simulate(topo, rt, tm, FAST)
    assert rep.fallback_messages > 0 and rep.wireless_messages > 0
    assert rep.drained and rep.injected_flits == rep.delivered_flits


def test_link_profile_tracks_analytic(mesh4):
    m, tm = mesh4
    rt = route_for(m, tm, XY)
    rep = simulate(m, rt, tm, SimConfig(warmup_cycles=500, measure_cycles=100_000))
    lu = link_utilization(m, tm, rt)
    an = {f"{a}-{b}": u for (a, b), u in zip(lu.links, lu.u)}
    ma = np.mean(list(an.values()))
    mm = np.mean([rep.link_utilization[k] for k in an])
    for k, v in an.items():
        if v > 0.2 * ma:
            assert rep.link_utilization[k] / mm == pytest.approx(v / ma, rel=0.15)
        if v == 0:
            assert rep.link_utilization[k] == 0


def test_sweep_curve(mesh4):
    m, tm = mesh4
    rt = route_for(m, tm, XYYX)
    curve = latency_throughput_sweep(m, rt, tm, [0.02, 0.1, 0.2, 0.4, 0.8], FAST, stop_at_saturation=False)
    lats = [pt.latency for pt in curve.points if pt.latency is not None]
    assert all(a <= b * 1.02 for a, b in zip(lats, lats[1:]))
    assert 0 < curve.saturation_throughput <= 0.8 * 1.05
    with pytest.raises(ConfigurationError):
        latency_throughput_sweep(m, rt, tm, [0.2, 0.1], FAST)


def test_layer_sequence(mesh4):
    m, tm = mesh4
    p = m.placement
    pre = workload_preset("lenet")
    rt = route_for(m, tm, XYYX)
    cfg = FAST
    one = run_layer_sequence(m, rt, pre[:1], cfg, 1.0)
    assert one.avg_latency == one.layers[0][1].avg_latency
    assert one.edp == one.layers[0][1].edp
    seq = run_layer_sequence(m, rt, pre, cfg, 1.0)
    assert seq.drained and len(seq.layers) == len(pre)
    assert sum(seq.weights) == pytest.approx(1.0)
    # conv layers spread link load wider (flits/cycle) than the FC layer
    spread = {name: np.std(list(r.link_utilization.values())) for name, r in seq.layers}
    assert min(spread[n] for n in ("C1", "C2", "C3")) > spread["F"]
    with pytest.raises(ConfigurationError):
        run_layer_sequence(m, rt, [], cfg, 1.0)
    mats = layer_matrices(p, pre, 1.0)
    again = run_layer_sequence(m, rt, pre, cfg, matrices=mats)
    assert again.edp == seq.edp
