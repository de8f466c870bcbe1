"""End-to-end acceptance checks on the default 8x8 scenario.

Each test prints one ``criterion N: PASS|FAIL`` line (also collected into the
terminal summary) before asserting.  The k_max sweep and the three designs
are computed once per module.
"""
import dataclasses
import time

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES, random_connected_edges, random_placement, random_traffic
from noc_forge.metrics import link_utilization
from noc_forge.netsim import SimConfig, latency_throughput_sweep, run_layer_sequence, simulate
from noc_forge.routing import XY, path_links, route_for, route_irregular
from noc_forge.scenario import ExperimentConfig, Pipeline
from noc_forge.topology import TileKind, Topology, make_mesh, mesh_opt_placement, wihetnoc_placement
from noc_forge.traffic import aggregate_matrix, workload_preset
from noc_forge.wireless import simulate_mac, sweep_channels, sweep_wi_count

K_VALUES = (4, 5, 6, 7)


def verdict(n: int, title: str, checks: dict, detail: str = ""):
    ok = all(checks.values())
    failed = [k for k, v in checks.items() if not v]
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'} {title}"
    if detail:
        line += f" | {detail}"
    if failed:
        line += f" | failed: {', '.join(failed)}"
    print(line)
    ACCEPTANCE_LINES.append(line)
    assert ok, line


@pytest.fixture(scope="module")
def pipeline():
    return Pipeline(ExperimentConfig())


@pytest.fixture(scope="module")
def sweep(pipeline):
    t = time.time()
    sw = pipeline.optimize(list(K_VALUES))
    return sw, time.time() - t


@pytest.fixture(scope="module")
def k6_run(pipeline):
    """A single fixed-seed AMOSA run at k_max = 6 (no warm start)."""
    t = time.time()
    entry = pipeline.optimize([6])[6]
    return entry, time.time() - t


@pytest.fixture(scope="module")
def mesh_baseline(pipeline):
    mesh, rt_xyyx, rt_xy = pipeline.mesh()
    tm = pipeline.traffic(pipeline.mesh_placement)
    return mesh, tm, rt_xyyx, rt_xy, link_utilization(mesh, tm, rt_xyyx)


@pytest.fixture(scope="module")
def designs(pipeline, sweep):
    sw, _ = sweep
    k = pipeline.best_k(sw)
    return k, pipeline.designs(pipeline.wireline(sw[k].selected.edges))


@pytest.fixture(scope="module")
def comparison(pipeline, designs):
    """Layer sequences for every design under both presets at the default peak rate."""
    _, d = designs
    cfg = pipeline.config
    sim = cfg.sim_config(pipeline.sim_seed)
    out = {}
    t = time.time()
    for preset in ("lenet", "cdbnet"):
        layers = workload_preset(preset)
        for name, topo, rt in d.entries():
            out[preset, name] = run_layer_sequence(topo, rt, layers, sim, cfg.workload.peak_rate,
                                                   cfg.workload.affinity)
    return out, time.time() - t


def test_criterion_1_metrics_oracle():
    rng = np.random.default_rng(2024)
    grids = [(2, 2), (2, 3), (3, 3), (2, 5), (3, 4), (2, 6)]
    t = time.time()
    exact = identity = True
    for _ in range(200):
        rows, cols = grids[rng.integers(len(grids))]
        n = rows * cols
        edges = random_connected_edges(n, int(rng.integers(n - 1, min(n * (n - 1) // 2, 2 * n) + 1)), rng)
        topo = Topology(random_placement(rows, cols, rng, int(rng.integers(0, 3))), tuple(edges))
        tm = random_traffic(n, rng, rng.uniform(0.05, 1.0))
        rt = route_irregular(topo)
        lu = link_utilization(topo, tm, rt)
        oracle = {link: 0.0 for link in lu.links}
        for i in range(n):
            for j in range(n):
                if tm.f[i, j]:
                    for link in path_links(rt, i, j):
                        oracle[link] += tm.f[i, j]
        exact &= all(u == oracle[link] for link, u in zip(lu.links, lu.u))
        twhc = sum(f * len(path_links(rt, i, j)) for i, j, f in tm.flows())
        identity &= bool(np.isclose(lu.mean_u * lu.n_links, twhc, rtol=1e-9, atol=0))
    dt = time.time() - t
    verdict(1, "metrics oracle equivalence", {"exact U_k": exact, "U*L = twhc": identity, "runtime < 30 s": dt < 30},
            f"200 instances in {dt:.1f}s")


def test_criterion_2_mesh_hotspot():
    t = time.time()
    p = mesh_opt_placement()
    mesh = make_mesh(8, 8, p)
    tm = aggregate_matrix(p, workload_preset("lenet"), 1.0)
    lu = link_utilization(mesh, tm, route_for(mesh, tm, XY))
    mc = set(p.routers_of(TileKind.MC))
    ratios = [u / lu.mean_u for (a, b), u in zip(lu.links, lu.u) if a in mc or b in mc]
    peak = max(ratios)
    dt = time.time() - t
    verdict(2, "mesh hotspot", {"MC link >= 2x mean": peak >= 2.0, "runtime < 10 s": dt < 10},
            f"max MC-adjacent U/mean = {peak:.2f}; 600-700% extremes "
            f"{'present' if peak >= 6 else 'absent'} under default asymmetry")


def test_criterion_3_optimization_gain(k6_run, mesh_baseline):
    e, dt = k6_run
    mlu = mesh_baseline[-1]
    # twhc = mean utilization x directed link count
    sel_twhc = e.selected.u_mean * 2 * len(e.selected.edges)
    r_twhc = sel_twhc / mlu.twhc
    r_std = e.selected.u_std / mlu.std_u
    verdict(3, "optimization gain (k_max = 6)",
            {"sigma <= 0.5x mesh": r_std <= 0.5, "twhc <= 0.6x mesh": r_twhc <= 0.6,
             ">= 5000 iterations": e.result.iterations >= 5000,
             "runtime < 10 min": dt < 600},
            f"sigma ratio {r_std:.3f}, twhc ratio {r_twhc:.3f}, {e.result.iterations} iterations")


def test_criterion_4_cdf(k6_run, mesh_baseline, pipeline):
    sel = k6_run[0].selected
    topo = pipeline.wireline(sel.edges)
    tm = pipeline.traffic(pipeline.wi_placement)
    lu = link_utilization(topo, tm, route_irregular(topo))
    norm = lu.u / mesh_baseline[-1].mean_u
    above2 = int((norm > 2).sum())
    below = float((norm < 1).mean())
    verdict(4, "utilization CDF", {"no link > 2x mesh mean": above2 == 0, ">= 85% below mesh mean": below >= 0.85},
            f"{above2} links above 2x, {below:.1%} below the mesh mean")


def test_criterion_5_kmax_sweep(sweep):
    sw, dt = sweep
    ks = sorted(sw)
    u = [sw[k].result.archive.best(0).u_mean for k in ks]
    s = [sw[k].result.archive.best(1).u_std for k in ks]
    edp = {k: sw[k].edp for k in ks}
    arg = min(edp, key=lambda k: (edp[k], k))
    verdict(5, "k_max sweep shape",
            {"min U non-increasing": all(a >= b for a, b in zip(u, u[1:])),
             "min sigma non-increasing": all(a >= b for a, b in zip(s, s[1:])),
             "EDP argmin not 4": arg != 4,
             "EDP argmin interior": ks[0] < arg < ks[-1],
             "EDP(7) >= EDP(argmin)": edp[7] >= edp[arg],
             "runtime < 30 min": dt < 1800},
            "EDP " + ", ".join(f"k{k}={edp[k]:.0f}" for k in ks) + f"; argmin k={arg}")


def test_criterion_6_mac():
    t = time.time()
    tr = simulate_mac(6, 100_000, seed=7)
    n = 6
    fair = True
    arbs = tr.arbitrations
    for k in range(len(arbs) - n + 1):
        window = arbs[k:k + n]
        steady = set.intersection(*(set(r) & set(p) for _, r, _, p in window))
        counts = [sum(1 for _, _, w, _ in window if w == m) for m in steady]
        if counts and max(counts) - min(counts) > 1:
            fair = False
            break
    dt = time.time() - t
    verdict(6, "MAC properties",
            {"zero collisions": tr.max_transmitters <= 1, "fairness window": fair,
             "liveness within N grants": max(tr.waits) <= n - 1, "runtime < 5 s": dt < 5},
            f"{len(arbs)} grants over 1e5 cycles, worst wait {max(tr.waits)} grants, {dt:.2f}s")


def test_criterion_7_conservation_determinism(comparison, designs, pipeline):
    res, _ = comparison
    _, d = designs
    conserved = all(r.drained and r.injected_flits == r.delivered_flits
                    for seq in res.values() for _, r in seq.layers)
    cfg = pipeline.config
    sim = cfg.sim_config(pipeline.sim_seed)
    tm = pipeline.traffic(pipeline.wi_placement)
    identical = True
    for name, topo, rt in d.entries():
        t = tm if topo.placement == pipeline.wi_placement else pipeline.traffic(topo.placement)
        a = simulate(topo, rt, t, sim.with_(measure_cycles=2000))
        b = simulate(topo, rt, t, sim.with_(measure_cycles=2000))
        identical &= a.to_json() == b.to_json()
    # link profile on a 4x4 instance at 1e6 cycles
    p = wihetnoc_placement(4, 4)
    small = make_mesh(4, 4, p)
    stm = aggregate_matrix(p, workload_preset("lenet"), 1.0)
    rt = route_for(small, stm, XY)
    rep = simulate(small, rt, stm, SimConfig(warmup_cycles=1000, measure_cycles=10**6))
    lu = link_utilization(small, stm, rt)
    an = {f"{a}-{b}": u for (a, b), u in zip(lu.links, lu.u)}
    ma = np.mean(list(an.values()))
    mm = np.mean([rep.link_utilization[k] for k in an])
    errs = [abs(rep.link_utilization[k] / mm - v / ma) / (v / ma) for k, v in an.items() if v > 0]
    zeros_ok = all(rep.link_utilization[k] == 0 for k, v in an.items() if v == 0)
    verdict(7, "simulator conservation & determinism",
            {"injected = delivered, drained": conserved and rep.drained, "byte-identical reruns": identical,
             "link profile within 10%": max(errs) <= 0.10 and zeros_ok},
            f"max per-link profile error {max(errs):.1%}")


def test_criterion_8_end_to_end(comparison, designs, pipeline):
    res, dt = comparison
    k, d = designs
    checks = {}
    parts = [f"k_max={k}"]
    for preset in ("lenet", "cdbnet"):
        m, h, w = (res[preset, n] for n in ("mesh", "hetnoc", "wihetnoc"))
        lat_red = 1 - w.avg_latency / m.avg_latency
        edp_red = 1 - w.edp / m.edp
        checks[f"{preset} ordering"] = w.avg_latency < h.avg_latency < m.avg_latency
        checks[f"{preset} latency -30%"] = lat_red >= 0.30
        checks[f"{preset} EDP -45%"] = edp_red >= 0.45
        parts.append(f"{preset}: latency mesh {m.avg_latency:.1f} het {h.avg_latency:.1f} "
                     f"wi {w.avg_latency:.1f} (-{lat_red:.0%}), EDP mesh {m.edp:.0f} het {h.edp:.0f} "
                     f"wi {w.edp:.0f} (-{edp_red:.0%})")
    cfg = pipeline.config
    sim = cfg.sim_config(pipeline.sim_seed)
    t = time.time()
    sat = {}
    for name, topo, rt in d.entries():
        if name == "hetnoc":
            continue
        curve = latency_throughput_sweep(topo, rt, pipeline.traffic(topo.placement), cfg.sim.load_points, sim)
        sat[name] = curve.saturation_throughput
    ratio = sat["wihetnoc"] / sat["mesh"]
    checks["throughput >= 1.5x"] = ratio >= 1.5
    checks["runtime < 20 min"] = dt + time.time() - t < 1200
    parts.append(f"saturation {sat['mesh']:.3f} -> {sat['wihetnoc']:.3f} ({ratio:.2f}x)")
    verdict(8, "end-to-end comparison", checks, "; ".join(parts))


def test_criterion_9_wireless_sweeps(designs, pipeline):
    _, d = designs
    cfg = pipeline.config
    sim = cfg.sim_config(pipeline.sim_seed)
    wired = d.wihetnoc.with_wireless(None)
    t = time.time()
    wi = {r.value: r.edp for r in sweep_wi_count(wired, pipeline.preset, cfg.workload.peak_rate, sim, [24, 28])}
    ch = {r.value: r.edp for r in sweep_channels(wired, pipeline.preset, cfg.workload.peak_rate, sim, [4, 5])}
    dt = time.time() - t
    diff = abs(ch[4] - ch[5]) / ch[4]
    verdict(9, "WI/channel sweep shapes",
            {"EDP(24) <= EDP(28)": wi[24] <= wi[28], "|EDP(4ch)-EDP(5ch)| < 5%": diff < 0.05,
             "runtime < 15 min": dt < 900},
            f"EDP 24 WIs {wi[24]:.0f}, 28 WIs {wi[28]:.0f}; 4 ch {ch[4]:.0f}, 5 ch {ch[5]:.0f} ({diff:.1%})")


def test_criterion_10_wireless_asymmetry(designs, pipeline):
    _, d = designs
    cfg = pipeline.config
    sim = cfg.sim_config(pipeline.sim_seed)
    errs = {}
    for preset in ("lenet", "cdbnet"):
        # 5x longer windows (same relative weights) so each ratio rests on thousands of flits
        layers = [dataclasses.replace(l, duration=5 * l.duration) for l in workload_preset(preset)]
        seq = run_layer_sequence(d.wihetnoc, d.wihetnoc_routing, layers, sim, cfg.workload.peak_rate,
                                 cfg.workload.affinity)
        for layer, (name, rep) in zip(layers, seq.layers):
            want = layer.mc_to_core_fraction / (1 - layer.mc_to_core_fraction)
            got = rep.wireless_asymmetry
            errs[f"{preset}:{name}"] = abs(got - want) / want if got is not None else float("inf")
    worst = max(errs, key=errs.get)
    verdict(10, "wireless asymmetry", {"all layers within 15%": errs[worst] <= 0.15},
            f"worst {worst} off by {errs[worst]:.1%}")
