"""``noc-forge`` command line: optimize, simulate, compare, sweeps, report, validate."""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .errors import ConfigurationError, NocError, PreconditionError, ValidationError
from .metrics import (fraction_above, link_utilization, network_edp, utilization_cdf, write_link_csv,
                      write_summary_csv)
from .netsim import latency_throughput_sweep, run_layer_sequence, simulate
from .optimizer import save_archive
from .routing import IRREGULAR, XY, XYYX, route_for
from .scenario import ExperimentConfig, Pipeline
from .topology import Topology, validate
from .traffic import PRESET_NAMES, load_traffic_spec
from .wireless import HybridRoutes, area_overhead, sweep_channels, sweep_wi_count

log = logging.getLogger("noc_forge")

FIGURES = {
    "fig9": ["design", "k_max", "twhc", "u_std"],
    "fig10": ["k_max", "u_mean", "u_std", "edp"],
    "fig12": ["wi_count", "edp", "latency", "energy", "wireless_utilization"],
    "fig13": ["channels", "edp", "latency", "energy", "wireless_utilization"],
    "fig14": ["design", "offered", "accepted", "latency", "cpu_mc_latency", "saturated"],
    "fig15": ["design", "u_normalized", "cumulative_fraction"],
    "fig16": ["layer", "mc_to_core_flits", "core_to_mc_flits", "measured_ratio", "configured_ratio"],
    "fig17": ["design", "layer", "latency", "normalized"],
    "fig18": ["design", "layer", "edp", "normalized"],
}
COMPARE_FIGURES = ("fig14", "fig15", "fig16", "fig17", "fig18")


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, np.integer):
        return int(v)
    if v is None:
        return ""
    return v


def write_figure(out_dir: Path, name: str, rows: list[dict]) -> Path:
    cols = FIGURES[name]
    path = out_dir / f"{name}.csv"
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=cols)
        w.writeheader()
        for r in rows:
            w.writerow({k: _fmt(r.get(k)) for k in cols})
    return path


def _parse_range(text: str) -> list[int]:
    """'6', '4..7' or '4,5,6' -> sorted ints."""
    try:
        if ".." in text:
            a, b = text.split("..")
            vals = list(range(int(a), int(b) + 1))
        else:
            vals = [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise ConfigurationError(f"cannot parse integer range {text!r}") from None
    if not vals:
        raise ConfigurationError(f"empty range {text!r}")
    return sorted(vals)


def _config(args) -> ExperimentConfig:
    cfg = ExperimentConfig.load(args.config) if getattr(args, "config", None) else ExperimentConfig()
    if getattr(args, "seed", None) is not None:
        cfg.override("seed", args.seed)
    traffic = getattr(args, "traffic", None)
    if traffic is not None:
        if traffic.lower() in PRESET_NAMES:
            cfg.override("workload.preset", traffic.lower())
            cfg.override("workload.trace", None)
        elif Path(traffic).exists():
            cfg.override("workload.trace", traffic)
        else:
            raise ConfigurationError(f"workload.preset: {traffic!r} is neither a known preset "
                                     f"({', '.join(PRESET_NAMES)}) nor a trace file")
    for flag, path in (("peak_rate", "workload.peak_rate"), ("affinity", "workload.affinity"),
                       ("wis", "wireless.wis"), ("channels", "wireless.channels"),
                       ("wi_placement", "wireless.placement"), ("cycles", "sim.measure_cycles"),
                       ("out", "out_dir")):
        v = getattr(args, flag, None)
        if v is not None:
            cfg.override(path, v)
    if getattr(args, "iters", None) is not None:
        sched = cfg.schedule()
        cfg.override("optimizer.iters_per_temp", max(1, -(-args.iters // sched.n_temps)))
    cfg.check()
    return cfg


def _out_dir(cfg) -> Path:
    p = Path(cfg.out_dir)
    p.mkdir(parents=True, exist_ok=True)
    return p


def _routing_for(topo: Topology, tm, scheme: str | None):
    if scheme is None:
        scheme = XYYX if topo.is_mesh() else IRREGULAR
    return route_for(topo, tm, scheme)


# -- subcommands ---------------------------------------------------------------------

def cmd_optimize(args) -> int:
    cfg = _config(args)
    if args.kmax is not None:
        cfg.override("optimizer.k_values", _parse_range(args.kmax))
    out = _out_dir(cfg)
    pipe = Pipeline(cfg)
    sweep = pipe.optimize()
    mesh, rt_mesh, rt_xy = pipe.mesh()
    tm_mesh = pipe.traffic(pipe.mesh_placement)
    fig9 = []
    for name, rt in (("mesh_xy", rt_xy), ("mesh_xyyx", rt_mesh)):
        lu = link_utilization(mesh, tm_mesh, rt)
        fig9.append({"design": name, "k_max": "", "twhc": lu.twhc, "u_std": lu.std_u})
    fig10 = []
    for k, e in sweep.items():
        edps = {m.edges: e.edps[m.edges] for m in e.result.archive}
        path = out / f"archive_k{k}.json" if len(sweep) > 1 or args.archive is None else Path(args.archive)
        save_archive(e.result.archive, path, edps)
        fig9.append({"design": "wihetnoc", "k_max": k, "twhc": e.selected.u_mean * 2 * len(e.selected.edges),
                     "u_std": e.selected.u_std})
        fig10.append({"k_max": k, "u_mean": e.selected.u_mean, "u_std": e.selected.u_std, "edp": e.edp})
        print(f"k_max={k}: archive {len(e.result.archive)}, selected U={e.selected.u_mean:.6g} "
              f"sigma={e.selected.u_std:.6g} edp={e.edp:.6g}")
    write_figure(out, "fig9", fig9)
    write_figure(out, "fig10", fig10)
    best = pipe.best_k(sweep)
    wired = pipe.wireline(sweep[best].selected.edges)
    wired.save(out / "wihetnoc_wireline.json")
    print(f"selected k_max={best}; wrote {out / 'wihetnoc_wireline.json'}")
    return 0


def cmd_simulate(args) -> int:
    cfg = _config(args)
    topo = Topology.load(args.topology)
    out = _out_dir(cfg)
    tm, _ = load_traffic_spec(args.traffic or cfg.workload.preset, topo.placement,
                              cfg.workload.peak_rate, cfg.workload.affinity)
    rt = _routing_for(topo, tm, args.routing)
    rep = simulate(topo, rt, tm, cfg.sim_config())
    stem = Path(args.topology).stem
    (out / f"{stem}_report.json").write_text(rep.to_json())
    write_summary_csv([{"topology": stem, "avg_latency": rep.avg_latency, "throughput": rep.throughput,
                        "avg_energy": rep.avg_energy, "edp": rep.edp,
                        "wireless_utilization": rep.wireless_utilization, "drained": rep.drained}],
                      out / f"{stem}_summary.csv")
    with open(out / f"{stem}_links.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["src", "dst", "u"])
        for key in sorted(rep.link_utilization, key=lambda s: tuple(map(int, s.split("-")))):
            a, b = key.split("-")
            w.writerow([a, b, repr(rep.link_utilization[key])])
    print(f"latency={rep.avg_latency} throughput={rep.throughput:.6g} edp={rep.edp} drained={rep.drained}")
    return 0


def compare_designs(pipe: Pipeline, entries, out: Path, curves: bool = True) -> dict:
    """Layer-by-layer comparison of (name, topology, routing) entries; first entry is the baseline."""
    if len(entries) < 2:
        raise PreconditionError("compare needs at least two topologies")
    if pipe.preset is None:
        raise PreconditionError("compare needs a layer preset, not a trace")
    cfg = pipe.config
    sim = cfg.sim_config(pipe.sim_seed)
    seq = {}
    for name, topo, rt in entries:
        seq[name] = run_layer_sequence(topo, rt, pipe.preset, sim, cfg.workload.peak_rate,
                                       cfg.workload.affinity)
    base = entries[0][0]
    fig17, fig18 = [], []
    for name, _, _ in entries:
        for (layer, rep), (_, brep) in zip(seq[name].layers, seq[base].layers):
            fig17.append({"design": name, "layer": layer, "latency": rep.avg_latency,
                          "normalized": rep.avg_latency / brep.avg_latency})
            fig18.append({"design": name, "layer": layer, "edp": rep.edp, "normalized": rep.edp / brep.edp})
        fig17.append({"design": name, "layer": "aggregate", "latency": seq[name].avg_latency,
                      "normalized": seq[name].avg_latency / seq[base].avg_latency})
        fig18.append({"design": name, "layer": "aggregate", "edp": seq[name].edp,
                      "normalized": seq[name].edp / seq[base].edp})
    write_figure(out, "fig17", fig17)
    write_figure(out, "fig18", fig18)

    # link-utilization CDFs normalized by the baseline's mean
    fig15 = []
    lus = {}
    for name, topo, rt in entries:
        tm = pipe.traffic(topo.placement)
        lus[name] = link_utilization(topo, tm, rt)
    norm = lus[base].mean_u
    for name, _, _ in entries:
        for v, c in utilization_cdf(lus[name], norm):
            fig15.append({"design": name, "u_normalized": v, "cumulative_fraction": c})
    write_figure(out, "fig15", fig15)

    fig16 = []
    for name, topo, _ in entries:
        if topo.wireless is None:
            continue
        for layer, (lname, rep) in zip(pipe.preset, seq[name].layers):
            m2c, c2m = rep.wireless_mc_to_core_flits, rep.wireless_core_to_mc_flits
            fig16.append({"layer": f"{name}:{lname}", "mc_to_core_flits": m2c, "core_to_mc_flits": c2m,
                          "measured_ratio": m2c / c2m if c2m else None,
                          "configured_ratio": layer.mc_to_core_fraction / (1 - layer.mc_to_core_fraction)})
    write_figure(out, "fig16", fig16)

    fig14 = []
    if curves:
        for name, topo, rt in entries:
            curve = latency_throughput_sweep(topo, rt, pipe.traffic(topo.placement), cfg.sim.load_points, sim)
            for p in curve.points:
                fig14.append({"design": name, **p.__dict__})
            fig14.append({"design": name, "offered": "saturation", "accepted": curve.saturation_throughput})
    write_figure(out, "fig14", fig14)
    return {"sequences": seq, "utilization": lus}


def _load_entries(paths, names, routing, pipe):
    entries = []
    for k, p in enumerate(paths):
        topo = Topology.load(p)
        name = names[k] if names else (topo.name or Path(p).stem)
        tm = pipe.traffic(topo.placement)
        entries.append((name, topo, _routing_for(topo, tm, routing)))
    return entries


def cmd_compare(args) -> int:
    cfg = _config(args)
    out = _out_dir(cfg)
    pipe = Pipeline(cfg)
    names = args.names.split(",") if args.names else None
    if names and len(names) != len(args.topologies):
        raise ConfigurationError("--names must list one name per topology")
    entries = _load_entries(args.topologies, names, args.routing, pipe)
    res = compare_designs(pipe, entries, out, curves=not args.no_curves)
    base = entries[0][0]
    for name, _, _ in entries:
        s = res["sequences"][name]
        print(f"{name}: latency {s.avg_latency:.4g} ({s.avg_latency / res['sequences'][base].avg_latency:.3f}x), "
              f"edp {s.edp:.4g} ({s.edp / res['sequences'][base].edp:.3f}x)")
    return 0


def _sweep_rows(rows, key):
    return [{key: r.value, "edp": r.edp, "latency": r.latency, "energy": r.energy,
             "wireless_utilization": r.wireless_utilization} for r in rows]


def cmd_sweep_wi(args) -> int:
    cfg = _config(args)
    out = _out_dir(cfg)
    pipe = Pipeline(cfg)
    wired = Topology.load(args.topology).with_wireless(None)
    rows = sweep_wi_count(wired, pipe.preset, cfg.workload.peak_rate, cfg.sim_config(pipe.sim_seed),
                          _parse_range(args.counts), cfg.wireless.channels, mode=cfg.wireless.placement,
                          affinity=cfg.workload.affinity)
    write_figure(out, "fig12", _sweep_rows(rows, "wi_count"))
    for r in rows:
        print(f"wis={r.value}: edp={r.edp:.6g} wireless={r.wireless_utilization:.3f}")
    return 0


def cmd_sweep_channels(args) -> int:
    cfg = _config(args)
    out = _out_dir(cfg)
    pipe = Pipeline(cfg)
    wired = Topology.load(args.topology).with_wireless(None)
    rows = sweep_channels(wired, pipe.preset, cfg.workload.peak_rate, cfg.sim_config(pipe.sim_seed),
                          _parse_range(args.channel_counts), args.wis_per_channel,
                          mode=cfg.wireless.placement, affinity=cfg.workload.affinity)
    write_figure(out, "fig13", _sweep_rows(rows, "channels"))
    for r in rows:
        print(f"channels={r.value}: edp={r.edp:.6g} wireless={r.wireless_utilization:.3f}")
    return 0


def cmd_report(args) -> int:
    d = Path(args.results)
    expected = [f"{f}.csv" for f in COMPARE_FIGURES]
    missing = [f for f in expected if not (d / f).exists()]
    if missing:
        raise PreconditionError(f"results directory {d} lacks: {', '.join(missing)}")
    index = {}
    for name, cols in FIGURES.items():
        p = d / f"{name}.csv"
        if not p.exists():
            continue
        with open(p, newline="") as fh:
            rows = list(csv.DictReader(fh))
            header = list(rows[0].keys()) if rows else cols
        if header != cols:
            raise ValidationError(f"{p}: columns {header} differ from {cols}")
        index[name] = {"file": p.name, "columns": cols, "rows": len(rows)}
    (d / "report.json").write_text(json.dumps(index, indent=1, sort_keys=True) + "\n")
    for name, meta in sorted(index.items()):
        print(f"{name}: {meta['rows']} rows")
    return 0


def cmd_validate(args) -> int:
    topo = Topology.load(args.topology)
    budget = "mesh" if not args.no_budget else None
    bad = validate(topo, k_max=args.kmax, link_budget=budget)
    for v in bad:
        print(f"violation {v}")
    if topo.wireless is not None:
        print(f"wireless: {topo.wireless.n_wis()} WIs, area {area_overhead(topo.wireless):.4%} "
              f"(GPU channels only {area_overhead(topo.wireless, which='gpu'):.4%})")
    if bad:
        return 1
    print("ok")
    return 0


def cmd_run(args) -> int:
    """optimize -> place WIs -> HetNoC -> compare, all from one config."""
    cfg = _config(args)
    out = _out_dir(cfg)
    pipe = Pipeline(cfg)
    sweep = pipe.optimize()
    fig10 = [{"k_max": k, "u_mean": e.selected.u_mean, "u_std": e.selected.u_std, "edp": e.edp}
             for k, e in sweep.items()]
    write_figure(out, "fig10", fig10)
    best = pipe.best_k(sweep)
    d = pipe.designs(pipe.wireline(sweep[best].selected.edges))
    d.mesh.save(out / "mesh.json")
    d.hetnoc.save(out / "hetnoc.json")
    d.wihetnoc.save(out / "wihetnoc.json")
    compare_designs(pipe, d.entries(), out, curves=not args.no_curves)
    print(f"selected k_max={best}; outputs in {out}")
    return 0


# -- entry point ---------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="noc-forge", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, traffic=True):
        sp.add_argument("--config", help="TOML or JSON experiment config")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--out", help="output directory")
        if traffic:
            sp.add_argument("--traffic", help="preset name or src,dst,rate trace file")
            sp.add_argument("--peak-rate", dest="peak_rate", type=float)
            sp.add_argument("--affinity", choices=["uniform", "quadrant"])

    sp = sub.add_parser("optimize", help="AMOSA k_max sweep and EDP selection")
    common(sp)
    sp.add_argument("--kmax", help="k_max value or range, e.g. 6 or 4..7")
    sp.add_argument("--iters", type=int, help="minimum AMOSA iterations per k_max")
    sp.add_argument("--archive", help="archive path for a single k_max")
    sp.set_defaults(fn=cmd_optimize)

    sp = sub.add_parser("simulate", help="simulate one topology")
    common(sp)
    sp.add_argument("--topology", required=True)
    sp.add_argument("--cycles", type=int, help="measured cycles")
    sp.add_argument("--routing", choices=[XY, XYYX, IRREGULAR])
    sp.set_defaults(fn=cmd_simulate)

    sp = sub.add_parser("compare", help="layer-by-layer comparison; first topology is the baseline")
    common(sp)
    sp.add_argument("topologies", nargs="+")
    sp.add_argument("--names")
    sp.add_argument("--routing", choices=[XY, XYYX, IRREGULAR])
    sp.add_argument("--no-curves", action="store_true", help="skip latency/throughput curves")
    sp.set_defaults(fn=cmd_compare)

    for name, fn in (("sweep-wi", cmd_sweep_wi), ("sweep-channels", cmd_sweep_channels)):
        sp = sub.add_parser(name, help="wireless sweep on a wireline topology")
        common(sp)
        sp.add_argument("--topology", required=True)
        sp.add_argument("--wi-placement", dest="wi_placement", choices=["greedy", "random"])
        if name == "sweep-wi":
            sp.add_argument("--counts", default="0,8,16,24,28")
            sp.add_argument("--channels", type=int)
        else:
            sp.add_argument("--channel-counts", dest="channel_counts", default="1,2,3,4,5")
            sp.add_argument("--wis-per-channel", dest="wis_per_channel", type=int, default=6)
        sp.set_defaults(fn=fn)

    sp = sub.add_parser("report", help="index and check figure CSVs in a results directory")
    sp.add_argument("results")
    sp.set_defaults(fn=cmd_report)

    sp = sub.add_parser("validate", help="check a topology file against the design constraints")
    sp.add_argument("topology")
    sp.add_argument("--kmax", type=int)
    sp.add_argument("--no-budget", action="store_true")
    sp.set_defaults(fn=cmd_validate)

    sp = sub.add_parser("run", help="full pipeline from one config")
    common(sp)
    sp.add_argument("--wis", type=int)
    sp.add_argument("--channels", type=int)
    sp.add_argument("--no-curves", action="store_true")
    sp.set_defaults(fn=cmd_run)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.fn(args)
    except ConfigurationError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except (NocError, ValueError, OSError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
