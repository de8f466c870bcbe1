"""Experiment configuration and the end-to-end design/evaluation pipeline."""
from __future__ import annotations

import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .errors import ConfigurationError
from .models import EnergyModel, LatencyModel
from .netsim import SimConfig
from .optimizer import AnnealSchedule, amosa_run, candidate_edp, select_final, sweep_kmax
from .routing import IRREGULAR, XY, XYYX, route_for
from .topology import Topology, make_hetnoc, make_mesh, mesh_opt_placement, wihetnoc_placement
from .traffic import PRESET_NAMES, aggregate_matrix, layer_matrices, load_trace, workload_preset
from .wireless import HybridRoutes, place_wis

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

log = logging.getLogger(__name__)


@dataclass
class SystemSection:
    rows: int = 8
    cols: int = 8


@dataclass
class WorkloadSection:
    preset: str = "lenet"
    trace: str | None = None
    peak_rate: float = 10.0          # chip-wide flits/cycle of the busiest layer
    affinity: str = "uniform"


@dataclass
class OptimizerSection:
    k_values: list = field(default_factory=lambda: [4, 5, 6, 7])
    iters_per_temp: int = 200
    t_init: float = 1.0
    t_min: float = 1e-5
    alpha: float = 0.95
    soft_limit: int = 60
    hard_limit: int = 30


@dataclass
class WirelessSection:
    wis: int = 24
    channels: int = 4
    placement: str = "greedy"
    die_mm: float = 20.0
    wi_area_mm2: float = 0.25


@dataclass
class SimSection:
    warmup_cycles: int = 1000
    measure_cycles: int = 4000
    drain_cycles: int = 20000
    buffer_depth: int = 4
    virtual_channels: int = 2
    flits_per_message: int = 4
    local_ports: dict = field(default_factory=lambda: {"cpu": 1, "gpu": 1, "mc": 4})
    load_points: list = field(default_factory=lambda: [0.02, 0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4, 0.5])


@dataclass
class ExperimentConfig:
    system: SystemSection = field(default_factory=SystemSection)
    workload: WorkloadSection = field(default_factory=WorkloadSection)
    optimizer: OptimizerSection = field(default_factory=OptimizerSection)
    wireless: WirelessSection = field(default_factory=WirelessSection)
    sim: SimSection = field(default_factory=SimSection)
    seed: int = 1
    out_dir: str = "results"

    _SECTIONS = {"system": SystemSection, "workload": WorkloadSection, "optimizer": OptimizerSection,
                 "wireless": WirelessSection, "sim": SimSection}

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        cfg = cls()
        for key, value in doc.items():
            if key in cls._SECTIONS:
                if not isinstance(value, dict):
                    raise ConfigurationError(f"{key}: expected a table")
                sect = getattr(cfg, key)
                names = {f.name for f in fields(sect)}
                for k, v in value.items():
                    if k not in names:
                        raise ConfigurationError(f"{key}.{k}: unknown field")
                    setattr(sect, k, v)
            elif key in ("seed", "out_dir"):
                setattr(cfg, key, value)
            else:
                raise ConfigurationError(f"{key}: unknown section")
        cfg.check()
        return cfg

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        p = Path(path)
        if not p.exists():
            raise ConfigurationError(f"config: file {path} not found")
        text = p.read_text()
        try:
            doc = tomllib.loads(text) if p.suffix == ".toml" else json.loads(text)
        except (ValueError, tomllib.TOMLDecodeError) as exc:
            raise ConfigurationError(f"config: cannot parse {path}: {exc}") from exc
        return cls.from_dict(doc)

    def override(self, path: str, value) -> None:
        """Set ``section.field`` (or a top-level field) and log the provenance."""
        parts = path.split(".")
        target = self
        for p in parts[:-1]:
            if not hasattr(target, p):
                raise ConfigurationError(f"{path}: unknown field")
            target = getattr(target, p)
        if not hasattr(target, parts[-1]):
            raise ConfigurationError(f"{path}: unknown field")
        log.info("override %s = %r (command line)", path, value)
        setattr(target, parts[-1], value)

    def check(self) -> None:
        s, w, o, wl = self.system, self.workload, self.optimizer, self.wireless
        if s.rows < 4 or s.cols < 4:
            raise ConfigurationError("system.rows/cols: the heterogeneous placements need at least 4x4")
        if w.trace is None and w.preset.lower() not in PRESET_NAMES:
            raise ConfigurationError(f"workload.preset: unknown preset {w.preset!r} "
                                     f"(known: {', '.join(PRESET_NAMES)})")
        if w.trace is not None and not Path(w.trace).exists():
            raise ConfigurationError(f"workload.trace: file {w.trace} not found")
        if not w.peak_rate > 0:
            raise ConfigurationError("workload.peak_rate: must be positive")
        if w.affinity not in ("uniform", "quadrant"):
            raise ConfigurationError("workload.affinity: must be 'uniform' or 'quadrant'")
        if not o.k_values:
            raise ConfigurationError("optimizer.k_values: empty k_max range")
        if any(int(k) < 2 for k in o.k_values):
            raise ConfigurationError("optimizer.k_values: k_max must be >= 2")
        try:
            self.schedule()
        except ConfigurationError as exc:
            raise ConfigurationError(f"optimizer: {exc}") from None
        if wl.placement not in ("greedy", "random"):
            raise ConfigurationError("wireless.placement: must be 'greedy' or 'random'")
        if wl.wis < 0 or wl.channels < 0:
            raise ConfigurationError("wireless.wis/channels: must be non-negative")
        try:
            self.sim_config()
        except ConfigurationError as exc:
            raise ConfigurationError(f"sim: {exc}") from None

    def schedule(self) -> AnnealSchedule:
        o = self.optimizer
        return AnnealSchedule(o.t_init, o.t_min, o.alpha, o.iters_per_temp)

    def sim_config(self, seed: int | None = None) -> SimConfig:
        s = self.sim
        return SimConfig(latency=LatencyModel(flits_per_message=s.flits_per_message),
                         energy=EnergyModel(), buffer_depth=s.buffer_depth,
                         virtual_channels=s.virtual_channels, warmup_cycles=s.warmup_cycles,
                         measure_cycles=s.measure_cycles, drain_cycles=s.drain_cycles,
                         rng_seed=self.seed if seed is None else seed, local_ports=dict(s.local_ports))

    def to_dict(self) -> dict:
        return {"system": asdict(self.system), "workload": asdict(self.workload),
                "optimizer": asdict(self.optimizer), "wireless": asdict(self.wireless),
                "sim": asdict(self.sim), "seed": self.seed, "out_dir": self.out_dir}


def threads() -> int:
    try:
        return max(1, int(os.environ.get("NOC_FORGE_THREADS", "1")))
    except ValueError:
        raise ConfigurationError("NOC_FORGE_THREADS must be an integer") from None


def parallel_map(fn, items):
    """Map in worker processes when NOC_FORGE_THREADS > 1; results keep input order."""
    items = list(items)
    n = min(threads(), len(items))
    if n <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(n) as ex:
        return list(ex.map(fn, items))


@dataclass
class Designs:
    """The three compared networks and their routing tables."""

    mesh: Topology
    mesh_routing: object
    mesh_xy_routing: object
    wihetnoc: Topology
    wihetnoc_routing: object
    hetnoc: Topology
    hetnoc_routing: object

    def entries(self):
        return [("mesh", self.mesh, self.mesh_routing),
                ("hetnoc", self.hetnoc, self.hetnoc_routing),
                ("wihetnoc", self.wihetnoc, self.wihetnoc_routing)]


class Pipeline:
    def __init__(self, config: ExperimentConfig | None = None):
        self.config = config or ExperimentConfig()
        c = self.config
        self.preset = workload_preset(c.workload.preset) if c.workload.trace is None else None
        self.wi_placement = wihetnoc_placement(c.system.rows, c.system.cols)
        self.mesh_placement = mesh_opt_placement(c.system.rows, c.system.cols)
        seeds = np.random.SeedSequence(c.seed).generate_state(4)
        self.anneal_seed, self.sim_seed, self.wi_seed, _ = (int(s) for s in seeds)

    def traffic(self, placement):
        w = self.config.workload
        if w.trace is not None:
            return load_trace(w.trace, placement.size)
        return aggregate_matrix(placement, self.preset, w.peak_rate, w.affinity)

    def layer_traffic(self, placement):
        w = self.config.workload
        return layer_matrices(placement, self.preset, w.peak_rate, w.affinity)

    def mesh(self):
        c = self.config.system
        topo = make_mesh(c.rows, c.cols, self.mesh_placement, name="mesh")
        tm = self.traffic(self.mesh_placement)
        return topo, route_for(topo, tm, XYYX), route_for(topo, tm, XY)

    def seed_topology(self) -> Topology:
        c = self.config.system
        return make_mesh(c.rows, c.cols, self.wi_placement, name="wihetnoc")

    def optimize(self, k_values=None):
        """k_max sweep on the WiHetNoC placement; returns {k: SweepEntry}."""
        o = self.config.optimizer
        ks = sorted(int(k) for k in (k_values or o.k_values))
        return sweep_kmax(self.seed_topology(), self.traffic(self.wi_placement), ks,
                          self.config.schedule(), self.anneal_seed,
                          soft_limit=o.soft_limit, hard_limit=o.hard_limit)

    @staticmethod
    def best_k(sweep) -> int:
        return min(sweep, key=lambda k: (sweep[k].edp, k))

    def wireline(self, edges) -> Topology:
        return Topology(self.wi_placement, tuple(map(tuple, edges)), None, "wihetnoc")

    def add_wireless(self, wired: Topology) -> Topology:
        w = self.config.wireless
        tm = self.traffic(self.wi_placement)
        rt = route_for(wired, tm, IRREGULAR)
        plan = place_wis(wired, tm, w.wis, w.channels if w.wis else 0, rt, w.placement,
                         rng=self.wi_seed, latency_model=self.config.sim_config().latency)
        return wired.with_wireless(plan)

    def designs(self, wired: Topology) -> Designs:
        mesh, rt_mesh, rt_xy = self.mesh()
        wi = self.add_wireless(wired)
        tm = self.traffic(self.wi_placement)
        rt_wi = route_for(wi, tm, IRREGULAR)
        het = make_hetnoc(wi) if wi.wireless is not None else wired.with_wireless(None, "hetnoc")
        rt_het = route_for(het, tm, IRREGULAR)
        return Designs(mesh, rt_mesh, rt_xy, wi, rt_wi, het, rt_het)
