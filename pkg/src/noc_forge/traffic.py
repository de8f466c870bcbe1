"""Many-to-few traffic matrices built from per-layer workload profiles."""
from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path

import numpy as np

from .errors import ConfigurationError, TraceParseError, ValidationError
from .topology import Placement, TileKind


class LayerKind(Enum):
    CONV = "conv"
    POOL = "pool"
    FC = "fc"


@dataclass(frozen=True)
class LayerProfile:
    name: str
    kind: LayerKind
    rel_injection: float          # share of the peak layer's injection rate, in (0, 1]
    mc_to_core_fraction: float    # of MC-adjacent traffic, the part flowing MC -> core
    cpu_traffic_fraction: float   # of all traffic, the part that is CPU <-> MC
    duration: int                 # cycles

    def __post_init__(self):
        if not 0.0 < self.rel_injection <= 1.0:
            raise ConfigurationError(f"{self.name}: rel_injection must lie in (0, 1]")
        for attr in ("mc_to_core_fraction", "cpu_traffic_fraction"):
            if not 0.0 <= getattr(self, attr) <= 1.0:
                raise ConfigurationError(f"{self.name}: {attr} must lie in [0, 1]")
        if self.duration < 1:
            raise ConfigurationError(f"{self.name}: duration must be >= 1 cycle")


# Injection levels respect conv > pool > fc.  MC->core shares sit above 0.5
# (reads dominate writes under coalescing); FC layers are mostly CPU<->MC.
_PRESETS = {
    "lenet": [
        ("C1", LayerKind.CONV, 0.92, 0.68, 0.05, 4000),
        ("P1", LayerKind.POOL, 0.70, 0.62, 0.05, 2000),
        ("C2", LayerKind.CONV, 1.00, 0.72, 0.05, 4000),
        ("P2", LayerKind.POOL, 0.66, 0.64, 0.05, 2000),
        ("C3", LayerKind.CONV, 0.88, 0.70, 0.05, 4000),
        ("F", LayerKind.FC, 0.25, 0.58, 0.50, 2000),
    ],
    "cdbnet": [
        ("C1", LayerKind.CONV, 1.00, 0.70, 0.05, 4000),
        ("P1", LayerKind.POOL, 0.68, 0.63, 0.05, 2000),
        ("C2", LayerKind.CONV, 0.94, 0.74, 0.05, 4000),
        ("P2", LayerKind.POOL, 0.64, 0.61, 0.05, 2000),
        ("C3", LayerKind.CONV, 0.86, 0.69, 0.05, 4000),
        ("P3", LayerKind.POOL, 0.60, 0.65, 0.05, 2000),
        ("F", LayerKind.FC, 0.22, 0.56, 0.50, 2000),
    ],
}

PRESET_NAMES = tuple(_PRESETS)


def workload_preset(name: str, overrides: dict | None = None) -> list[LayerProfile]:
    """Layer sequence for ``lenet`` or ``cdbnet``.

    ``overrides`` maps a layer name to a dict of field replacements, e.g.
    ``{"C1": {"mc_to_core_fraction": 0.8}}``.
    """
    key = name.lower()
    if key not in _PRESETS:
        raise ConfigurationError(f"unknown workload preset {name!r}; known: {', '.join(PRESET_NAMES)}")
    layers = [LayerProfile(*row) for row in _PRESETS[key]]
    for lname, fields in (overrides or {}).items():
        idx = [i for i, l in enumerate(layers) if l.name == lname]
        if not idx:
            raise ConfigurationError(f"preset {name!r} has no layer {lname!r}")
        if "kind" in fields:
            fields = {**fields, "kind": LayerKind(fields["kind"])}
        layers[idx[0]] = replace(layers[idx[0]], **fields)
    return layers


@dataclass(frozen=True, eq=False)
class TrafficMatrix:
    """Router-to-router injection rates ``f[i, j]`` in flits/cycle, zero diagonal."""

    f: np.ndarray

    def __post_init__(self):
        f = np.array(self.f, dtype=float)
        if f.ndim != 2 or f.shape[0] != f.shape[1]:
            raise ValidationError(f"traffic matrix must be square, got shape {f.shape}")
        if (f < 0).any():
            raise ValidationError("traffic matrix has negative rates")
        if np.diagonal(f).any():
            raise ValidationError("traffic matrix has self-loops")
        f.setflags(write=False)
        object.__setattr__(self, "f", f)

    @classmethod
    def zeros(cls, n: int) -> "TrafficMatrix":
        return cls(np.zeros((n, n)))

    @property
    def n(self) -> int:
        return self.f.shape[0]

    @property
    def total(self) -> float:
        return float(self.f.sum())

    def scaled(self, c: float) -> "TrafficMatrix":
        return TrafficMatrix(self.f * c)

    def __add__(self, other: "TrafficMatrix") -> "TrafficMatrix":
        return TrafficMatrix(self.f + other.f)

    def flows(self):
        """Nonzero (src, dst, rate) triples in row-major order."""
        src, dst = np.nonzero(self.f)
        return [(int(i), int(j), float(self.f[i, j])) for i, j in zip(src, dst)]

    def mc_share(self, placement: Placement) -> float:
        """Fraction of traffic with an MC at either end."""
        if self.total == 0:
            return 0.0
        mc = np.array([k is TileKind.MC for k in placement.kinds])
        touched = mc[:, None] | mc[None, :]
        return float(self.f[touched].sum() / self.total)

    def mc_to_core_ratio(self, placement: Placement) -> float:
        mc = np.array([k is TileKind.MC for k in placement.kinds])
        out = self.f[np.ix_(mc, ~mc)].sum()
        inc = self.f[np.ix_(~mc, mc)].sum()
        return float(out / inc) if inc else float("inf")


def home_mc(placement: Placement, rid: int, mcs: list[int] | None = None) -> int:
    """MC serving a tile: the nearest MC in its quadrant, else the nearest overall."""
    mcs = placement.routers_of(TileKind.MC) if mcs is None else mcs
    q = placement.quadrant(rid)
    local = [m for m in mcs if placement.quadrant(m) == q]
    pool = local or mcs
    return min(pool, key=lambda m: (placement.manhattan(rid, m), m))


def build_many_to_few(placement: Placement, profile: LayerProfile, peak_rate: float,
                      affinity: str = "uniform") -> TrafficMatrix:
    """Traffic for one layer: GPU<->MC and CPU<->MC flows only.

    The total injection is ``profile.rel_injection * peak_rate``.  GPU traffic
    goes to the quadrant-home MC (``affinity="quadrant"``) or is spread over
    every MC (``affinity="uniform"``); CPU traffic is spread over all CPU-MC
    pairs.
    """
    if peak_rate <= 0:
        raise ConfigurationError("peak_rate must be positive")
    if affinity not in ("quadrant", "uniform"):
        raise ConfigurationError(f"unknown affinity {affinity!r}")
    mcs = placement.routers_of(TileKind.MC)
    if not mcs:
        raise ConfigurationError("placement has no memory controller")
    cpus = placement.routers_of(TileKind.CPU)
    gpus = placement.routers_of(TileKind.GPU)
    total = profile.rel_injection * peak_rate
    cpu_total = total * profile.cpu_traffic_fraction
    if not cpus:
        cpu_total = 0.0
    elif not gpus:
        cpu_total = total
    gpu_total = total - cpu_total
    out = profile.mc_to_core_fraction

    f = np.zeros((placement.size, placement.size))

    def spread(pairs, amount):
        if not pairs or amount == 0:
            return
        share = amount / len(pairs)
        for core, mc in pairs:
            f[mc, core] += share * out
            f[core, mc] += share * (1.0 - out)

    if affinity == "quadrant":
        gpu_pairs = [(g, home_mc(placement, g, mcs)) for g in gpus]
    else:
        gpu_pairs = [(g, m) for g in gpus for m in mcs]
    spread(gpu_pairs, gpu_total)
    spread([(c, m) for c in cpus for m in mcs], cpu_total)
    return TrafficMatrix(f)


def layer_matrices(placement: Placement, preset: list[LayerProfile], peak_rate: float,
                   affinity: str = "uniform") -> list[TrafficMatrix]:
    return [build_many_to_few(placement, p, peak_rate, affinity) for p in preset]


def aggregate_matrix(placement: Placement, preset: list[LayerProfile], peak_rate: float,
                     affinity: str = "uniform") -> TrafficMatrix:
    """Duration-weighted mean of the per-layer matrices."""
    if not preset:
        raise ConfigurationError("empty layer preset")
    weights = np.array([p.duration for p in preset], dtype=float)
    weights /= weights.sum()
    acc = np.zeros((placement.size, placement.size))
    for w, m in zip(weights, layer_matrices(placement, preset, peak_rate, affinity)):
        acc += w * m.f
    return TrafficMatrix(acc)


TRACE_HEADER = ("src", "dst", "rate_flits_per_cycle")


def load_trace(path, n_routers: int) -> TrafficMatrix:
    """Read a ``src,dst,rate`` CSV (header optional) into a TrafficMatrix."""
    f = np.zeros((n_routers, n_routers))
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not c.strip() for c in row):
                continue
            if lineno == 1 and row[0].strip() == TRACE_HEADER[0]:
                continue
            if len(row) != 3:
                raise TraceParseError(f"expected 3 fields, got {len(row)}", lineno)
            try:
                src, dst, rate = int(row[0]), int(row[1]), float(row[2])
            except ValueError as exc:
                raise TraceParseError(str(exc), lineno) from None
            if not (0 <= src < n_routers and 0 <= dst < n_routers):
                raise ValidationError(f"line {lineno}: router id outside 0..{n_routers - 1}")
            if src == dst:
                raise ValidationError(f"line {lineno}: self-loop at router {src}")
            if rate < 0 or not np.isfinite(rate):
                raise ValidationError(f"line {lineno}: rate must be finite and >= 0")
            f[src, dst] += rate
    return TrafficMatrix(f)


def save_trace(traffic: TrafficMatrix, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(TRACE_HEADER)
        for i, j, rate in traffic.flows():
            w.writerow([i, j, repr(rate)])


def load_traffic_spec(spec: str, placement: Placement, peak_rate: float,
                      affinity: str = "uniform") -> tuple[TrafficMatrix, list[LayerProfile] | None]:
    """Resolve a ``preset name | trace path`` string used by the CLI."""
    if spec.lower() in _PRESETS:
        preset = workload_preset(spec)
        return aggregate_matrix(placement, preset, peak_rate, affinity), preset
    if Path(spec).exists():
        return load_trace(spec, placement.size), None
    raise ConfigurationError(f"traffic {spec!r} is neither a preset ({', '.join(PRESET_NAMES)}) nor a file")
