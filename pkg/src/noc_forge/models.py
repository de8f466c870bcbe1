"""Router timing and energy constants shared by the analytic and simulated paths."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

from .errors import ConfigurationError


@dataclass(frozen=True)
class LatencyModel:
    base_stages: int = 3            # router pipeline depth
    high_radix_ports: int = 4       # more inter-tile ports than this adds a stage
    extra_stages: int = 1
    cycles_per_tile_hop: int = 1    # wire pipeline stages per tile of Manhattan length
    flits_per_message: int = 4
    wireless_cycles_per_flit: int = 1
    mac_selection_cycles: int = 1
    mac_slot_cycles: int = 1

    def __post_init__(self):
        for k, v in asdict(self).items():
            if v is None:
                raise ConfigurationError(f"latency model constant {k} is missing")
            floor = 0 if k in ("extra_stages", "high_radix_ports", "mac_selection_cycles") else 1
            if v < floor:
                raise ConfigurationError(f"latency model constant {k}={v} must be >= {floor}")

    def stages(self, ports: int) -> int:
        return self.base_stages + (self.extra_stages if ports > self.high_radix_ports else 0)

    def link_cycles(self, length: float) -> int:
        return max(1, math.ceil(length * self.cycles_per_tile_hop))

    def mac_overhead(self, members: int) -> int:
        return members * self.mac_slot_cycles + self.mac_selection_cycles


@dataclass(frozen=True)
class EnergyModel:
    """Abstract energy units per flit.

    A router traversal costs ``router_stage * stages + router_port * ports``:
    deeper pipelines and wider crossbars/arbiters both burn more.  A wireless
    hop is cheaper than four tile-hops of wire.
    """

    router_stage: float = 1.0
    router_port: float = 0.25
    wire_per_tile_hop: float = 1.0
    wireless_per_flit: float = 3.0

    def __post_init__(self):
        for k, v in asdict(self).items():
            if v is None:
                raise ConfigurationError(f"energy model constant {k} is missing")
            if v < 0:
                raise ConfigurationError(f"energy model constant {k}={v} is negative")

    def router(self, stages: int, ports: int) -> float:
        # local port included in the crossbar size
        return self.router_stage * stages + self.router_port * (ports + 1)

    def wire(self, length: float) -> float:
        return self.wire_per_tile_hop * length


def require_models(latency_model, energy_model):
    if latency_model is None or energy_model is None:
        raise ConfigurationError("both a latency model and an energy model are required")
    if not isinstance(latency_model, LatencyModel) or not isinstance(energy_model, EnergyModel):
        raise ConfigurationError("latency_model/energy_model have the wrong type")
