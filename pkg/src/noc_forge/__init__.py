"""Topology synthesis and flit-level evaluation of hybrid wireline/wireless NoCs."""
from .errors import (ConfigurationError, ConstraintViolation, NocError, PreconditionError,
                     ProtocolError, SchemeMismatchError, TraceParseError, ValidationError)
from .metrics import link_utilization, network_edp, objectives, utilization_cdf
from .models import EnergyModel, LatencyModel
from .netsim import SimConfig, SimReport, latency_throughput_sweep, run_layer_sequence, simulate
from .optimizer import AnnealSchedule, ParetoArchive, amosa_run, select_final, sweep_kmax
from .routing import IRREGULAR, XY, XYYX, RoutingTable, route_for, route_irregular, route_xy, route_xyyx
from .scenario import ExperimentConfig, Pipeline
from .topology import (Placement, TileKind, Topology, make_custom, make_hetnoc, make_mesh,
                       mesh_opt_placement, validate, wihetnoc_placement)
from .traffic import (LayerProfile, TrafficMatrix, aggregate_matrix, build_many_to_few, load_trace,
                      workload_preset)
from .wireless import HybridRoutes, MacState, WirelessPlan, mac_arbitrate, place_wis

__version__ = "0.1.0"
