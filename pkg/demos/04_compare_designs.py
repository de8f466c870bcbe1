"""Mesh vs HetNoC vs WiHetNoC, layer by layer.

Runs the whole flow at a reduced annealing budget: optimize the wireline
network for one k_max, place WIs, derive HetNoC, then simulate every LeNet
layer on all three networks.

    python demos/04_compare_designs.py --iters-per-temp 20
"""
# %%
import argparse

from noc_forge import ExperimentConfig, Pipeline
from noc_forge.netsim import run_layer_sequence

ap = argparse.ArgumentParser()
ap.add_argument("--iters-per-temp", type=int, default=20)
ap.add_argument("--kmax", type=int, default=6)
ap.add_argument("--preset", default="lenet")
args = ap.parse_args()

cfg = ExperimentConfig()
cfg.optimizer.iters_per_temp = args.iters_per_temp
cfg.workload.preset = args.preset
pipe = Pipeline(cfg)
sweep = pipe.optimize([args.kmax])
designs = pipe.designs(pipe.wireline(sweep[args.kmax].selected.edges))
print(f"k_max {args.kmax}: {sweep[args.kmax].result.iterations} iterations, analytic EDP {sweep[args.kmax].edp:.0f}")

# %% simulate each layer
sim = cfg.sim_config(pipe.sim_seed)
seqs = {name: run_layer_sequence(topo, rt, pipe.preset, sim, cfg.workload.peak_rate, cfg.workload.affinity)
        for name, topo, rt in designs.entries()}
base = seqs["mesh"]
print(f"{'layer':6s}" + "".join(f"{n:>12s}" for n in seqs))
for k, (layer, _) in enumerate(base.layers):
    print(f"{layer:6s}" + "".join(f"{s.layers[k][1].avg_latency:12.1f}" for s in seqs.values()))
for name, s in seqs.items():
    print(f"{name:9s} latency {s.avg_latency / base.avg_latency:.2f}x  EDP {s.edp / base.edp:.2f}x  "
          f"wireless {s.wireless_utilization:.1%}")
