"""Shaping an irregular wireline network with AMOSA.

Starts from the mesh on the WiHetNoC placement, keeps the mesh's link
budget, and trades mean link load against its spread.  The final design is
the archive member with the lowest analytic EDP.

    python demos/02_optimize_wireline.py --iters 5000 --kmax 6
"""
# %%
import argparse

from noc_forge import AnnealSchedule, amosa_run, link_utilization, make_mesh, route_for, select_final
from noc_forge import wihetnoc_placement
from noc_forge.optimizer import candidate_edp
from noc_forge.traffic import aggregate_matrix, workload_preset

ap = argparse.ArgumentParser()
ap.add_argument("--iters", type=int, default=5000)
ap.add_argument("--kmax", type=int, default=6)
ap.add_argument("--seed", type=int, default=1)
args = ap.parse_args()

placement = wihetnoc_placement()
seed = make_mesh(8, 8, placement)
traffic = aggregate_matrix(placement, workload_preset("lenet"), 1.0)
base = link_utilization(seed, traffic, route_for(seed, traffic))
print(f"mesh seed: mean U {base.mean_u:.5f}, sigma {base.std_u:.5f}, {len(seed.edges)} links")

# %% anneal
schedule = AnnealSchedule.for_iterations(args.iters, t_min=1e-5)
res = amosa_run(seed, traffic, k_max=args.kmax, schedule=schedule, rng_seed=args.seed)
print(f"{res.iterations} iterations, archive of {len(res.archive)}")
for c in sorted(res.archive, key=lambda c: c.u_mean)[:: max(1, len(res.archive) // 8)]:
    print(f"  U {c.u_mean:.5f}  sigma {c.u_std:.5f}")

# %% pick by EDP
chosen, edp = select_final(res.archive, lambda c: candidate_edp(c, seed, traffic))
print(f"selected: U {chosen.u_mean / base.mean_u:.2f}x mesh, sigma {chosen.u_std / base.std_u:.2f}x mesh, "
      f"EDP {edp:.0f}")
topo = chosen.topology(seed)
print("router degrees:", sorted(int(d) for d in topo.degrees()))
