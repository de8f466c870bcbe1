"""Adding wireless shortcuts and watching one channel's MAC.

Places 24 GPU-MC WIs over four channels (plus the CPU-MC channel) on a
mesh, then drives a six-member channel with random requests.
"""
# %%
from collections import Counter

from noc_forge import HybridRoutes, make_mesh, place_wis, route_for, wihetnoc_placement
from noc_forge.traffic import aggregate_matrix, workload_preset
from noc_forge.wireless import area_overhead, effective_twhc, simulate_mac

placement = wihetnoc_placement()
mesh = make_mesh(8, 8, placement)
traffic = aggregate_matrix(placement, workload_preset("lenet"), 1.0)
routing = route_for(mesh, traffic)
plan = place_wis(mesh, traffic, wi_budget=24, channel_count=4, routing=routing)
for ch in plan.channels:
    print(f"channel {ch.id}: hosts {plan.hosts(ch.id)}")
print(f"area: {area_overhead(plan, which='gpu'):.2%} (GPU channels), {area_overhead(plan):.2%} (all)")

# %% how much traffic can use a shortcut
wi = mesh.with_wireless(plan)
print(f"eligible share {HybridRoutes(wi).wireless_share(traffic):.1%}")
print(f"weighted hops: wireline {effective_twhc(mesh, traffic, routing):.3f}, "
      f"with shortcuts {effective_twhc(wi, traffic, routing):.3f}")

# %% the slotted MAC on its own
trace = simulate_mac(n_members=6, cycles=100_000, seed=3)
print(f"{len(trace.arbitrations)} grants, at most {trace.max_transmitters} transmitter at a time")
print("grants per WI:", trace.grant_counts())
print("grants to others while waiting:", sorted(Counter(trace.waits).items()))
