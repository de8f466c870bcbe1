"""Where does many-to-few traffic pile up on a mesh?

Builds the 8x8 mesh with CPUs and MCs clustered in the middle, loads it
with the LeNet layer mix and compares XY against XY+YX routing.
"""
# %%
import numpy as np

from noc_forge import XY, XYYX, link_utilization, make_mesh, mesh_opt_placement, route_for, utilization_cdf
from noc_forge.topology import TileKind
from noc_forge.traffic import aggregate_matrix, workload_preset

placement = mesh_opt_placement()
mesh = make_mesh(8, 8, placement)
traffic = aggregate_matrix(placement, workload_preset("lenet"), peak_rate=1.0)
print({k.value: v for k, v in placement.counts().items()})
print(f"total injection {traffic.total:.3f} flits/cycle, MC share {traffic.mc_share(placement):.2f}")

# %% link loads under both dimension orders
mcs = set(placement.routers_of(TileKind.MC))
for scheme in (XY, XYYX):
    lu = link_utilization(mesh, traffic, route_for(mesh, traffic, scheme))
    ratio = lu.u / lu.mean_u
    worst = lu.links[int(np.argmax(ratio))]
    near_mc = max(r for (a, b), r in zip(lu.links, ratio) if a in mcs or b in mcs)
    print(f"{scheme:6s} mean U {lu.mean_u:.4f}  sigma {lu.std_u:.4f}  "
          f"hottest link {worst} at {ratio.max():.1f}x mean (MC-adjacent max {near_mc:.1f}x)")

# %% CDF of normalized utilization, XY+YX
lu = link_utilization(mesh, traffic, route_for(mesh, traffic, XYYX))
for value, frac in utilization_cdf(lu, lu.mean_u)[::12]:
    print(f"  U/mean <= {value:5.2f}: {frac:6.1%} of links")
