"""
Elliptic Calogero-Moser flow for A2
===================================

Integrate a trajectory, watch the energy, and run it backwards.
"""

# %%
import numpy as np

from cmlab.dynamics import CMSystem, Controls, PhaseState, flow_map, integrate, reduced_flow_check
from cmlab.elliptic import Lattice
from cmlab.rootsys import root_system

# an imaginary coupling makes c^2 negative: the particles repel
sys = CMSystem(root_system("A", 2), 1j, "elliptic", Lattice(0.5, 0.5j))
s0 = PhaseState(np.array([0.31, 0.17]), np.array([0.2, -0.4]))

# %%
tr = integrate(sys, s0, 10.0, Controls(n_samples=101))
print("relative energy drift:", tr.energy_drift)
print("distance to the nearest wall along the way:",
      min(np.min(sys.wall_distances(x)) for x in tr.x))

# %%
back = flow_map(sys, PhaseState(tr.final.x, -tr.final.p), 10.0)
print("round trip error:", np.max(np.abs(back.x - s0.x)))

# %%
# the same right-hand side read off the coadjoint action of the reduced Higgs field
print("coadjoint prediction vs vector field:", reduced_flow_check(sys, s0))

# %%
tr.to_csv("a2_trajectory.csv")
