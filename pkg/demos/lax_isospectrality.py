"""
Lax matrices and their spectra
==============================

The bcs Lax matrix of B2 in the 4-dimensional vector representation: check
dL/dt = [M, L] numerically, then watch the characteristic polynomial stay put.
"""

# %%
import numpy as np

from cmlab.dynamics import CMSystem, random_state
from cmlab.elliptic import Lattice
from cmlab.lax import lax_pair, lax_residual_report, spectral_conservation, trace_residue
from cmlab.rootsys import named_rep, root_system

sys = CMSystem(root_system("B", 2), [0.6j, 0.9j], "elliptic", Lattice(0.5, 0.5j))
rep = named_rep(sys.rs, "vector")
s = random_state(sys, np.random.default_rng(1))
z = 0.21 + 0.13j

# %%
lp = lax_pair("bcs", sys, rep, s)
np.set_printoptions(precision=3, suppress=True)
print(lp.L(z))

# %%
r = lax_residual_report("bcs", sys, rep, s, z)
print(f"||dL/dt - [M, L]|| / ||L|| = {r.residual:.2e}  (finite-difference error {r.fd_error:.1e})")

# %%
sc = spectral_conservation("bcs", sys, rep, s, 5.0, [z, 0.1 - 0.3j])
print("coefficient drift per power of w:", " ".join(f"{d:.1e}" for d in sc.drift.max(axis=1)))

# %%
# the residue of zeta(z) tr L(z)^2 is a multiple of the Hamiltonian
from cmlab.dynamics import cm_hamiltonian
print(trace_residue("bcs", sys, rep, s) / cm_hamiltonian(sys, s))
