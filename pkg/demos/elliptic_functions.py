"""
Weierstrass functions on a lattice
==================================

Build a lattice from its half-periods, evaluate sigma, zeta and wp, and run
the identity suite that the CLI ``elliptic-check`` wraps.
"""

# %%
import numpy as np

from cmlab.elliptic import Lattice, identity_suite

L = Lattice(0.5, 0.5 * (0.3 + 0.8j))
print("tau =", L.tau, " nome =", L.nome)
print("eta1, eta2 =", L.eta1, L.eta2)

# %%
# wp has a double pole at the origin; the Laurent tail is small near it
z = 0.05 + 0.02j
print("wp(z) - 1/z^2 =", L.wp(z) - 1 / z**2)

# %%
# rho0(x, z) has residue -1 at z = 0; a small circle shows it
t = np.linspace(0, 2 * np.pi, 64, endpoint=False)
r = 0.1
w = r * np.exp(1j * t)
res = np.mean(L.rho0(0.17, w) * w)
print("residue of rho0 at z = 0:", res)

# %%
checks = identity_suite(L, n_points=100, rng=np.random.default_rng(0))
for name, err in sorted(checks.items(), key=lambda kv: -kv[1])[:5]:
    print(f"{err:9.2e}  {name}")
print("worst:", max(checks.values()))
