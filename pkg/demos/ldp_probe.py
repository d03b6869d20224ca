"""
Probing the large-deviation lower bound by Monte Carlo
======================================================

The action I(phi) prices the probability of the slow field staying in a
delta tube around phi: eps log P is bounded below by about -I(phi) for
small eps.  This script builds a ramp path with positive action, counts
tube hits across an epsilon sweep, and compares eps log p_hat against
the bound.  The tube radius must be smaller than the ramp, otherwise
the tube contains the free trajectory and the probability is order one.
"""

import numpy as np

from slowfast_ldp import BasisSpec, SpectralField
from slowfast_ldp.action import action_explicit
from slowfast_ldp.averaging import solve_averaged
from slowfast_ldp.experiments import ldp_probe
from slowfast_ldp.grids import FieldPath, TimeGrid
from slowfast_ldp.noise import QSpec, RngStream
from slowfast_ldp.slowfast import SystemSpec

basis = BasisSpec(n_modes=8)
spec = SystemSpec(
    epsilon=0.1,  # replaced per sweep entry
    sigma=0.5,
    lam=1.0,
    basis=basis,
    q=QSpec.inverse_square(8),
)

# ramp the first mode linearly away from the averaged flow
u0 = SpectralField(np.zeros(8), basis)
grid = TimeGrid(t_end=1.0, n_steps=400)
free = solve_averaged(u0, spec, grid)
ramp = 0.25
values = free.values.copy()
values[:, 0] += ramp * grid.times / grid.t_end
phi = FieldPath(values, grid, basis)

i_phi = action_explicit(phi, spec)
gamma = 0.5 * i_phi
delta = 0.15
print(f"action of the ramp path : {i_phi:.4f}")
print(f"tube radius             : {delta} (ramp {ramp})")
print(f"lower bound -(I+gamma)  : {-(i_phi + gamma):.4f}\n")

table = ldp_probe(
    phi,
    delta,
    gamma,
    eps_list=[0.2, 0.1, 0.05],
    n_replicas=400,
    spec=spec,
    rng=RngStream(seed=1234),
    i_phi=i_phi,
    threads=2,
)

print("eps     hits/n      p_hat     [Wilson 95%]        eps*log(p)  bound ok")
for r in table.rows:
    print(
        f"{r.epsilon:<7g} {r.n_hits:>4}/{r.n_replicas:<6} "
        f"{r.p_hat:<9.4f} [{r.p_lo:.4f}, {r.p_hi:.4f}]   "
        f"{r.eps_log_p:+.4f}    {r.lower_ok}"
    )

print("\neps*log(p) grows toward 0 as eps shrinks (prefactor effect);")
print("the value at the largest eps sits closest to -I.")
