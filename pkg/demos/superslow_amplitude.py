"""
Amplitude models on the superslow manifold
==========================================

Just past the first bifurcation the slow field collapses onto a
one-dimensional manifold parametrised by the mode-1 amplitude.  Two
scalar SDEs describe it: one reduced from the slow-fast pair, one from
the averaged (LDP) equation.  Their drifts differ by an exact multiple
of eps, which this script verifies along with the fixed points and the
attraction rate of the transverse modes.
"""

from fractions import Fraction

from slowfast_ldp.grids import TimeGrid
from slowfast_ldp.noise import RngStream
from slowfast_ldp.superslow import (
    COEFFS,
    amplitude_fixed_point,
    cubic_amplitude,
    drift_difference,
    offmanifold_decay_rate,
    simulate_amplitude,
)

lam_p, eps = Fraction(1, 10), Fraction(1, 20)

# cubic coefficient of each model, composed from the exact ledger
cubic_sf = COEFFS.cubic_base + COEFFS.cubic_lam * lam_p + COEFFS.sf_cubic_eps * eps
cubic_ldp = COEFFS.cubic_base + COEFFS.cubic_lam * lam_p
print("exact coefficient ledger (as fractions):")
print(f"  cubic (sf)    : {cubic_sf}")
print(f"  cubic (ldp)   : {cubic_ldp}")
print(f"  quintic       : {COEFFS.quintic}")

# the two drifts differ by eps * (lam' a / 4 - 3 a^3 / 64), exactly
a = Fraction(3, 7)
diff = drift_difference(a, lam_p, eps)
closed = eps * (lam_p * a / 4 - 3 * a**3 / 64)
print(f"\ndrift difference at a = {a}: {diff}  (closed form {closed})")
print(f"identity holds exactly      : {diff == closed}")

# fixed points in the eps -> 0 limit: cubic root vs the quintic correction
a_cubic = cubic_amplitude(float(lam_p))
a_star = amplitude_fixed_point(float(lam_p), 0.0, "sf")
print(f"\ncubic root sqrt(16 lam'/3)  : {a_cubic:.5f}")
print(f"quintic-corrected root      : {a_star:.5f}")

# the noiseless amplitude flow lands on the fixed point
path = simulate_amplitude(
    0.2,
    "sf",
    lam_p=float(lam_p),
    eps=0.0,
    sigma=0.0,
    grid=TimeGrid(200.0, 4000),
    rng=RngStream(seed=1),
)
print(f"flow endpoint               : {path[-1]:.5f}")

# transverse modes die at rate lam_2 - 3/2 + 1/(1 + lam_2) = 2.7
rate = offmanifold_decay_rate(eps=0.02)
print(f"\noff-manifold decay rate     : {rate:.3f}  (predicted 2.7)")
