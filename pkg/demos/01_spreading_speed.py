"""How fast can the population spread on its own?

Without a moving habitat, a population with per-capita growth r and a
dispersal kernel K spreads at

    c* = min over mu > 0 of (MGF(mu) - 1 + r) / mu.

A habitat that moves faster than c* outruns every population.  For the unit
Gaussian kernel with r = 1 the minimum sits at mu* = 1 and c* = e^(1/2).
This script checks that, compares a compactly supported kernel and shows
how the speed responds to r.
"""
import math

import numpy as np

from habitat_waves.kernels import bump, gaussian
from habitat_waves.spectral import characteristic_roots, spreading_speed

k = gaussian(1.0)
c_star, mu_star = spreading_speed(k, 1.0)
print(f"Gaussian sigma=1, r=1:  c* = {c_star:.12f}  (e^0.5 = {math.exp(0.5):.12f}),  mu* = {mu_star:.12f}")

# a compactly supported kernel of the same reach disperses less far
for radius in (1.0, 2.0, 3.0):
    cs, ms = spreading_speed(bump(radius), 1.0)
    print(f"bump radius {radius:g}:      c* = {cs:.6f},  mu* = {ms:.6f}")

print("\nc* as a function of the growth rate r (Gaussian kernel):")
for r in np.linspace(0.25, 2.0, 8):
    cs, _ = spreading_speed(k, r)
    print(f"  r = {r:4.2f}   c* = {cs:.6f}")

# outside the patch the linearized decay rate is -q; the stationary tails
# of a wave behave like exp(mu x) with mu the two roots of
# c mu + MGF(mu) - 1 - q = lambda
print("\nTail exponents outside the habitat (q = 1, lambda = 0):")
for c in (0.0, 0.5, 1.0, 1.5):
    r = characteristic_roots(c, 1.0, k, 0.0)
    print(f"  c = {c:3.1f}   ahead: mu- = {r.mu_minus:+.6f}   behind: mu+ = {r.mu_plus:+.6f}")
print("A moving habitat leaves a longer tail behind it (smaller mu+) than ahead.")
