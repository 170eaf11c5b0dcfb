"""The smallest habitat that keeps up.

For c < c* there is a critical half-width L**(c): below it the population
dies, above it the population persists.  It is found twice here, once by
bisecting on the sign of lambda and once by bisecting on whether the
iteration from above settles on a positive steady state.  The two answers
coincide, and both grow without bound as c approaches c*.

At c = 0 even the transition zones alone sustain growth, so every
half-width persists.  Runtime: under a minute on one core.
"""
import math

from habitat_waves import RunConfig
from habitat_waves.analysis import critical_patch_size, steady_threshold

config = RunConfig.from_dict({"grid": {"x_max": 40.0, "n": 801},
                              "spectral": {"cross_check": False}})
c_star = math.exp(0.5)

print(f"{'c / c*':>7s} {'L** (lambda)':>13s} {'L* (steady)':>12s}")
for frac in (0.0, 0.25, 0.5, 0.75, 0.9):
    c = frac * c_star
    a = critical_patch_size(c, config, tol=1e-3)
    if not a.finite:
        print(f"{frac:7.2f}  {a.message}")
        continue
    b = steady_threshold(c, config, tol=1e-3)
    print(f"{frac:7.2f} {a.L_crossing:13.4f} {b.L_crossing:12.4f}")

beyond = critical_patch_size(1.05 * c_star, config)
print(f"\nc = 1.05 c*: {beyond.message}")
