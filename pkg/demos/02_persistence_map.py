"""Which habitats keep their population?

A patch of half-width L where the population grows at rate r, surrounded by
hostile ground (rate -q), moves right at speed c.  The population persists
exactly when the principal eigenvalue lambda(c, L) of the linearization
around zero is positive.  Each cell below is classified by that sign and
confirmed by iterating the full nonlinear equation down from a large
initial state.

Runtime: well under a minute on one core.
"""
import math

from habitat_waves import RunConfig, phase_sweep
from habitat_waves.analysis import row_monotone

config = RunConfig.from_dict({"grid": {"x_max": 40.0, "n": 801},
                              "spectral": {"cross_check": False}})
c_star = math.exp(0.5)
cs = [0.0, 0.4, 0.8, 1.2, 1.6, 2.0]
Ls = [0.5, 1.0, 2.0, 4.0, 8.0]
cells = phase_sweep(cs, Ls, config)

symbol = {"Persistence": "+", "Extinction": ".", "Indeterminate": "?"}
print(f"c* = {c_star:.4f}   (+ persists, . goes extinct, ? undecided)\n")
print("   c \\ L " + "".join(f"{L:>7g}" for L in Ls))
for c in cs:
    row = [cell for cell in cells if cell.c == c]
    print(f"{c:8.2f} " + "".join(f"{symbol[cell.classification]:>7s}" for cell in row))

print("\nlambda(c, L):")
for c in cs:
    row = [cell for cell in cells if cell.c == c]
    print(f"{c:8.2f} " + "".join(f"{cell.lambda_cl:7.3f}" for cell in row))

print(f"\nwider patches never do worse: {row_monotone(cells)}")
print("Above c* every row is extinct no matter how wide the patch is.")
