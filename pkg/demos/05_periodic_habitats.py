"""Lots of patches, far apart.

Repeating the habitat with period p gives an eigenvalue lambda_p that can
be computed without truncating the line: lambda_p solves rho(lambda) = 1,
where rho is the spectral radius of K composed with the explicit resolvent
of the advection-reaction part.  Doubling p removes neighbours, so lambda_p
can only go down, and it settles on the single-patch eigenvalue.
"""
from habitat_waves import RunConfig
from habitat_waves.analysis import _instance
from habitat_waves.periodic import PeriodicCoefficient, lambda_T, periodization_limit, spectral_radius_map
from habitat_waves.spectral import principal_eigenvalue_operator

config = RunConfig.from_dict({})
c, L = 0.5, 3.0
growth, grid, op = _instance(config, L)

per = periodization_limit(c, growth, 30.0, 3, op)
single = principal_eigenvalue_operator(c, growth, grid, op).lambda_cl
for p, lam in zip(per.periods, per.values):
    print(f"p = {p:6.1f}   lambda_p = {lam:.10f}")
print(f"single patch      lambda = {single:.10f}")
print(f"non-increasing in p: {per.monotone}")

coef = PeriodicCoefficient.from_growth(growth, 30.0, op.dx, config.kernel.support_radius)
lam_t = lambda_T(coef, c)[0]
print(f"\nrho(alpha) for p = 30 (it blows up at lambda_T = {lam_t:.4f}):")
for shift in (0.05, 0.2, 0.5, 1.0, 2.0, 4.0):
    alpha = lam_t + shift
    print(f"  alpha = {alpha:+.4f}   rho = {spectral_radius_map(coef, c, alpha, config.kernel):.6f}")
