"""Explicit RK4 stepping shared by the time-dependent solvers."""
from __future__ import annotations

from dataclasses import dataclass
import math

import numpy as np

from .errors import CFLError, NumericalError
from .grid import Grid, upwind_derivative
from .growth import GrowthModel, crowding, growth_linearized
from .kernels import ConvolutionOperator


def cfl_bound(c: float, dx: float, growth: GrowthModel) -> float:
    """Largest admissible explicit time step."""
    return min(0.5 * dx / max(c, dx), 0.25 / (1.0 + max(growth.r, growth.q)))


@dataclass(frozen=True)
class EvolveSettings:
    """Time-stepping controls.  ``dt=None`` picks 0.9 of the CFL bound,
    rounded down so that a whole number of steps fits in one time unit.

    ``flush_below`` zeroes values under an absolute floor after each step.
    FFT round-off puts ~1e-16 |v| at every node, and for ``c > c*`` a long
    patch amplifies such a persistent source by ``exp(nu D)`` over its
    length, enough to sustain a spurious population.  The map is
    nondecreasing, so ordering and positivity survive.  0 disables it.
    """

    dt: float | None = None
    t_max: float = 200.0
    steady_tol: float = 1e-10
    record_stride: int = 1000
    flush_below: float = 1e-15

    def __post_init__(self):
        if self.dt is not None and not self.dt > 0:
            raise ValueError("dt must be positive")
        if not self.t_max > 0:
            raise ValueError("t_max must be positive")
        if not self.steady_tol > 0:
            raise ValueError("steady_tol must be positive")
        if not self.flush_below >= 0:
            raise ValueError("flush_below must be nonnegative")
        if int(self.record_stride) < 1:
            raise ValueError("record_stride must be a positive integer")

    def resolve_dt(self, c: float, dx: float, growth: GrowthModel) -> float:
        bound = cfl_bound(c, dx, growth)
        if self.dt is None:
            return 1.0 / math.ceil(1.0 / (0.9 * bound))
        if self.dt > bound * (1 + 1e-12):
            raise CFLError(f"dt={self.dt:.6g} exceeds CFL bound {bound:.6g} (c={c}, dx={dx:.6g})")
        return float(self.dt)


def _check_c(c):
    if c < 0:
        raise ValueError("c must be nonnegative (reflect x -> -x to treat a habitat moving left)")


def _grid_of(kernel_op: ConvolutionOperator, grid: Grid | None = None) -> Grid:
    if grid is not None:
        if grid.n != kernel_op.n_points:
            raise ValueError("grid and convolution operator sizes differ")
        return grid
    return Grid(0.5 * kernel_op.dx * (kernel_op.n_points - 1), kernel_op.n_points)


def _rhs(v, c, a, b, dx, kernel_op):
    out = kernel_op.apply(v) - v + (a - b * v) * v
    if c:
        out = out + c * upwind_derivative(v, dx)
    return out


def _rk4(v, dt, rhs):
    k1 = rhs(v, 0.0)
    k2 = rhs(v + 0.5 * dt * k1, 0.5 * dt)
    k3 = rhs(v + 0.5 * dt * k2, 0.5 * dt)
    k4 = rhs(v + dt * k3, dt)
    return v + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


class _Stepper:
    """RK4 for either frame; batched along leading axes."""

    def __init__(self, c, kernel_op, growth, grid, frame, linear=False):
        _check_c(c)
        self.c = float(c)
        self.op = kernel_op
        self.growth = growth
        self.x = grid.x
        self.dx = grid.dx
        self.frame = frame
        self.linear = linear
        self._a = growth_linearized(growth, self.x)
        self._b = np.zeros_like(self.x) if linear else crowding(growth, self.x)

    def coefficients(self, t):
        if self.frame == "moving" or self.c == 0:
            return self._a, self._b
        xi = self.x - self.c * t
        b = np.zeros_like(xi) if self.linear else crowding(self.growth, xi)
        return growth_linearized(self.growth, xi), b

    def step(self, v, t, dt):
        adv = self.c if self.frame == "moving" else 0.0

        def rhs(w, s):
            a, b = self.coefficients(t + s)
            return _rhs(w, adv, a, b, self.dx, self.op)

        out = _rk4(v, dt, rhs)
        if not np.all(np.isfinite(out)):
            bad = np.argwhere(~np.isfinite(out))[0]
            raise NumericalError(
                f"non-finite value at t={t + dt:.6g}, index {tuple(int(i) for i in bad)}",
                {"t": t + dt, "index": bad.tolist(), "dt": dt},
            )
        return out
