"""Time stepping in the moving and fixed frames, steady states from above,
and the comparison-principle oracles.

The moving-frame equation is

    v_t = c v_xi + (K*v - v) + f(xi, v) v

with ``f(xi, v) = a(xi) - b(xi) v`` (``a = f(., 0)``, ``b`` the crowding
coefficient).  The fixed-frame equation drops the advection term and shifts
the habitat instead: ``f(x - c t, u)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
import math

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import splu

from .errors import CFLError, NumericalError
from .grid import Field, Grid, upwind_matrix
from .growth import GrowthModel, crowding, growth_linearized
from .kernels import ConvolutionOperator
from .spectral import characteristic_roots
from .stepping import EvolveSettings, _check_c, _grid_of, _rhs, _Stepper, cfl_bound

EXTINCT_LEVEL = 1e-8
TRIVIAL_LEVEL = 1e-6
MONOTONE_SLACK = 1e-10


@dataclass
class Trajectory:
    """Recorded snapshots plus why the run stopped."""

    fields: list
    reason: str
    diagnostics: dict = field(default_factory=dict)

    @property
    def final(self) -> Field:
        return self.fields[-1]

    @property
    def times(self) -> list:
        return [f.time for f in self.fields]


def step_moving_frame(field: Field, c: float, kernel_op: ConvolutionOperator,
                      growth: GrowthModel, dt: float) -> Field:
    """One clipped RK4 step of the moving-frame equation."""
    if field.frame != "moving":
        raise ValueError("step_moving_frame needs a moving-frame field")
    bound = cfl_bound(c, field.grid.dx, growth)
    if dt > bound * (1 + 1e-12):
        raise CFLError(f"dt={dt:.6g} exceeds CFL bound {bound:.6g}")
    stepper = _Stepper(c, kernel_op, growth, _grid_of(kernel_op, field.grid), "moving")
    out = stepper.step(field.values, field.time, dt)
    return field.with_values(np.maximum(out, 0.0), time=field.time + dt)


def _run(initial: Field, c, kernel_op, growth, settings, frame):
    if np.any(initial.values < 0):
        raise ValueError("initial data must be nonnegative")
    grid = _grid_of(kernel_op, initial.grid)
    stepper = _Stepper(c, kernel_op, growth, grid, frame)
    # the fixed frame has no advection but shares the step so both frames
    # are integrated identically
    dt = settings.resolve_dt(c, grid.dx, growth)
    per_unit = max(1, int(round(1.0 / dt)))
    probe = per_unit * dt
    n_steps = int(math.ceil(settings.t_max / dt - 1e-9))
    stride = int(settings.record_stride)
    flush = settings.flush_below

    v = initial.values.copy()
    t0 = initial.time
    fields = [initial.with_values(v.copy(), time=t0)]
    diag = {"dt": dt, "steps": 0, "min_before_clip": 0.0, "rates": []}
    if np.max(v, initial=0.0) < EXTINCT_LEVEL:
        diag["t_end"] = t0
        return Trajectory(fields, "Extinct", diag)

    anchor = v.copy()
    reason = "TMaxReached"
    for k in range(1, n_steps + 1):
        t = t0 + (k - 1) * dt
        v = stepper.step(v, t, dt)
        diag["min_before_clip"] = min(diag["min_before_clip"], float(v.min()))
        np.maximum(v, 0.0, out=v)
        if flush:
            v[v < flush] = 0.0
        t_now = t0 + k * dt
        if k % stride == 0:
            fields.append(initial.with_values(v.copy(), time=t_now))
        if v.max() < EXTINCT_LEVEL:
            reason = "Extinct"
            break
        if k % per_unit == 0:
            rate = float(np.max(np.abs(v - anchor))) / probe
            diag["rates"].append(rate)
            anchor = v.copy()
            if rate < settings.steady_tol:
                reason = "SteadyReached"
                break
    diag["steps"] = k
    diag["t_end"] = t_now
    if fields[-1].time != t_now:
        fields.append(initial.with_values(v.copy(), time=t_now))
    if reason == "TMaxReached":
        diag.update(_rate_extrapolation(diag["rates"]))
    return Trajectory(fields, reason, diag)


def _rate_extrapolation(rates):
    """Geometric extrapolation of the remaining distance to steady state."""
    if len(rates) < 3 or rates[-2] <= 0:
        return {}
    ratio = rates[-1] / rates[-2]
    out = {"rate_ratio": ratio}
    if 0 < ratio < 1:
        out["extrapolated_distance"] = rates[-1] * ratio / (1 - ratio)
    return out


def evolve(initial: Field, c: float, kernel_op: ConvolutionOperator, growth: GrowthModel,
           settings: EvolveSettings = EvolveSettings()) -> Trajectory:
    """Integrate the moving-frame equation until steady, extinct or t_max.

    Extinction (``max v < 1e-8``) is checked before the steady-rate test.
    """
    if initial.frame != "moving":
        raise ValueError("evolve needs a moving-frame field")
    return _run(initial, c, kernel_op, growth, settings, "moving")


def simulate_fixed_frame(initial: Field, c: float, kernel_op: ConvolutionOperator,
                         growth: GrowthModel, settings: EvolveSettings = EvolveSettings()) -> Trajectory:
    """Integrate ``u_t = K*u - u + f(x - c t, u) u`` in the fixed frame."""
    if initial.frame != "fixed":
        initial = Field(initial.grid, initial.values, "fixed", initial.time)
    return _run(initial, c, kernel_op, growth, settings, "fixed")


def stationary_residual(values, c, kernel_op, growth, grid: Grid | None = None) -> np.ndarray:
    """``c v' + K*v - v + f(xi, v) v`` on the grid."""
    grid = _grid_of(kernel_op, grid)
    x = grid.x
    return _rhs(np.asarray(values, dtype=float), c, growth_linearized(growth, x),
                crowding(growth, x), grid.dx, kernel_op)


@dataclass
class SteadyState:
    """Outcome of the iteration from above: ``kind`` is Positive or Trivial."""

    kind: str
    field: Field
    residual: float
    t_march: float
    newton_steps: int
    max_increase: float
    diagnostics: dict = field(default_factory=dict)

    @property
    def positive(self) -> bool:
        return self.kind == "Positive"

    @property
    def monotone(self) -> bool:
        return self.max_increase <= MONOTONE_SLACK

    @property
    def steady_max(self) -> float:
        return float(self.field.values.max()) if self.positive else 0.0


def _newton_matrix(c, kernel_op, grid, a):
    A = kernel_op.sparse_matrix() + sparse.diags(a - 1.0)
    if c:
        A = A + c * upwind_matrix(grid.n, grid.dx)
    return A.tocsc()


def upper_initial(c: float, growth: GrowthModel, kernel, grid: Grid, M: float = 2.0,
                  decay_fraction: float = 0.75, offset: float = 2.0, sharpness: float = 4.0) -> Field:
    """Smooth super-solution equal to about ``M`` on the habitat.

    Beyond ``L + L0 + offset`` the profile bends (log-concavely) into
    ``exp(decay_fraction * mu_-(0) xi)`` on the right and
    ``exp(decay_fraction * mu_+(0) xi)`` on the left.  Such tails decay more
    slowly than any steady state and still satisfy the super-solution
    inequality, yet leave no jump against the zero exterior at the inflow
    end, where a jump would make the upwind stencil overshoot.  For
    homogeneous growth with ``c > 0`` the profile instead rolls off to zero
    over a unit length at the right end.
    """
    x = grid.x
    if growth.transition == "homogeneous":
        if c == 0:
            return Field.constant(grid, M)
        return Field(grid, M * -np.expm1(-(grid.x_max + grid.dx - x)), "moving")
    roots = characteristic_roots(c, growth.q, kernel, 0.0)
    m_right = decay_fraction * abs(roots.mu_minus)
    m_left = decay_fraction * roots.mu_plus
    R = growth.outer_edge + offset
    soft = lambda z: np.logaddexp(0.0, sharpness * z) / sharpness
    logv = math.log(M) - soft(m_right * (x - R)) - soft(m_left * (-R - x))
    return Field(grid, np.exp(logv), "moving")


def steady_state_from_above(c: float, kernel_op: ConvolutionOperator, growth: GrowthModel,
                            settings: EvolveSettings = EvolveSettings(), grid: Grid | None = None,
                            M: float = 2.0, t_march: float = 10.0, accelerate: bool = True,
                            newton_tol: float = 1e-12, max_newton: int = 200,
                            strict: bool = False) -> SteadyState:
    """Steady state reached by decreasing from a super-solution of height M.

    The solution is first marched in time from :func:`upper_initial` (at
    most ``t_march`` time units when accelerating).  Newton iterations then continue from the
    current super-solution; for this concave problem they decrease
    monotonically to the maximal steady state, which is much faster than
    waiting out the ``e^{lambda t}`` approach near the threshold.  Each
    snapshot must lie below the previous one up to ``1e-10``.
    """
    _check_c(c)
    grid = _grid_of(kernel_op, grid)
    if M < 1:
        raise ValueError("M must be at least 1 so that u = M is a super-solution")
    stepper = _Stepper(c, kernel_op, growth, grid, "moving")
    dt = settings.resolve_dt(c, grid.dx, growth)
    per_unit = max(1, int(round(1.0 / dt)))
    horizon = min(settings.t_max, t_march) if accelerate else settings.t_max
    n_steps = int(math.ceil(horizon / dt - 1e-9))

    v = upper_initial(c, growth, kernel_op.kernel, grid, M).values.copy()
    anchor = v.copy()
    max_increase = 0.0
    t = 0.0
    done = False
    for k in range(1, n_steps + 1):
        new = np.maximum(stepper.step(v, t, dt), 0.0)
        max_increase = max(max_increase, float(np.max(new - v)))
        v = new
        t = k * dt
        if v.max() < EXTINCT_LEVEL:
            done = True
            break
        if k % per_unit == 0:
            rate = float(np.max(np.abs(v - anchor))) / (per_unit * dt)
            anchor = v.copy()
            if rate < settings.steady_tol:
                done = True
                break

    a = stepper._a
    b = stepper._b
    newton_steps = 0
    if accelerate and not done:
        base = _newton_matrix(c, kernel_op, grid, a)
        for newton_steps in range(1, max_newton + 1):
            F = _rhs(v, c, a, b, grid.dx, kernel_op)
            J = (base - sparse.diags(2.0 * b * v)).tocsc()
            step = splu(J).solve(-F)
            new = np.maximum(v + step, 0.0)
            max_increase = max(max_increase, float(np.max(new - v)))
            change = float(np.max(np.abs(new - v)))
            v = new
            if not np.all(np.isfinite(v)):
                raise NumericalError("Newton iteration produced non-finite values")
            if v.max() < EXTINCT_LEVEL or change < newton_tol * max(1.0, v.max()):
                break
        else:
            raise NumericalError("Newton iteration from above did not converge",
                                 {"newton_steps": newton_steps})

    residual = float(np.max(np.abs(_rhs(v, c, a, b, grid.dx, kernel_op))))
    if strict and max_increase > MONOTONE_SLACK:
        raise NumericalError(f"iteration from above increased by {max_increase:.3g}",
                             {"max_increase": max_increase})
    kind = "Trivial" if v.max() < TRIVIAL_LEVEL else "Positive"
    out = Field(grid, v if kind == "Positive" else np.zeros(grid.n), "moving", t)
    return SteadyState(kind, out, residual, t, newton_steps, max_increase,
                       {"dt": dt, "raw_max": float(v.max())})


def relax_to_steady(initial: Field, c: float, kernel_op: ConvolutionOperator, growth: GrowthModel,
                    settings: EvolveSettings = EvolveSettings(), polish_below: float = 1e-4,
                    newton_tol: float = 1e-12, max_newton: int = 50) -> Field:
    """Steady state reached from arbitrary initial data (not necessarily from above).

    Time-marches until the rate drops under ``polish_below``, then polishes
    with Newton iterations.
    """
    grid = _grid_of(kernel_op, initial.grid)
    polish = EvolveSettings(settings.dt, settings.t_max, max(polish_below, settings.steady_tol),
                            settings.record_stride, settings.flush_below)
    traj = evolve(initial, c, kernel_op, growth, polish)
    v = traj.final.values.copy()
    if traj.reason == "Extinct":
        return traj.final
    x = grid.x
    a, b = growth_linearized(growth, x), crowding(growth, x)
    base = _newton_matrix(c, kernel_op, grid, a)
    for _ in range(max_newton):
        F = _rhs(v, c, a, b, grid.dx, kernel_op)
        J = (base - sparse.diags(2.0 * b * v)).tocsc()
        new = np.maximum(v + splu(J).solve(-F), 0.0)
        change = float(np.max(np.abs(new - v)))
        v = new
        if change < newton_tol * max(1.0, v.max()):
            break
    return traj.final.with_values(v)


@dataclass
class ComparisonReport:
    max_violation: float
    passed: bool
    pairs: int
    t_end: float


def comparison_audit(pair, c: float, kernel_op: ConvolutionOperator, growth: GrowthModel,
                     settings: EvolveSettings = EvolveSettings(t_max=5.0),
                     tol: float = 1e-8) -> ComparisonReport:
    """Co-evolve ``lower <= upper`` and track ``max_t max_xi (lower - upper)+``.

    ``pair`` holds two Fields or two arrays of shape ``(batch, n)``; batches
    run in one vectorized integration.
    """
    lower, upper = (np.atleast_2d(getattr(p, "values", p)).astype(float) for p in pair)
    if lower.shape != upper.shape:
        raise ValueError("pair members differ in shape")
    if np.any(lower > upper):
        raise ValueError("first member must lie below the second")
    grid = _grid_of(kernel_op)
    stepper = _Stepper(c, kernel_op, growth, grid, "moving")
    dt = settings.resolve_dt(c, grid.dx, growth)
    n_steps = int(math.ceil(settings.t_max / dt - 1e-9))
    v = np.concatenate([lower, upper])
    m = lower.shape[0]
    worst = 0.0
    for k in range(n_steps):
        v = np.maximum(stepper.step(v, k * dt, dt), 0.0)
        worst = max(worst, float(np.max(v[:m] - v[m:])))
    return ComparisonReport(worst, worst < tol, m, n_steps * dt)


@dataclass(frozen=True)
class TailSupersolution:
    """Two-exponential profile equal to ``M`` at both ends of its interval."""

    M: float
    R: float
    tau: float
    side: str
    mu_minus: float
    mu_plus: float

    @property
    def k1(self) -> float:
        M, t, mm, mp = self.M, self.tau, self.mu_minus, self.mu_plus
        if self.side == "right":
            return M * math.expm1(mp * t) / (math.exp(mp * t) - math.exp(mm * t))
        return M * -math.expm1(-mp * t) / (math.exp(-mm * t) - math.exp(-mp * t))

    @property
    def k2(self) -> float:
        M, t, mm, mp = self.M, self.tau, self.mu_minus, self.mu_plus
        if self.side == "right":
            return M * -math.expm1(mm * t) / (math.exp(mp * t) - math.exp(mm * t))
        return M * math.expm1(-mm * t) / (math.exp(-mm * t) - math.exp(-mp * t))

    @property
    def interval(self) -> tuple:
        if self.side == "right":
            return (self.R, self.R + self.tau)
        return (self.R - self.tau, self.R)

    def __call__(self, xi):
        xi = np.asarray(xi, dtype=float)
        M, t, mm, mp, s = self.M, self.tau, self.mu_minus, self.mu_plus, xi - self.R
        # written with bounded exponents: each term is a multiple of M times
        # an exponential that is <= 1 on the interval
        if self.side == "right":
            den = -math.expm1((mm - mp) * t)
            first = M * math.expm1(mp * t) * math.exp(-mp * t) / den * np.exp(mm * s)
            second = M * -math.expm1(mm * t) / den * np.exp(mp * (s - t))
        else:
            den = -math.expm1((mm - mp) * t)
            first = M * -math.expm1(-mp * t) / den * np.exp(mm * (s + t))
            second = M * math.expm1(-mm * t) * math.exp(mm * t) / den * np.exp(mp * s)
        out = first + second
        return out if out.ndim else float(out)


def tail_supersolution(M: float, R: float, tau: float, side: str, mu_minus: float,
                       mu_plus: float) -> TailSupersolution:
    """Exponential super-solution of the tail problem beyond the habitat.

    ``side`` is ``"right"`` (interval ``[R, R + tau]``) or ``"left"``
    (interval ``[R - tau, R]``).
    """
    side = side.lower()
    if side not in ("right", "left"):
        raise ValueError("side must be 'right' or 'left'")
    if not (mu_minus < 0 < mu_plus):
        raise ValueError("need mu_minus < 0 < mu_plus")
    if not M > 0 or not tau > 0:
        raise ValueError("M and tau must be positive")
    return TailSupersolution(float(M), float(R), float(tau), side, float(mu_minus), float(mu_plus))
