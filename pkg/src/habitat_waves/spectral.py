"""Characteristic roots, the spreading speed and the principal eigenvalue of
the linearized moving-frame operator ``c D + K - I + f(., 0)``."""
from __future__ import annotations

from dataclasses import dataclass, field
import math

import numpy as np
from scipy import optimize, sparse
from scipy.sparse.linalg import splu

from .errors import NumericalError
from .grid import Field, Grid, linear_operator, operator_for, upwind_derivative, upwind_derivative_periodic
from .growth import GrowthModel, growth_linearized
from .kernels import MU_MAX, Kernel, moment_generating, moment_generating_derivative
from .stepping import EvolveSettings, _check_c, _rk4


# ---------------------------------------------------------------- roots


@dataclass(frozen=True)
class CharacteristicRoots:
    """Roots ``mu_minus < 0 < mu_plus`` of ``g(mu) = c mu + MGF(mu) - 1 - q - lambda``."""

    lam: float
    mu_minus: float
    mu_plus: float
    residuals: tuple
    c: float = 0.0
    q: float = 1.0


def characteristic_function(c: float, q: float, kernel: Kernel, lam: float, mu: float,
                            mu_max: float = MU_MAX) -> float:
    return c * mu + moment_generating(kernel, mu, mu_max) - 1.0 - q - lam


def _root_on_side(g, sign, mu_max):
    lo, hi = 0.0, 1.0
    while True:
        if hi > mu_max:
            raise NumericalError(f"root bracket exceeds mu_max={mu_max}")
        try:
            val = g(sign * hi)
        except OverflowError:
            val = math.inf
        if val > 0:
            break
        lo, hi = hi, 2.0 * hi
    a, b = sorted((sign * lo, sign * hi))
    gg = lambda m: g(m) if np.isfinite(m) else math.inf
    return optimize.bisect(gg, a, b, xtol=1e-15, rtol=1e-15, maxiter=500)


def characteristic_roots(c: float, q: float, kernel: Kernel, lam: float,
                         mu_max: float = MU_MAX) -> CharacteristicRoots:
    """Both real roots of the strictly convex characteristic function.

    The bracket starts at [0, 1] on each side and doubles until the sign
    changes; bisection then runs down to floating-point resolution.
    """
    _check_c(c)
    if not lam > -q:
        raise ValueError(f"lambda={lam} must exceed -q={-q}")

    def g(mu):
        return characteristic_function(c, q, kernel, lam, mu, mu_max)

    mp = _root_on_side(g, +1.0, mu_max)
    mm = _root_on_side(g, -1.0, mu_max)
    return CharacteristicRoots(float(lam), mm, mp, (g(mm), g(mp)), float(c), float(q))


def spreading_speed(kernel: Kernel, r: float, mu_max: float = MU_MAX) -> tuple[float, float]:
    """``c* = min_{mu > 0} (MGF(mu) - 1 + r) / mu`` and its minimizer ``mu*``.

    A log-spaced scan brackets the minimum, golden-section search narrows
    it, and the stationarity condition ``mu MGF'(mu) = MGF(mu) - 1 + r``
    (whose left-minus-right side is increasing) pins ``mu*`` to round-off.
    """
    if not r > 0:
        raise ValueError("r must be positive")

    def h(mu):
        try:
            return (moment_generating(kernel, mu, mu_max) - 1.0 + r) / mu
        except OverflowError:
            return math.inf

    mus = np.geomspace(1e-3, mu_max, 240)
    vals = np.array([h(m) for m in mus])
    i = int(np.argmin(vals))
    if i == 0 or i == mus.size - 1:
        raise NumericalError("spreading-speed minimum not bracketed by the scan")
    lo, mid, hi = mus[i - 1], mus[i], mus[i + 1]
    gold = optimize.minimize_scalar(h, bracket=(lo, mid, hi), method="golden", tol=1e-10)
    mu = float(gold.x)

    def stationarity(m):
        return m * moment_generating_derivative(kernel, m) - moment_generating(kernel, m, mu_max) + 1.0 - r

    if stationarity(lo) < 0 < stationarity(hi):
        mu = optimize.brentq(stationarity, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps)
    return float(h(mu)), float(mu)


# ---------------------------------------------------------------- eigenproblem


def _coefficient(growth, x):
    if isinstance(growth, GrowthModel):
        return np.asarray(growth_linearized(growth, x), dtype=float) * np.ones_like(x)
    a = np.asarray(growth, dtype=float)
    if a.shape != x.shape:
        raise ValueError("coefficient samples must match the grid")
    return a


def _boundary(boundary, a):
    if boundary == "auto":
        # a constant coefficient is translation invariant: the whole-line
        # problem is reproduced exactly by wrapping instead of truncating
        return "periodic" if np.ptp(a) == 0 else "zero"
    if boundary not in ("zero", "periodic"):
        raise ValueError(f"unknown boundary {boundary!r}")
    return boundary


def operator_matrix(c: float, growth, grid: Grid, kernel_op=None, boundary: str = "auto",
                    dense: bool = False):
    """Discretized linear operator (sparse CSR unless ``dense``)."""
    _check_c(c)
    op = operator_for(kernel_op if kernel_op is not None else _need_kernel(growth), grid.dx, grid.n)
    a = _coefficient(growth, grid.x)
    A = linear_operator(c, a, grid.dx, op, periodic=_boundary(boundary, a) == "periodic")
    return A.toarray() if dense else A


def _far_field(a, bnd):
    """Spectral bound of the constant far-field operator, or None when the
    problem is wrapped.  A truncated grid leaks mass through its edges, so
    without a strong enough patch its top eigenvalue drops below this level;
    on the whole line the spectrum never sits below it."""
    if bnd == "periodic":
        return None
    return float(min(a[0], a[-1]))


def _need_kernel(growth):
    raise ValueError("a kernel or convolution operator is required")


@dataclass
class SpectralReport:
    """Principal eigenvalue, positive eigenfunction and provenance."""

    c: float
    L: float
    lambda_cl: float
    eigenfunction: Field
    method: str
    cross_method_gap: float = math.nan
    tail_exponents: tuple = (math.nan, math.nan)
    residual: float = math.nan
    iterations: int = 0
    boundary: str = "zero"
    mu_minus: float = math.nan
    mu_plus: float = math.nan
    diagnostics: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "c": self.c, "L": self.L, "lambda": self.lambda_cl,
            "mu_minus": self.mu_minus, "mu_plus": self.mu_plus,
            "method": self.method, "method_gap": self.cross_method_gap,
            "tail_exponents": list(self.tail_exponents), "residual": self.residual,
            "iterations": self.iterations, "boundary": self.boundary,
        }


def _normalize(w):
    i = int(np.argmax(np.abs(w)))
    return w / w[i]


def _rayleigh(A, w):
    return float(w @ (A @ w) / (w @ w))


def _inverse_iteration(A, shift, tol, max_iters):
    """Shift-invert power iteration; the shift moves next to the eigenvalue
    once the estimate settles, after which convergence is immediate."""
    n = A.shape[0]
    eye = sparse.identity(n, format="csc")
    lu = splu((shift * eye - A).tocsc())
    w = np.ones(n)
    lam = _rayleigh(A, w)
    refined = False
    for it in range(1, max_iters + 1):
        w = _normalize(lu.solve(w))
        new = _rayleigh(A, w)
        change = abs(new - lam)
        lam = new
        if change < tol * max(1.0, abs(lam)):
            return lam, w, it
        if not refined and change < 1e-6:
            refined = True
            shift = lam + 1e-3
            lu = splu((shift * eye - A).tocsc())
    raise NumericalError("inverse iteration did not converge", {"iterations": max_iters, "lambda": lam})


def _power_iteration(A, growth_bounds, tol, max_iters):
    """Power iteration on ``I + dt A`` with ``dt = 0.5 / (1 + q + r + ||A||_row)``."""
    r, q = growth_bounds
    row = float(abs(A).sum(axis=1).max())
    dt = 0.5 / (1.0 + q + r + row)
    w = np.ones(A.shape[0])
    lam = _rayleigh(A, w)
    for it in range(1, max_iters + 1):
        w = _normalize(w + dt * (A @ w))
        new = _rayleigh(A, w)
        change = abs(new - lam)
        lam = new
        if change < tol * dt:
            return lam, w, it
    raise NumericalError("power iteration did not converge", {"iterations": max_iters, "lambda": lam})


def _dense_eig(A):
    vals, vecs = np.linalg.eig(A.toarray())
    i = int(np.argmax(vals.real))
    return float(vals[i].real), _normalize(vecs[:, i].real), 1


def _tail_slopes(phi: Field, L_outer: float, margin: float = 5.0):
    x, v = phi.grid.x, phi.values
    out = []
    for side in (1, -1):
        mask = (side * x >= L_outer + margin) & (side * x <= phi.grid.x_max - margin) & (v > 1e-300)
        if mask.sum() < 3:
            out.append(math.nan)
            continue
        out.append(float(np.polyfit(x[mask], np.log(v[mask]), 1)[0]))
    return tuple(out)


def principal_eigenvalue_operator(c: float, growth, grid: Grid, kernel_op, method: str = "inverse",
                                  boundary: str = "auto", tol: float = 1e-12,
                                  max_iters: int = 1_000_000) -> SpectralReport:
    """Rightmost eigenvalue of the discretized linear operator.

    ``method`` is ``"inverse"`` (shift-invert power iteration, default),
    ``"power"`` (power iteration on ``I + dt A``) or ``"dense"`` (full
    eigendecomposition, for debugging small grids).  ``growth`` may be a
    GrowthModel or an array of ``f(xi, 0)`` samples; a constant coefficient
    is treated with periodic wrapping (see ``boundary``).
    """
    _check_c(c)
    op = operator_for(kernel_op, grid.dx, grid.n)
    a = _coefficient(growth, grid.x)
    bnd = _boundary(boundary, a)
    A = linear_operator(c, a, grid.dx, op, periodic=bnd == "periodic")
    if method == "inverse":
        lam, w, its = _inverse_iteration(A, float(a.max()) + 1.0, tol, max_iters)
    elif method == "power":
        bounds = (growth.r, growth.q) if isinstance(growth, GrowthModel) else (a.max(), -a.min())
        lam, w, its = _power_iteration(A, bounds, tol, max_iters)
    elif method == "dense":
        lam, w, its = _dense_eig(A)
    else:
        raise ValueError(f"unknown method {method!r}")
    residual = float(np.max(np.abs(A @ w - lam * w)))
    phi = Field(grid, w, "moving")
    L = growth.L if isinstance(growth, GrowthModel) else math.nan
    diagnostics = {"solver": method}
    floor = _far_field(a, bnd)
    if floor is not None and lam < floor:
        diagnostics["truncated_lambda"] = lam
        diagnostics["no_isolated_eigenvalue"] = True
        lam = floor
    report = SpectralReport(float(c), L, lam, phi, "OperatorEig", residual=residual,
                            iterations=its, boundary=bnd, diagnostics=diagnostics)
    if isinstance(growth, GrowthModel) and growth.transition != "homogeneous":
        report.tail_exponents = _tail_slopes(phi, growth.outer_edge)
        q = growth.q
        if lam > -q:
            try:
                roots = characteristic_roots(c, q, op.kernel, lam)
                report.mu_minus, report.mu_plus = roots.mu_minus, roots.mu_plus
            except NumericalError:
                pass
    return report


@dataclass
class GrowthRateEstimate:
    """Long-time exponential rate of the linearized flow."""

    value: float
    slope: float
    r2: float
    t_end: float
    converged: bool
    trend: list = field(default_factory=list)

    def __float__(self):
        return self.value


def _rk4_rate(slope, dt):
    """Continuous rate whose RK4 amplification factor matches ``slope``."""
    target = math.exp(slope * dt)
    R = lambda z: 1 + z + z * z / 2 + z ** 3 / 6 + z ** 4 / 24 - target
    z0 = slope * dt
    z = optimize.brentq(R, z0 - 0.5, z0 + 0.5, xtol=1e-16)
    return z / dt


def _ls_fit(t, y):
    A = np.vstack([t, np.ones_like(t)]).T
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    fit = A @ coef
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    ss_res = float(np.sum((y - fit) ** 2))
    r2 = 1.0 if ss_tot < 1e-24 else 1.0 - ss_res / ss_tot
    return float(coef[0]), r2


def principal_eigenvalue_growthrate(c: float, growth, grid: Grid, kernel_op,
                                    settings: EvolveSettings | None = None,
                                    expected_gap: float | None = None, boundary: str = "auto",
                                    t_min: float = 20.0, check_every: float = 10.0,
                                    slope_tol: float = 1e-8) -> GrowthRateEstimate:
    """Exponential growth rate of the linearized equation started from 1.

    The solution is renormalized every unit of time and the accumulated log
    norm is fitted by least squares over the last half of the run.  The
    run stops once successive fits agree to ``slope_tol`` or at
    ``200 / max(0.01, expected_gap)`` (or ``settings.t_max`` when settings
    are passed).  The fitted
    per-step factor is converted to a continuous rate by inverting the RK4
    amplification polynomial.
    """
    _check_c(c)
    op = operator_for(kernel_op, grid.dx, grid.n)
    a = _coefficient(growth, grid.x)
    bnd = _boundary(boundary, a)
    t_cap = 200.0 / max(0.01, expected_gap if expected_gap is not None else 0.01)
    if settings is not None:
        t_cap = min(t_cap, settings.t_max)
    settings = settings or EvolveSettings()
    model = growth if isinstance(growth, GrowthModel) else GrowthModel(max(a.max(), 1e-12), max(-a.min(), 1e-12))
    dt = settings.resolve_dt(c, grid.dx, model)
    per_unit = max(1, int(round(1.0 / dt)))

    if bnd == "periodic":
        conv = op.apply_periodic
        deriv = upwind_derivative_periodic
    else:
        conv = op.apply
        deriv = upwind_derivative

    def rhs(w, s):
        out = conv(w) - w + a * w
        if c:
            out = out + c * deriv(w, grid.dx)
        return out

    w = np.ones(grid.n)
    log_norm = [0.0]
    times = [0.0]
    trend = []
    prev = None
    converged = False
    unit = per_unit * dt
    while times[-1] < t_cap:
        for _ in range(per_unit):
            w = _rk4(w, dt, rhs)
        norm = float(np.max(np.abs(w)))
        if not np.isfinite(norm) or norm == 0:
            raise NumericalError("linearized flow degenerated", {"t": times[-1]})
        w = w / norm
        log_norm.append(log_norm[-1] + math.log(norm))
        times.append(times[-1] + unit)
        t_now = times[-1]
        if t_now >= t_min and (len(times) - 1) % max(1, int(round(check_every / unit))) == 0:
            half = len(times) // 2
            slope, r2 = _ls_fit(np.array(times[half:]), np.array(log_norm[half:]))
            trend.append((t_now, slope))
            if prev is not None and abs(slope - prev) < slope_tol:
                converged = True
                break
            prev = slope
    half = len(times) // 2
    slope, r2 = _ls_fit(np.array(times[half:]), np.array(log_norm[half:]))
    # slope is per unit of time of the discrete map; convert per step
    value = _rk4_rate(slope, dt)
    floor = _far_field(a, bnd)
    if floor is not None:
        value = max(value, floor)
    return GrowthRateEstimate(value, slope, r2, times[-1], converged, trend)


def principal_eigenvalue(c: float, growth, grid: Grid, kernel_op, cross_check: bool = False,
                         **kwargs) -> SpectralReport:
    """Operator eigenvalue, optionally cross-checked by the growth rate."""
    report = principal_eigenvalue_operator(c, growth, grid, kernel_op, **kwargs)
    if cross_check:
        est = principal_eigenvalue_growthrate(c, growth, grid, kernel_op)
        report.cross_method_gap = abs(report.lambda_cl - est.value)
        report.method = "Both"
        report.diagnostics["growth_rate"] = est.value
        report.diagnostics["growth_rate_r2"] = est.r2
    return report


def grid_gap(c: float, growth, grid: Grid, kernel_op) -> tuple[float, float, float]:
    """``lambda`` on the grid with ``n`` and ``2n`` points and their difference."""
    lam_n = principal_eigenvalue_operator(c, growth, grid, kernel_op).lambda_cl
    fine = Grid(grid.x_max, 2 * grid.n)
    lam_2n = principal_eigenvalue_operator(c, growth, fine, kernel_op).lambda_cl
    return lam_n, lam_2n, lam_2n - lam_n


@dataclass
class TailCheck:
    passed: bool
    skipped: bool
    slopes: tuple
    bounds: tuple
    window: tuple


def eigen_tail_check(report: SpectralReport, roots_at_lambda: CharacteristicRoots,
                     L_outer: float | None = None, margin: float = 5.0,
                     rel_tol: float = 0.05) -> TailCheck:
    """One-sided tail bounds of the eigenfunction against ``mu_-+(lambda)``.

    The right log-slope must not exceed ``mu_-`` by more than 5% of
    ``|mu_-|``; the left one must be at least ``mu_+`` less 5%.
    """
    phi = report.eigenfunction
    if report.boundary == "periodic" or np.ptp(phi.values) < 1e-12:
        return TailCheck(True, True, (math.nan, math.nan), (math.nan, math.nan), ())
    if L_outer is None:
        raise ValueError("L_outer (= L + L0) is required")
    lo, hi = L_outer + margin, phi.grid.x_max - margin
    if hi - lo < 1.0:
        raise ValueError("fit window too short")
    right, left = _tail_slopes(phi, L_outer, margin)
    mm, mp = roots_at_lambda.mu_minus, roots_at_lambda.mu_plus
    bounds = (mm + rel_tol * abs(mm), mp - rel_tol * mp)
    passed = right <= bounds[0] and left >= bounds[1]
    return TailCheck(bool(passed), False, (right, left), bounds, (lo, hi))
