"""Persistence/extinction classification, critical patch sizes and the
property audits built on the solvers (tails, uniqueness, equivalence)."""
from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
import math
import os
import time

import numpy as np

from .config import RunConfig
from .errors import HabitatError, NumericalError
from .frame_solver import (TRIVIAL_LEVEL, comparison_audit, evolve, relax_to_steady,
                           simulate_fixed_frame, steady_state_from_above,
                           tail_supersolution)
from .grid import Field, Grid
from .spectral import (characteristic_roots, eigen_tail_check, principal_eigenvalue_growthrate,
                       principal_eigenvalue_operator, spreading_speed)
from .stepping import EvolveSettings

PATCH_FLOOR = 1e-8
CROSS_FLAG = 1e-2
CLASSES = ("Persistence", "Extinction", "Indeterminate")


@dataclass
class PhaseCell:
    c: float
    L: float
    lambda_cl: float
    classification: str
    steady_max: float
    wall_time: float = 0.0
    lambda_growth: float = math.nan
    cross_gap: float = math.nan
    steady_kind: str = ""
    steady_residual: float = math.nan
    flags: list = field(default_factory=list)
    error: str | None = None

    def to_json(self) -> dict:
        return asdict(self)


def _instance(config: RunConfig, L: float | None = None, grid: Grid | None = None):
    growth = config.growth if L is None else config.growth.with_L(L)
    grid = grid or config.grid_for(growth)
    return growth, grid, config.operator(grid)


def lambda_at(c: float, L: float, config: RunConfig, grid: Grid | None = None) -> float:
    growth, grid, op = _instance(config, L, grid)
    return principal_eigenvalue_operator(c, growth, grid, op, method=config.method).lambda_cl


def _patch_min(phi: Field, L: float) -> float:
    x = phi.grid.x
    inside = np.abs(x) <= max(L, phi.grid.dx)
    return float(phi.values[inside].min())


def classify(c: float, L: float, config: RunConfig, cross_check: bool | None = None) -> PhaseCell:
    """Classify one (c, L) cell by the sign of lambda, confirmed by the
    steady state reached from above.

    Inside ``|lambda| <= band`` the cell is Indeterminate.  A steady state
    contradicting the sign also yields Indeterminate, with a flag.  The
    growth-rate cross-check (capped at ``config.cross_t_max`` time units)
    only flags disagreement above 1e-2.
    """
    t0 = time.perf_counter()
    growth, grid, op = _instance(config, L)
    band = config.band
    report = principal_eigenvalue_operator(c, growth, grid, op, method=config.method)
    lam = report.lambda_cl
    cell = PhaseCell(float(c), float(L), lam, "Indeterminate", 0.0)
    if config.cross_check if cross_check is None else cross_check:
        est = principal_eigenvalue_growthrate(
            c, growth, grid, op, EvolveSettings(config.dt, config.cross_t_max, config.steady_tol))
        cell.lambda_growth = est.value
        cell.cross_gap = abs(est.value - lam)
        if cell.cross_gap > CROSS_FLAG:
            cell.flags.append(f"cross_method_gap={cell.cross_gap:.3g}")

    steady = steady_state_from_above(c, op, growth, config.settings, grid)
    cell.steady_kind = steady.kind
    cell.steady_residual = steady.residual
    cell.steady_max = steady.steady_max
    positive = steady.positive and _patch_min(steady.field, L) > PATCH_FLOOR
    if lam > band:
        if positive:
            cell.classification = "Persistence"
        else:
            cell.flags.append("steady_state_trivial_with_positive_lambda")
    elif lam < -band:
        if not steady.positive:
            cell.classification = "Extinction"
        else:
            cell.flags.append("steady_state_positive_with_negative_lambda")
    cell.wall_time = time.perf_counter() - t0
    return cell


def _sweep_cell(args):
    data, c, L = args
    config = RunConfig.from_dict(data)
    t0 = time.perf_counter()
    try:
        return classify(c, L, config)
    except (HabitatError, ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
        return PhaseCell(float(c), float(L), math.nan, "Indeterminate", 0.0,
                         time.perf_counter() - t0, error=f"{type(exc).__name__}: {exc}")


def sweep_workers(n_cells: int) -> int:
    env = os.environ.get("HABITAT_WAVES_THREADS")
    cap = os.cpu_count() or 1
    if env:
        try:
            cap = max(1, int(env))
        except ValueError:
            pass
    return max(1, min(cap, n_cells))


def phase_sweep(c_values, L_values, config: RunConfig, workers: int | None = None) -> list:
    """``classify`` on the Cartesian grid, ordered by (c index, L index).

    Cells are independent; with more than one worker they run in separate
    processes.  Per-cell failures are stored in ``PhaseCell.error``.
    """
    c_values, L_values = list(c_values), list(L_values)
    if not c_values or not L_values:
        raise ValueError("c_values and L_values must be non-empty")
    data = config.to_dict()
    jobs = [(data, float(c), float(L)) for c in c_values for L in L_values]
    workers = sweep_workers(len(jobs)) if workers is None else max(1, workers)
    if workers == 1:
        return [_sweep_cell(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_sweep_cell, jobs))


def row_monotone(cells) -> bool:
    """Within each c row, no Extinction after a Persistence cell (by L)."""
    rows = {}
    for cell in cells:
        rows.setdefault(cell.c, []).append(cell)
    for row in rows.values():
        seen = False
        for cell in sorted(row, key=lambda k: k.L):
            if cell.classification == "Persistence":
                seen = True
            elif seen and cell.classification == "Extinction":
                return False
    return True


@dataclass
class ThresholdResult:
    """Outcome of a critical patch size search."""

    c: float
    L_crossing: float
    bracket: tuple
    finite: bool
    evaluations: int
    method: str
    message: str = ""
    endpoint_values: tuple = ()

    def to_json(self) -> dict:
        return {"c": self.c, "L_crossing": self.L_crossing, "bracket": list(self.bracket),
                "finite": self.finite, "evaluations": self.evaluations, "method": self.method,
                "message": self.message}


def _threshold(c, config, l_bracket, tol, predicate, method, max_factor=2 ** 10):
    lo, hi = map(float, l_bracket)
    if not 0 < lo < hi:
        raise ValueError("bracket must satisfy 0 < low < high")
    c_star, _ = spreading_speed(config.kernel, config.growth.r)
    if c >= c_star:
        return ThresholdResult(float(c), math.inf, (lo, hi), False, 0, method,
                               f"no finite threshold: c={c} >= c*={c_star:.10g}")
    evals = 0

    def test(L, grid):
        nonlocal evals
        evals += 1
        return predicate(L, grid)

    # expand on per-L grids, then bisect on one grid sized for the upper end
    while not test(hi, None):
        if hi * 2 > max_factor * lo:
            return ThresholdResult(float(c), math.inf, (lo, hi), False, evals, method,
                                   f"no crossing below {max_factor}*low")
        hi *= 2
    grid = config.grid_for(config.growth.with_L(hi))
    if test(lo, grid):
        return ThresholdResult(float(c), math.nan, (lo, hi), False, evals, method,
                               "threshold below bracket: persistence already at low")
    if not test(hi, grid):
        raise NumericalError("upper bracket end changed sign on the common grid", {"high": hi})
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if test(mid, grid):
            hi = mid
        else:
            lo = mid
    return ThresholdResult(float(c), 0.5 * (lo + hi), (lo, hi), True, evals, method)


def critical_patch_size(c: float, config: RunConfig, l_bracket=(0.01, 20.0),
                        tol: float = 1e-3) -> ThresholdResult:
    """Critical half-width from the sign of lambda (bisection in L).

    Relies on lambda being non-decreasing in L.  For ``c >= c*`` the result
    is marked infinite without any search.
    """
    def positive(L, grid):
        return lambda_at(c, L, config, grid) > 0
    return _threshold(c, config, l_bracket, tol, positive, "lambda")


def steady_threshold(c: float, config: RunConfig, l_bracket=(0.01, 20.0),
                     tol: float = 1e-3) -> ThresholdResult:
    """Critical half-width from positivity of the steady state from above."""
    def positive(L, grid):
        growth, grid, op = _instance(config, L, grid)
        return steady_state_from_above(c, op, growth, config.settings, grid).positive
    return _threshold(c, config, l_bracket, tol, positive, "steady_state")


@dataclass
class ThresholdConsistency:
    c: float
    L_lambda: float
    L_steady: float
    difference: float
    grid_slack: float
    tolerance: float
    passed: bool


def threshold_consistency(c: float, config: RunConfig, l_bracket=(0.01, 20.0),
                          tol: float = 1e-3) -> ThresholdConsistency:
    """Compare both threshold searches.  The allowance is ``2 tol`` plus
    twice the grid slack, estimated as ``|lambda_n - lambda_2n| / dlambda/dL``
    at the crossing."""
    a = critical_patch_size(c, config, l_bracket, tol)
    b = steady_threshold(c, config, l_bracket, tol)
    if not (a.finite and b.finite):
        return ThresholdConsistency(c, a.L_crossing, b.L_crossing, math.nan, math.nan, 2 * tol,
                                    a.finite == b.finite)
    L = a.L_crossing
    growth, grid, op = _instance(config, L + 0.05)
    h = 0.05
    slope = (lambda_at(c, L + h, config, grid) - lambda_at(c, L - h, config, grid)) / (2 * h)
    fine = grid.refined()
    gap = abs(lambda_at(c, L, config, fine) - lambda_at(c, L, config, grid))
    slack = gap / slope if slope > 0 else math.inf
    allowed = 2 * tol + 2 * slack
    diff = abs(a.L_crossing - b.L_crossing)
    return ThresholdConsistency(c, a.L_crossing, b.L_crossing, diff, slack, allowed, diff <= allowed)


@dataclass
class TailAudit:
    slopes: tuple
    bounds: tuple
    window: tuple
    slopes_passed: bool
    supersolution_excess: dict
    supersolution_passed: bool
    eigen_slopes_passed: bool | None = None

    @property
    def passed(self) -> bool:
        ok = self.slopes_passed and self.supersolution_passed
        return ok and self.eigen_slopes_passed is not False


def _fit(x, v, mask):
    mask = mask & (v > 1e-300)
    if mask.sum() < 5:
        raise NumericalError("tail below 1e-300 in the fit window; shrink the window")
    return float(np.polyfit(x[mask], np.log(v[mask]), 1)[0])


def wave_tail_audit(phi: Field, c: float, growth, kernel, taus=(5.0, 10.0, 20.0),
                    rel_tol: float = 0.05, eigen=None) -> TailAudit:
    """One-sided exponential tail bounds of a positive steady state.

    The right log-slope is fitted on ``[L+L0+5, x_max - margin/2]`` with
    ``margin = x_max - (L+L0)``, the left one on the mirror image.  The
    profile must also lie below the two-exponential super-solution of height
    ``max phi`` on ``[R, R+tau]`` and ``[-R-tau, -R]`` with ``R = L+L0``.
    Passing a SpectralReport as ``eigen`` adds the eigenfunction check
    against ``mu_-+(lambda)``.
    """
    x, v = phi.grid.x, phi.values
    R = growth.outer_edge
    x_max = phi.grid.x_max
    lo, hi = R + 5.0, x_max - 0.5 * (x_max - R)
    if hi - lo < 1.0:
        raise ValueError("grid too short for a tail fit window")
    right = _fit(x, v, (x >= lo) & (x <= hi))
    left = _fit(x, v, (x <= -lo) & (x >= -hi))
    roots = characteristic_roots(c, growth.q, kernel, 0.0)
    mm, mp = roots.mu_minus, roots.mu_plus
    bounds = (mm + rel_tol * abs(mm), mp - rel_tol * mp)
    slopes_ok = right <= bounds[0] and left >= bounds[1]

    M = float(v.max())
    excess = {}
    for tau in taus:
        for side, edge in (("right", R), ("left", -R)):
            psi = tail_supersolution(M, edge, tau, side, mm, mp)
            a, b = psi.interval
            if a < -x_max or b > x_max:
                continue
            sel = (x >= a) & (x <= b)
            excess[(float(tau), side)] = float(np.max(v[sel] - psi(x[sel])))
    super_ok = all(e <= 1e-9 * M for e in excess.values())

    eig_ok = None
    if eigen is not None:
        lam_roots = characteristic_roots(c, growth.q, kernel, eigen.lambda_cl)
        eig_ok = eigen_tail_check(eigen, lam_roots, R).passed
    return TailAudit((right, left), bounds, (lo, hi), bool(slopes_ok), excess, bool(super_ok), eig_ok)


@dataclass
class UniquenessReport:
    gap: float
    kinds: list
    passed: bool
    flags: list = field(default_factory=list)
    profiles: list = field(default_factory=list, repr=False)


def default_initials(grid: Grid, L: float) -> list:
    """``u = 2``, ``0.1`` on the patch and a half-height bump on the patch."""
    x = grid.x
    patch = np.abs(x) <= max(L, grid.dx)
    width = max(L, 2 * grid.dx)
    bump = np.where(np.abs(x) < width, np.cos(0.5 * np.pi * x / width) ** 2, 0.0)
    return [Field.constant(grid, 2.0), Field(grid, 0.1 * patch.astype(float)), Field(grid, 0.5 * bump)]


def uniqueness_audit(c: float, L: float, config: RunConfig, initials=None,
                     tol: float = 1e-6) -> UniquenessReport:
    """Relax several initial data to steady states and compare them."""
    growth, grid, op = _instance(config, L)
    if initials is None:
        initials = default_initials(grid, L)
    else:
        initials = [f if isinstance(f, Field) else Field(grid, np.asarray(f, dtype=float))
                    for f in initials]
    profiles = [relax_to_steady(f, c, op, growth, config.settings) for f in initials]
    kinds = ["Positive" if p.values.max() >= TRIVIAL_LEVEL else "Trivial" for p in profiles]
    flags = []
    if len(set(kinds)) > 1:
        flags.append("mixed Trivial/Positive outcomes: near-threshold instance")
    gap = 0.0
    for i in range(len(profiles)):
        for j in range(i + 1, len(profiles)):
            gap = max(gap, float(np.max(np.abs(profiles[i].values - profiles[j].values))))
    return UniquenessReport(gap, kinds, gap < tol and not flags, flags, profiles)


@dataclass
class EquivalenceReport:
    rows: list
    agreement: float
    disagreements: list
    passed: bool


def equivalence_audit(c_values, L_values, config: RunConfig, cells=None) -> EquivalenceReport:
    """Compare the lambda sign with steady-state positivity cell by cell.

    Disagreements are tolerated only inside the Indeterminate band.
    """
    cells = cells if cells is not None else phase_sweep(c_values, L_values, config)
    rows, bad = [], []
    for cell in cells:
        lam_pos = cell.lambda_cl > 0
        steady_pos = cell.steady_kind == "Positive"
        in_band = abs(cell.lambda_cl) <= config.band
        agree = lam_pos == steady_pos
        row = {"c": cell.c, "L": cell.L, "lambda": cell.lambda_cl, "steady_positive": steady_pos,
               "agree": agree, "in_band": in_band}
        rows.append(row)
        if not agree:
            bad.append(row)
    frac = sum(r["agree"] for r in rows) / len(rows) if rows else 1.0
    return EquivalenceReport(rows, frac, bad, all(r["in_band"] for r in bad))


def speed_bound(config: RunConfig, c: float) -> float:
    """Upper bound ``mu* (c* - c)`` for lambda(c, L) at any L."""
    c_star, mu_star = spreading_speed(config.kernel, config.growth.r)
    return mu_star * (c_star - c)


@dataclass
class ExtinctionCheck:
    lambda_cl: float
    steady_kind: str
    sup_final: float
    t_end: float
    passed: bool


def extinction_horizon(c: float, L: float, config: RunConfig, lam: float,
                       level: float = 1e-4) -> float:
    """Time allowed for decay from ``u = 1`` below ``level``.

    For ``c > c*`` the occupied region behind the habitat recedes only at
    speed ``c - c*`` in the moving frame, so the mass initially on the patch
    needs about ``2(L + L0) / (c - c*)`` to leave before the exponential
    decay at rate ``|lambda|`` sets in.  Both are padded by half.
    """
    c_star, _ = spreading_speed(config.kernel, config.growth.r)
    t = config.t_max
    if lam < 0:
        t = max(t, 1.5 * math.log(1.0 / level) / -lam)
    if c > c_star:
        edge = L + config.growth.L0
        t += 1.5 * (2.0 * edge + 10.0) / (c - c_star)
    return t


def extinction_check(c: float, L: float, config: RunConfig, level: float = 1e-4,
                     t_max: float | None = None) -> ExtinctionCheck:
    """lambda < 0, Trivial steady state and decay from ``u = 1`` below ``level``."""
    growth, grid, op = _instance(config, L)
    lam = principal_eigenvalue_operator(c, growth, grid, op, method=config.method).lambda_cl
    steady = steady_state_from_above(c, op, growth, config.settings, grid)
    horizon = extinction_horizon(c, L, config, lam, level) if t_max is None else t_max
    settings = EvolveSettings(config.dt, horizon, config.steady_tol, 10 ** 9, config.flush_below)
    traj = evolve(Field.constant(grid, 1.0), c, op, growth, settings)
    sup = traj.final.sup()
    return ExtinctionCheck(lam, steady.kind, sup, traj.final.time,
                           lam < 0 and steady.kind == "Trivial" and sup < level)

def random_ordered_pairs(grid: Grid, count: int, rng: np.random.Generator, bumps: int = 4):
    """``count`` smooth pairs ``lower <= upper``, each a sum of random
    Gaussian bumps with heights in [0, 2]."""
    x = grid.x
    span = 0.5 * grid.x_max

    def smooth(k):
        centers = rng.uniform(-span, span, (k, bumps, 1))
        widths = rng.uniform(0.5, 5.0, (k, bumps, 1))
        heights = rng.uniform(0.0, 1.0, (k, bumps, 1))
        return (heights * np.exp(-0.5 * ((x - centers) / widths) ** 2)).sum(axis=1)

    lower = smooth(count)
    upper = lower + smooth(count)
    scale = 2.0 / np.maximum(upper.max(axis=1, keepdims=True), 1e-12)
    return lower * scale, upper * scale


def comparison_campaign(c: float, L: float, config: RunConfig, count: int = 100,
                        t_max: float = 5.0, tol: float = 1e-8):
    """Order preservation over ``count`` random pairs (seeded by ``config.seed``)."""

    growth, grid, op = _instance(config, L)
    rng = np.random.default_rng(config.seed)
    pair = random_ordered_pairs(grid, count, rng)
    return comparison_audit(pair, c, op, growth, EvolveSettings(config.dt, t_max), tol)


@dataclass
class FrameEquivalence:
    max_gap: float
    tolerance: float
    t: float
    passed: bool


def frame_equivalence(c: float, L: float, config: RunConfig, t: float = 5.0,
                      initial=None, edge: float = 10.0) -> FrameEquivalence:
    """Moving-frame ``v(t, xi)`` against fixed-frame ``u(t, xi + c t)``.

    The fixed-frame solution is interpolated linearly; points within
    ``edge`` of where either window's boundary can reach are ignored.  The
    tolerance is ``2 dx max|v_xi|``.
    """
    growth, grid, op = _instance(config, L)
    x = grid.x
    u0 = np.exp(-0.5 * (x / 4.0) ** 2) if initial is None else np.asarray(initial, dtype=float)
    settings = EvolveSettings(config.dt, t, 1e-300)
    v = evolve(Field(grid, u0), c, op, growth, settings).final
    u = simulate_fixed_frame(Field(grid, u0, "fixed"), c, op, growth, settings).final
    shift = c * v.time
    sel = np.abs(x) <= grid.x_max - shift - edge
    gap = float(np.max(np.abs(np.interp(x[sel] + shift, x, u.values) - v.values[sel])))
    tol = 2 * grid.dx * float(np.max(np.abs(np.gradient(v.values, grid.dx))))
    return FrameEquivalence(gap, tol, v.time, gap < tol)
