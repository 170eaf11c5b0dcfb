"""Principal eigenvalues for the habitat repeated with period p.

With ``T = c d/dxi - I + a(xi)`` the periodic eigenproblem
``(K + T) phi = lambda phi`` is equivalent to ``rho(lambda) = 1``, where
``rho(alpha)`` is the spectral radius of ``K (alpha - T)^{-1}``.  For
``c > 0`` the resolvent of ``T`` is explicit and ``rho`` decreases from
``+inf`` at ``lambda_T = -1 + mean(a)`` to 0, so the crossing is bracketed.
"""
from __future__ import annotations

from dataclasses import dataclass, field
import math

import numpy as np
from scipy import optimize, sparse
from scipy.sparse.linalg import splu

from .errors import NumericalError
from .grid import linear_operator, operator_for, upwind_matrix
from .growth import GrowthModel, growth_linearized
from .kernels import ConvolutionOperator
from .spectral import _inverse_iteration


@dataclass(frozen=True)
class PeriodicCoefficient:
    """Samples of a p-periodic coefficient on ``xi_j = -p/2 + j h``."""

    p: float
    h: float
    a: np.ndarray = field(repr=False)

    def __post_init__(self):
        a = np.asarray(self.a, dtype=float)
        if a.ndim != 1 or a.size < 4 or a.size % 2:
            raise ValueError("need an even number (>= 4) of samples per period")
        if not math.isclose(a.size * self.h, self.p, rel_tol=1e-12):
            raise ValueError("p must equal n * h")
        a.setflags(write=False)
        object.__setattr__(self, "a", a)

    @property
    def n(self) -> int:
        return self.a.size

    @property
    def xi(self) -> np.ndarray:
        return -0.5 * self.p + self.h * np.arange(self.n)

    @property
    def abar(self) -> float:
        # periodic trapezoid rule
        return float(np.mean(self.a))

    @classmethod
    def from_growth(cls, growth: GrowthModel, p: float, h: float,
                    support_radius: float = 0.0) -> "PeriodicCoefficient":
        """Periodize ``f(., 0)`` on ``[-p/2, p/2)``; ``p`` is rounded to an
        even number of cells of width ``h`` so that ``xi = 0`` is a node."""
        n = 2 * max(2, int(round(p / (2 * h))))
        p_eff = n * h
        if growth.transition != "homogeneous" and p_eff <= 2 * growth.outer_edge + 2 * support_radius:
            raise ValueError(f"period {p_eff:.6g} must exceed 2(L+L0) + 2*support = "
                             f"{2 * growth.outer_edge + 2 * support_radius:.6g}")
        xi = -0.5 * p_eff + h * np.arange(n)
        return cls(p_eff, h, np.asarray(growth_linearized(growth, xi), dtype=float) * np.ones(n))

    @classmethod
    def constant(cls, a0: float, p: float, h: float) -> "PeriodicCoefficient":
        n = 2 * max(2, int(round(p / (2 * h))))
        return cls(n * h, h, np.full(n, float(a0)))


def closed_form_mean(growth: GrowthModel, p: float) -> float:
    """Period mean of the periodized ``f(., 0)`` (the blends integrate exactly)."""
    r, q, L, L0 = growth.r, growth.q, growth.L, growth.L0
    return (2 * L * r + L0 * (r - q) - q * (p - 2 * L - 2 * L0)) / p


def _need_positive_c(c):
    if not c > 0:
        raise ValueError("the resolvent machinery needs c > 0; use the operator method for c = 0")


def lambda_T(coef: PeriodicCoefficient, c: float) -> tuple[float, np.ndarray, float]:
    """``lambda_T = -1 + abar`` with eigenfunction ``exp((abar xi - int_0^xi a)/c)``.

    Returns ``(value, eigenfunction samples, residual)``; the residual of
    ``c phi' - phi + a phi - lambda_T phi`` (relative to ``max phi``) is
    evaluated with the exact derivative ``phi' = phi (abar - a) / c`` of the
    sampled formula.
    """
    _need_positive_c(c)
    a, h, n = coef.a, coef.h, coef.n
    abar = coef.abar
    # cumulative trapezoid from xi = -p/2, re-anchored at xi = 0 (node n/2)
    ext = np.append(a, a[0])
    cum = np.concatenate([[0.0], np.cumsum(0.5 * h * (ext[:-1] + ext[1:]))])
    cum = cum - cum[n // 2]
    xi = np.append(coef.xi, 0.5 * coef.p)
    phi_ext = np.exp((abar * xi - cum) / c)
    phi = phi_ext[:-1]
    lam = -1.0 + abar
    dphi = phi * (abar - a) / c
    residual = float(np.max(np.abs(c * dphi - phi + a * phi - lam * phi)) / np.max(phi))
    periodicity = abs(phi_ext[-1] - phi_ext[0]) / max(1.0, abs(phi_ext[0]))
    if periodicity > 1e-10:
        raise NumericalError("lambda_T eigenfunction is not periodic", {"mismatch": periodicity})
    return lam, phi, residual


def _phi1(z):
    """``int_0^1 exp(-z t) dt`` without cancellation."""
    z = np.asarray(z, dtype=float)
    small = np.abs(z) < 0.5
    zs = np.where(small, 1.0, z)
    out = np.where(small, 0.0, -np.expm1(-zs) / zs)
    term = np.ones_like(z)
    acc = np.zeros_like(z)
    for k in range(22):
        acc = acc + term / (k + 1)
        term = term * (-z) / (k + 1)
    return np.where(small, acc, out)


def _phi2(z):
    """``int_0^1 t exp(-z t) dt`` without cancellation."""
    z = np.asarray(z, dtype=float)
    small = np.abs(z) < 0.5
    zs = np.where(small, 1.0, z)
    out = (1.0 - np.exp(-zs) * (1.0 + zs)) / (zs * zs)
    term = np.ones_like(z)
    acc = np.zeros_like(z)
    for k in range(22):
        acc = acc + term / (k + 2)
        term = term * (-z) / (k + 1)
    return np.where(small, acc, out)


def _backward_scan(B, S):
    """Solve ``phi_i = exp(-B_i) phi_{i+1} + S_i`` (indices mod n) stably."""
    n = S.size
    P = np.concatenate([[0.0], np.cumsum(B)])
    if not P[-1] > 0:
        raise ValueError("alpha must exceed lambda_T (no contraction over a period)")
    step = max(1, int(300.0 / max(float(np.max(np.abs(B))), 1e-300)))
    out = np.empty(n)
    carry = 0.0
    end = n
    while end > 0:
        start = max(0, end - step)
        Q = P[start:end + 1] - P[start]
        terms = np.exp(-Q[:-1]) * S[start:end]
        suffix = np.cumsum(terms[::-1])[::-1]
        out[start:end] = np.exp(Q[:-1]) * suffix + np.exp(-(P[end] - P[start:end])) * carry
        carry = out[start]
        end = start
    # periodic closure: phi_0 = out_0 + exp(-P_n) phi_0
    phi0 = out[0] / -math.expm1(-P[-1])
    return out + np.exp(-(P[-1] - P[:-1])) * phi0


def _upwind_resolvent(coef, c, alpha):
    n = coef.n
    A = sparse.diags(alpha + 1.0 - coef.a) - c * upwind_matrix(n, coef.h, periodic=True)
    return splu(A.tocsc())


def resolvent_apply(coef: PeriodicCoefficient, c: float, alpha: float, w,
                    scheme: str = "integral") -> np.ndarray:
    """``(alpha - T)^{-1} w`` for periodic ``w``.

    ``scheme="integral"`` evaluates the explicit formula
    ``phi(xi) = (1/c) int_xi^inf exp(-(1/c) int_xi^zeta (alpha + 1 - a)) w(zeta) dzeta``
    cell by cell (trapezoid exponent, linear ``w``), summing the periodic
    tail as a geometric series.  ``scheme="upwind"`` inverts the periodic
    upwind discretization of ``alpha - T`` exactly.
    """
    _need_positive_c(c)
    lam_t = -1.0 + coef.abar
    if not alpha > lam_t:
        raise ValueError(f"alpha={alpha} must exceed lambda_T={lam_t}")
    w = np.asarray(w, dtype=float)
    if w.shape[-1] != coef.n:
        raise ValueError("w must have one sample per node")
    if scheme == "upwind":
        return _upwind_resolvent(coef, c, alpha).solve(w)
    if scheme != "integral":
        raise ValueError(f"unknown scheme {scheme!r}")
    h = coef.h
    b = (alpha + 1.0 - coef.a) / c
    beta = 0.5 * (b + np.roll(b, -1))
    z = beta * h
    w_next = np.roll(w, -1)
    S = (h / c) * (w * _phi1(z) + (w_next - w) * _phi2(z))
    return _backward_scan(z, S)


class _RadiusMap:
    """rho(alpha) with warm starts between evaluations."""

    def __init__(self, coef, c, kernel_op, scheme, tol, max_iter):
        self.coef, self.c, self.scheme = coef, c, scheme
        # the eigenvector spans many decades over a long period; a sparse
        # positive matvec keeps relative accuracy where an FFT would not
        self.K = operator_for(kernel_op, coef.h, coef.n).sparse_matrix(periodic=True)
        self.tol, self.max_iter = tol, max_iter
        self.v = np.ones(coef.n)
        self.samples = []

    def __call__(self, alpha):
        if self.scheme == "upwind":
            lu = _upwind_resolvent(self.coef, self.c, alpha)
            R = lu.solve
        else:
            R = lambda w: resolvent_apply(self.coef, self.c, alpha, w)
        v = self.v / np.max(self.v)
        prev = math.nan
        for it in range(1, self.max_iter + 1):
            new = self.K @ R(v)
            # components below 1e-10 of the peak carry solver round-off
            keep = v > 1e-10
            ratio = new[keep] / v[keep]
            lo, hi = float(ratio.min()), float(ratio.max())
            if not lo > 0:
                raise NumericalError("resolvent image is not positive", {"alpha": alpha})
            peak = float(np.max(new))
            v = new / peak
            if hi - lo <= self.tol * hi:
                break
            if abs(peak - prev) <= self.tol * peak and hi - lo <= 1e-6 * hi:
                break
            prev = peak
        else:
            raise NumericalError("spectral radius iteration did not converge",
                                 {"alpha": alpha, "bounds": (lo, hi)})
        self.v = v
        rho = 0.5 * (lo + hi)
        self.samples.append((float(alpha), rho))
        return rho


def spectral_radius_map(coef: PeriodicCoefficient, c: float, alpha: float, kernel_op,
                        scheme: str = "integral", tol: float = 1e-12, max_iter: int = 100000) -> float:
    """Spectral radius of ``K (alpha - T)^{-1}`` by power iteration.

    Iteration stops when the Collatz-Wielandt bounds (min and max of the
    componentwise ratio over components above ``1e-10`` of the peak) agree
    to ``tol``, or once the peak ratio is stationary to ``tol`` with the
    bounds within ``1e-6`` (round-off in the sparse solve can keep the
    bounds from closing further).
    """
    _need_positive_c(c)
    return _RadiusMap(coef, c, kernel_op, scheme, tol, max_iter)(alpha)


@dataclass
class PeriodicEigen:
    lambda_p: float
    eigenfunction: np.ndarray = field(repr=False)
    lambda_T: float = math.nan
    rho_samples: list = field(default_factory=list)
    method: str = "resolvent"


def periodic_operator_eigen(coef: PeriodicCoefficient, c: float, kernel_op,
                            tol: float = 1e-13) -> PeriodicEigen:
    """Rightmost eigenvalue of the periodic upwind discretization of ``K + T``."""
    op = operator_for(kernel_op, coef.h, coef.n)
    A = linear_operator(c, coef.a, coef.h, op, periodic=True)
    lam, w, _ = _inverse_iteration(A, float(coef.a.max()) + 1.0, tol, 100000)
    return PeriodicEigen(lam, w, method="operator")


def periodic_principal_eigenvalue(coef: PeriodicCoefficient, c: float, kernel_op,
                                  scheme: str = "integral", tol: float = 1e-12,
                                  inner_tol: float = 1e-13) -> PeriodicEigen:
    """Principal eigenvalue ``lambda_p`` and its positive periodic eigenfunction.

    For ``c > 0`` the root of ``rho(alpha) = 1`` is bracketed between
    ``lambda_T + eps`` and ``lambda_T + expand`` (doubling ``expand``) and
    located with a bracketing solver; the eigenfunction is then
    ``(alpha - T)^{-1} psi`` for the fixed point ``psi`` of ``K (alpha - T)^{-1}``.
    ``c = 0`` uses the operator method directly.
    """
    if c < 0:
        raise ValueError("c must be nonnegative")
    if c == 0:
        return periodic_operator_eigen(coef, 0.0, kernel_op)
    lam_t = -1.0 + coef.abar
    rho = _RadiusMap(coef, c, kernel_op, scheme, inner_tol, 100000)
    eps = 1e-6 * (1 + abs(lam_t))
    # the discrete upwind T has its own lambda_T a little above the exact
    # one; step away from it until rho is a genuine (positive) radius
    for _ in range(6):
        lo = lam_t + eps
        try:
            ok = rho(lo) > 1
        except NumericalError:
            ok = False
        if ok:
            break
        eps *= 10
    else:
        raise NumericalError("rho(lambda_T + eps) <= 1: no crossing above lambda_T",
                             {"samples": rho.samples})
    expand = 1.0
    while rho(lam_t + expand) >= 1:
        expand *= 2
        if expand > 1e6:
            raise NumericalError("could not bracket rho = 1", {"samples": rho.samples})
    hi = lam_t + expand
    lam = optimize.brentq(lambda al: rho(al) - 1.0, lo, hi, xtol=tol, rtol=4 * np.finfo(float).eps)
    rho(lam)
    if scheme == "upwind":
        phi = _upwind_resolvent(coef, c, lam).solve(rho.v)
    else:
        phi = resolvent_apply(coef, c, lam, rho.v)
    return PeriodicEigen(float(lam), phi / np.max(phi), lam_t, rho.samples)


@dataclass
class Periodization:
    periods: list
    values: list
    limit: float
    max_increase: float
    bounded_below: bool

    @property
    def monotone(self) -> bool:
        return self.max_increase <= 1e-8


def periodization_limit(c: float, growth: GrowthModel, base_p: float, doublings: int,
                        kernel_op, h: float | None = None, scheme: str = "integral") -> Periodization:
    """``lambda_p`` for ``p, 2p, ..., 2^doublings p``; the last value estimates
    the whole-line eigenvalue.  The sequence should not increase."""
    if not base_p > 2 * growth.outer_edge:
        raise ValueError("base period must exceed 2(L + L0)")
    if doublings < 0:
        raise ValueError("doublings must be nonnegative")
    if h is None:
        if not isinstance(kernel_op, ConvolutionOperator):
            raise ValueError("pass h or a ConvolutionOperator")
        h = kernel_op.dx
    kernel = kernel_op.kernel if isinstance(kernel_op, ConvolutionOperator) else kernel_op
    coef = PeriodicCoefficient.from_growth(growth, base_p, h, kernel.support_radius)
    periods, values = [], []
    for k in range(doublings + 1):
        if k:
            coef = PeriodicCoefficient.from_growth(growth, 2 * coef.p, h, kernel.support_radius)
        values.append(periodic_principal_eigenvalue(coef, c, kernel, scheme=scheme).lambda_p)
        periods.append(coef.p)
    diffs = np.diff(values)
    max_inc = float(max(0.0, diffs.max())) if diffs.size else 0.0
    return Periodization(periods, values, values[-1], max_inc, bool(min(values) >= -growth.q))
