"""Uniform grids, sampled profiles and the shared spatial discretization."""
from __future__ import annotations

from dataclasses import dataclass, field, replace
import math

import numpy as np
from scipy import sparse

from .kernels import ConvolutionOperator, Kernel

DEFAULT_X_MAX = 60.0
DEFAULT_N = 2048


@dataclass(frozen=True)
class Grid:
    """``n`` equispaced points on ``[-x_max, x_max]``."""

    x_max: float = DEFAULT_X_MAX
    n: int = DEFAULT_N

    def __post_init__(self):
        if not self.x_max > 0:
            raise ValueError("x_max must be positive")
        if self.n < 3:
            raise ValueError("grid needs at least 3 points")

    @property
    def dx(self) -> float:
        return 2.0 * self.x_max / (self.n - 1)

    @property
    def x(self) -> np.ndarray:
        return np.linspace(-self.x_max, self.x_max, self.n)

    def refined(self, factor: int = 2) -> "Grid":
        return Grid(self.x_max, (self.n - 1) * factor + 1)

    def problems(self, growth=None, kernel: Kernel | None = None) -> list[str]:
        """Violated grid invariants for a given instance (empty if fine)."""
        out = []
        if kernel is not None:
            if self.dx > kernel.support_radius / 8:
                out.append(f"dx={self.dx:.4g} exceeds support_radius/8={kernel.support_radius / 8:.4g}")
            if growth is not None and growth.transition != "homogeneous":
                need = growth.outer_edge + 10.0 / kernel.tail_mu
                if self.x_max < need:
                    out.append(f"x_max={self.x_max:.4g} below L+L0+10/tail_mu={need:.4g}")
        return out

    @classmethod
    def for_instance(cls, growth, kernel: Kernel, x_max: float = DEFAULT_X_MAX,
                     n: int = DEFAULT_N) -> "Grid":
        """Default grid, widened (at fixed spacing) when the patch needs room."""
        base = cls(x_max, n)
        need = x_max
        if growth.transition != "homogeneous":
            need = max(x_max, growth.outer_edge + 10.0 / kernel.tail_mu)
        if need <= x_max:
            return base
        dx = base.dx
        cells = int(math.ceil(2 * need / dx))
        return cls(cells * dx / 2.0, cells + 1)


@dataclass(frozen=True)
class Field:
    """Samples of a profile on a grid, in the moving or fixed frame."""

    grid: Grid
    values: np.ndarray = field(repr=False)
    frame: str = "moving"
    time: float = 0.0

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != (self.grid.n,):
            raise ValueError(f"expected {self.grid.n} values, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("field values must be finite")
        if self.frame not in ("moving", "fixed"):
            raise ValueError(f"unknown frame {self.frame!r}")
        object.__setattr__(self, "values", values)

    @property
    def x(self) -> np.ndarray:
        return self.grid.x

    def with_values(self, values, time: float | None = None) -> "Field":
        return replace(self, values=np.asarray(values, dtype=float),
                       time=self.time if time is None else float(time))

    def sup(self) -> float:
        return float(np.max(np.abs(self.values)))

    @classmethod
    def constant(cls, grid: Grid, value: float, frame: str = "moving") -> "Field":
        return cls(grid, np.full(grid.n, float(value)), frame)

    @classmethod
    def from_function(cls, grid: Grid, fn, frame: str = "moving") -> "Field":
        return cls(grid, np.asarray(fn(grid.x), dtype=float), frame)


def upwind_derivative(v: np.ndarray, dx: float) -> np.ndarray:
    """Forward-biased derivative along the last axis, zero beyond the right end.

    Three-point second-order stencil where it fits on the grid; the last two
    cells use the two-point stencil with a zero ghost value.
    """
    d = np.empty_like(v)
    d[..., :-2] = (-3.0 * v[..., :-2] + 4.0 * v[..., 1:-1] - v[..., 2:]) / (2.0 * dx)
    d[..., -2] = (v[..., -1] - v[..., -2]) / dx
    d[..., -1] = -v[..., -1] / dx
    return d


def upwind_derivative_periodic(v: np.ndarray, dx: float) -> np.ndarray:
    return (-3.0 * v + 4.0 * np.roll(v, -1, axis=-1) - np.roll(v, -2, axis=-1)) / (2.0 * dx)


def upwind_matrix(n: int, dx: float, periodic: bool = False) -> sparse.csr_matrix:
    """Sparse matrix of :func:`upwind_derivative` (or its periodic twin)."""
    if periodic:
        i = np.arange(n)
        rows = np.concatenate([i, i, i])
        cols = np.concatenate([i, (i + 1) % n, (i + 2) % n])
        vals = np.concatenate([np.full(n, -3.0), np.full(n, 4.0), np.full(n, -1.0)]) / (2 * dx)
        return sparse.csr_matrix((vals, (rows, cols)), shape=(n, n))
    main = np.full(n, -3.0 / (2 * dx))
    up1 = np.full(n - 1, 4.0 / (2 * dx))
    up2 = np.full(n - 2, -1.0 / (2 * dx))
    main[-2:] = -1.0 / dx
    up1[-1] = 1.0 / dx
    return sparse.diags([main, up1, up2], [0, 1, 2], shape=(n, n), format="csr")


def operator_for(kernel_or_op, dx: float, n: int) -> ConvolutionOperator:
    """Reuse ``kernel_or_op`` if it already matches ``(dx, n)``, else rebuild."""
    if isinstance(kernel_or_op, ConvolutionOperator):
        if kernel_or_op.n_points == n and math.isclose(kernel_or_op.dx, dx, rel_tol=1e-12):
            return kernel_or_op
        kernel_or_op = kernel_or_op.kernel
    return ConvolutionOperator.build(kernel_or_op, dx, n)


def linear_operator(c: float, coefficient: np.ndarray, dx: float, kernel_op: ConvolutionOperator,
                    periodic: bool = False) -> sparse.csr_matrix:
    """Sparse ``c D + K - I + diag(a)`` for the linearization at zero."""
    n = coefficient.size
    A = kernel_op.sparse_matrix(periodic=periodic)
    A = A + sparse.diags(np.asarray(coefficient, dtype=float) - 1.0)
    if c != 0:
        A = A + c * upwind_matrix(n, dx, periodic=periodic)
    return A.tocsr()
