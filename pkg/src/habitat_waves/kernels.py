"""Dispersal kernels and the discrete convolution operator.

Two symmetric families are provided: a Gaussian density and a compactly
supported C^1 bump proportional to ``cos^2(pi z / 2R)``.  Each kernel
carries an exponential tail certificate ``(tail_mu, tail_M)`` such that
``k(z) < exp(-tail_mu |z|)`` and ``|k'(z)| < exp(-tail_mu |z|)`` for
``|z| > tail_M``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
import math

import numpy as np
from scipy import integrate, optimize
from scipy.fft import irfft, next_fast_len, rfft

# kernel values below this are treated as zero
TRUNCATION = 1e-16
MU_MAX = 50.0


@dataclass(frozen=True)
class Kernel:
    """A symmetric dispersal kernel.

    ``family`` is ``"gaussian"`` (``scale`` = standard deviation) or
    ``"bump"`` (``scale`` = support radius).
    """

    family: str
    scale: float
    tail_mu: float
    tail_M: float
    support_radius: float

    def __post_init__(self):
        if self.family not in ("gaussian", "bump"):
            raise ValueError(f"unknown kernel family {self.family!r}")
        if not self.scale > 0:
            raise ValueError("kernel scale must be positive")

    @property
    def sigma(self) -> float:
        return self.scale

    @property
    def radius(self) -> float:
        return self.scale

    def __call__(self, z):
        return kernel_eval(self, z)

    def derivative(self, z):
        z = np.asarray(z, dtype=float)
        if self.family == "gaussian":
            out = -z / self.scale**2 * _gaussian_density(z, self.scale)
            return np.where(np.abs(z) > self.support_radius, 0.0, out)
        R = self.scale
        out = -np.pi / (2 * R * R) * np.sin(np.pi * z / R)
        return np.where(np.abs(z) >= R, 0.0, out)

    def to_config(self) -> dict:
        if self.family == "gaussian":
            return {"type": "gaussian", "sigma": self.scale}
        return {"type": "bump", "radius": self.scale}


def _gaussian_density(z, sigma):
    return np.exp(-0.5 * (z / sigma) ** 2) / (sigma * math.sqrt(2 * math.pi))


def _tail_certificate(logk, logdk, mu, z_hi):
    """Largest z where log k(z) + mu z or log|k'(z)| + mu z reaches zero."""
    M = 0.0
    for fn in (logk, logdk):
        g = lambda z, fn=fn: fn(z) + mu * z
        zs = np.linspace(1e-9, z_hi, 4001)
        vals = np.array([g(z) for z in zs])
        above = np.nonzero(vals >= 0)[0]
        if above.size == 0:
            continue
        i = above[-1]
        if i + 1 < zs.size:
            M = max(M, optimize.brentq(g, zs[i], zs[i + 1], xtol=1e-14))
        else:
            M = max(M, z_hi)
    return M


def gaussian(sigma: float = 1.0) -> Kernel:
    """Gaussian kernel with tail certificate mu = 1/(2 sigma)."""
    sigma = float(sigma)
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    support = sigma * math.sqrt(2.0 * math.log(1.0 / (TRUNCATION * sigma * math.sqrt(2 * math.pi))))
    mu = 1.0 / (2.0 * sigma)
    norm = math.log(sigma * math.sqrt(2 * math.pi))
    logk = lambda z: -0.5 * (z / sigma) ** 2 - norm
    logdk = lambda z: math.log(z / sigma**2) - 0.5 * (z / sigma) ** 2 - norm
    M = _tail_certificate(logk, logdk, mu, support + 10 * sigma)
    # certificate radius must be positive; a tiny floor keeps the tail bound meaningful
    M = max(M, 1e-3 * sigma)
    return Kernel("gaussian", sigma, mu, M, support)


def bump(radius: float = 1.0) -> Kernel:
    """Normalized ``cos^2(pi z / 2R) / R`` on ``[-R, R]``."""
    R = float(radius)
    if not R > 0:
        raise ValueError("radius must be positive")
    # identically zero beyond R, so any mu works with M = R
    return Kernel("bump", R, 1.0 / R, R, R)


def from_config(block: dict) -> Kernel:
    kind = block.get("type", "gaussian")
    if kind == "gaussian":
        return gaussian(block.get("sigma", 1.0))
    if kind == "bump":
        return bump(block.get("radius", 1.0))
    raise ValueError(f"unknown kernel type {kind!r}")


def kernel_eval(kernel: Kernel, z):
    """Evaluate k(z); exactly zero beyond the support radius."""
    z = np.asarray(z, dtype=float)
    if kernel.family == "gaussian":
        out = _gaussian_density(z, kernel.scale)
        out = np.where(np.abs(z) > kernel.support_radius, 0.0, out)
    else:
        R = kernel.scale
        out = np.where(np.abs(z) >= R, 0.0, np.cos(np.pi * z / (2 * R)) ** 2 / R)
    return out if out.ndim else float(out)


def moment_generating(kernel: Kernel, mu: float, mu_max: float = MU_MAX) -> float:
    """Return the two-sided moment generating function ``int e^{mu z} k(z) dz``.

    The kernel is even, so the sign of ``mu`` does not matter.
    """
    mu = float(mu)
    if abs(mu) > mu_max:
        raise ValueError(f"|mu| = {abs(mu)} exceeds mu_max = {mu_max}")
    if kernel.family == "gaussian":
        expo = 0.5 * (mu * kernel.scale) ** 2
        if expo > 700:
            raise OverflowError("moment generating function overflows")
        return math.exp(expo)
    R = kernel.scale
    if mu * R > 700:
        raise OverflowError("moment generating function overflows")
    val, _ = integrate.quad(
        lambda z: math.exp(mu * z) * math.cos(math.pi * z / (2 * R)) ** 2 / R,
        -R, R, epsabs=0.0, epsrel=1e-12, limit=200,
    )
    return val


def moment_generating_derivative(kernel: Kernel, mu: float) -> float:
    """d/dmu of the moment generating function."""
    mu = float(mu)
    if kernel.family == "gaussian":
        return mu * kernel.scale**2 * moment_generating(kernel, mu)
    R = kernel.scale
    val, _ = integrate.quad(
        lambda z: z * math.exp(mu * z) * math.cos(math.pi * z / (2 * R)) ** 2 / R,
        -R, R, epsabs=0.0, epsrel=1e-12, limit=200,
    )
    return val


@dataclass(frozen=True)
class ConvolutionOperator:
    """Discrete version of ``u -> int k(y - x) u(y) dy`` on a uniform grid.

    ``weights[j]`` approximates the kernel mass attached to offset
    ``j - half_width`` cells.  Fields are extended by zero outside the grid.
    """

    kernel: Kernel
    dx: float
    n_points: int
    weights: np.ndarray = field(repr=False)

    @property
    def half_width(self) -> int:
        return (self.weights.size - 1) // 2

    @classmethod
    def build(cls, kernel: Kernel, dx: float, n_points: int) -> "ConvolutionOperator":
        if not dx > 0:
            raise ValueError("dx must be positive")
        m = int(math.floor(kernel.support_radius / dx + 1e-12))
        z = np.arange(-m, m + 1) * dx
        w = np.asarray(kernel_eval(kernel, z), dtype=float) * dx
        # the truncated kernel is ~0 at both ends, so the trapezoid rule
        # reduces to this sum; rescale so constants are reproduced exactly
        w = w / w.sum()
        w = 0.5 * (w + w[::-1])
        w.setflags(write=False)
        return cls(kernel, float(dx), int(n_points), w)

    @cached_property
    def _spectrum(self):
        m = self.half_width
        size = next_fast_len(self.n_points + 2 * m, real=True)
        return size, rfft(self.weights, size)

    def row_sums(self) -> np.ndarray:
        return self.apply(np.ones(self.n_points))

    def apply(self, values: np.ndarray, method: str = "fft") -> np.ndarray:
        """Convolve along the last axis (batched input allowed)."""
        values = np.asarray(values, dtype=float)
        n = values.shape[-1]
        if n != self.n_points:
            raise ValueError(f"field length {n} != operator size {self.n_points}")
        m = self.half_width
        if method == "dense":
            flat = values.reshape(-1, n)
            out = np.empty_like(flat)
            for i, row in enumerate(flat):
                out[i] = np.convolve(row, self.weights, mode="full")[m:m + n]
            return out.reshape(values.shape)
        if method != "fft":
            raise ValueError(f"unknown convolution method {method!r}")
        size, spec = self._spectrum
        full = irfft(rfft(values, size, axis=-1) * spec, size, axis=-1)
        return full[..., m:m + n]

    @cached_property
    def _periodic_spectrum(self):
        n, m = self.n_points, self.half_width
        wrapped = np.zeros(n)
        np.add.at(wrapped, np.arange(-m, m + 1) % n, self.weights)
        return np.conj(rfft(wrapped))

    def apply_periodic(self, values: np.ndarray) -> np.ndarray:
        """Circular convolution over one period of ``n_points`` samples."""
        values = np.asarray(values, dtype=float)
        n = values.shape[-1]
        if n != self.n_points:
            raise ValueError(f"field length {n} != operator size {self.n_points}")
        if n <= 2 * self.half_width:
            raise ValueError("period must exceed twice the kernel support")
        return irfft(rfft(values, axis=-1) * self._periodic_spectrum, n, axis=-1)

    def dense_matrix(self) -> np.ndarray:
        n, m = self.n_points, self.half_width
        A = np.zeros((n, n))
        for j, w in enumerate(self.weights):
            off = j - m
            idx = np.arange(max(0, -off), min(n, n - off))
            A[idx, idx + off] = w
        return A

    def sparse_matrix(self, periodic: bool = False):
        from scipy import sparse

        n, m = self.n_points, self.half_width
        if periodic:
            rows, cols, vals = [], [], []
            base = np.arange(n)
            for j, w in enumerate(self.weights):
                rows.append(base)
                cols.append((base + j - m) % n)
                vals.append(np.full(n, w))
            return sparse.csr_matrix(
                (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)
            )
        diags = [np.full(n - abs(j - m), w) for j, w in enumerate(self.weights)]
        return sparse.diags(diags, [j - m for j in range(self.weights.size)], shape=(n, n), format="csr")


def convolve(op: ConvolutionOperator, field, method: str = "fft"):
    """Convolve a Field (or raw array) with the kernel, zero-extended."""
    values = getattr(field, "values", field)
    out = op.apply(values, method=method)
    if hasattr(field, "with_values"):
        return field.with_values(out)
    return out
