"""Run configuration: JSON blocks for kernel, growth, grid, time stepping and
spectral options, validated in one pass."""
from __future__ import annotations

from dataclasses import dataclass, field
import hashlib
import json
import math
from pathlib import Path

from . import growth as growth_mod
from . import kernels
from .errors import ConfigError
from .grid import DEFAULT_N, DEFAULT_X_MAX, Grid
from .kernels import ConvolutionOperator
from .stepping import EvolveSettings, cfl_bound

DEFAULTS = {
    "kernel": {"type": "gaussian", "sigma": 1.0},
    "growth": {"r": 1.0, "q": 1.0, "L": 5.0, "L0": 1.0},
    "c": 0.0,
    "grid": {"x_max": DEFAULT_X_MAX, "n": DEFAULT_N},
    "time": {"dt": None, "t_max": 200.0, "steady_tol": 1e-10, "flush_below": 1e-15},
    "spectral": {"band": 1e-4, "method": "inverse", "cross_check": True, "cross_t_max": 400.0},
    "sweep": {"c": [], "L": []},
    "seed": 0,
    "output_dir": "out",
}

NEGATIVE_C = ("c must be >= 0; a habitat moving left is the mirror image of one moving right "
              "(replace c by -c and x by -x), so reflect the inputs explicitly")


def _merge(base: dict, override: dict) -> dict:
    out = json.loads(json.dumps(base))
    for key, val in override.items():
        # a kernel block describes one family, so it replaces the default
        if isinstance(val, dict) and isinstance(out.get(key), dict) and key != "kernel":
            out[key].update(val)
        else:
            out[key] = val
    return out


def _positive(problems, name, value, allow_zero=False):
    try:
        v = float(value)
    except (TypeError, ValueError):
        problems.append(f"{name} must be a number (got {value!r})")
        return None
    if not math.isfinite(v) or (v < 0 if allow_zero else v <= 0):
        problems.append(f"{name} must be {'nonnegative' if allow_zero else 'positive'} (got {value!r})")
        return None
    return v


@dataclass
class RunConfig:
    kernel: kernels.Kernel
    growth: growth_mod.GrowthModel
    c: float = 0.0
    x_max: float = DEFAULT_X_MAX
    n: int = DEFAULT_N
    dt: float | None = None
    t_max: float = 200.0
    steady_tol: float = 1e-10
    flush_below: float = 1e-15
    band: float = 1e-4
    method: str = "inverse"
    cross_check: bool = True
    cross_t_max: float = 400.0
    sweep_c: list = field(default_factory=list)
    sweep_L: list = field(default_factory=list)
    seed: int = 0
    output_dir: str = "out"
    raw: dict = field(default_factory=dict, repr=False)

    @classmethod
    def from_dict(cls, data: dict | None = None) -> "RunConfig":
        """Build and validate; every problem found is reported together."""
        data = data or {}
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        unknown = sorted(set(data) - set(DEFAULTS))
        problems = [f"unknown config key {k!r}" for k in unknown]
        merged = _merge(DEFAULTS, {k: v for k, v in data.items() if k in DEFAULTS})

        kernel = None
        try:
            kernel = kernels.from_config(merged["kernel"])
        except (ValueError, TypeError) as exc:
            problems.append(f"kernel: {exc}")

        g = merged["growth"]
        for name in ("r", "q", "L0"):
            _positive(problems, f"growth.{name}", g.get(name))
        _positive(problems, "growth.L", g.get("L"), allow_zero=True)
        growth = None
        try:
            growth = growth_mod.from_config(g)
        except (ValueError, TypeError) as exc:
            if not problems:
                problems.append(f"growth: {exc}")

        c = merged["c"]
        try:
            c = float(c)
            if c < 0:
                problems.append(NEGATIVE_C)
        except (TypeError, ValueError):
            problems.append(f"c must be a number (got {c!r})")

        gb = merged["grid"]
        x_max = _positive(problems, "grid.x_max", gb.get("x_max"))
        n = gb.get("n")
        if not isinstance(n, int) or isinstance(n, bool) or n < 3:
            problems.append(f"grid.n must be an integer >= 3 (got {n!r})")
            n = None
        if kernel is not None and x_max and n:
            dx = 2 * x_max / (n - 1)
            if dx > kernel.support_radius / 8:
                problems.append(f"grid spacing {dx:.4g} exceeds support_radius/8 = {kernel.support_radius / 8:.4g}")

        tb = merged["time"]
        dt = tb.get("dt")
        if dt is not None:
            dt = _positive(problems, "time.dt", dt)
            if dt and growth is not None and x_max and n and isinstance(c, float) and c >= 0:
                bound = cfl_bound(c, 2 * x_max / (n - 1), growth)
                if dt > bound:
                    problems.append(f"time.dt={dt} exceeds the CFL bound {bound:.6g}")
        t_max = _positive(problems, "time.t_max", tb.get("t_max"))
        steady_tol = _positive(problems, "time.steady_tol", tb.get("steady_tol"))
        flush_below = _positive(problems, "time.flush_below", tb.get("flush_below"), allow_zero=True)

        sb = merged["spectral"]
        band = _positive(problems, "spectral.band", sb.get("band"), allow_zero=True)
        method = sb.get("method")
        if method not in ("inverse", "power", "dense"):
            problems.append(f"spectral.method must be inverse, power or dense (got {method!r})")
        cross_t_max = _positive(problems, "spectral.cross_t_max", sb.get("cross_t_max"))

        sw = merged["sweep"]
        for key in ("c", "L"):
            vals = sw.get(key, [])
            if not isinstance(vals, list) or not all(isinstance(v, (int, float)) for v in vals):
                problems.append(f"sweep.{key} must be a list of numbers")
            elif key == "c" and any(v < 0 for v in vals):
                problems.append(NEGATIVE_C)
            elif key == "L" and any(v < 0 for v in vals):
                problems.append("sweep.L values must be nonnegative")

        seed = merged["seed"]
        if not isinstance(seed, int) or isinstance(seed, bool):
            problems.append(f"seed must be an integer (got {seed!r})")

        if problems:
            raise ConfigError(problems)
        return cls(kernel, growth, c, x_max, n, dt, t_max, steady_tol, flush_below, band, method,
                   bool(sb.get("cross_check", True)), cross_t_max,
                   [float(v) for v in sw.get("c", [])], [float(v) for v in sw.get("L", [])],
                   seed, str(merged["output_dir"]), merged)

    @classmethod
    def load(cls, path) -> "RunConfig":
        path = Path(path)
        try:
            data = json.loads(path.read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        return json.loads(json.dumps(self.raw))

    def content_hash(self) -> str:
        blob = json.dumps(self.raw, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    def with_growth(self, **changes) -> "RunConfig":
        data = self.to_dict()
        data["growth"].update(changes)
        return RunConfig.from_dict(data)

    def with_c(self, c: float) -> "RunConfig":
        data = self.to_dict()
        data["c"] = float(c)
        return RunConfig.from_dict(data)

    @property
    def settings(self) -> EvolveSettings:
        return EvolveSettings(self.dt, self.t_max, self.steady_tol, flush_below=self.flush_below)

    def grid_for(self, growth: growth_mod.GrowthModel | None = None) -> Grid:
        """Base grid, widened at fixed spacing when the patch needs more room."""
        return Grid.for_instance(growth or self.growth, self.kernel, self.x_max, self.n)

    def operator(self, grid: Grid) -> ConvolutionOperator:
        return _operator_cache(self.kernel, grid.dx, grid.n)


_OPS: dict = {}


def _operator_cache(kernel, dx, n):
    key = (kernel, round(dx, 15), n)
    op = _OPS.get(key)
    if op is None:
        if len(_OPS) > 32:
            _OPS.clear()
        op = _OPS[key] = ConvolutionOperator.build(kernel, dx, n)
    return op
