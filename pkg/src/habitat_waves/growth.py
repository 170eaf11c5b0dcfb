"""Patch growth rate f(x, u) for a habitat of half-width L."""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np


@dataclass(frozen=True)
class GrowthModel:
    """Growth ``r(1-u)`` on ``|x| <= L``, mortality ``-q`` beyond ``L + L0``.

    The two transition bands of width ``L0`` blend the patch and the
    hostile region with a cosine (right) and sine (left) profile.  With
    ``transition="homogeneous"`` the patch covers the whole line.
    """

    r: float = 1.0
    q: float = 1.0
    L: float = 5.0
    L0: float = 1.0
    transition: str = "cosine"

    def __post_init__(self):
        for name in ("r", "q", "L0"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not self.L >= 0:
            raise ValueError("L must be nonnegative")
        if self.transition not in ("cosine", "homogeneous"):
            raise ValueError(f"unknown transition {self.transition!r}")

    @property
    def outer_edge(self) -> float:
        return self.L + self.L0

    def with_L(self, L: float) -> "GrowthModel":
        return replace(self, L=float(L))

    def __call__(self, x, u):
        return growth_eval(self, x, u)

    def blend(self, x):
        """Weight in [0, 1] with f(x,u) = -q + (r(1-u) + q) * blend(x)."""
        x = np.asarray(x, dtype=float)
        if self.transition == "homogeneous":
            return np.ones_like(x)
        L, L0 = self.L, self.L0
        w = np.zeros_like(x)
        w = np.where(np.abs(x) <= L, 1.0, w)
        right = (x > L) & (x < L + L0)
        w = np.where(right, 0.5 * (1 + np.cos(np.pi * (x - L) / L0)), w)
        left = (x < -L) & (x > -L - L0)
        w = np.where(left, 0.5 * (1 + np.sin(np.pi * (2 * x + 2 * L + L0) / (2 * L0))), w)
        return w

    def to_config(self) -> dict:
        out = {"r": self.r, "q": self.q, "L": self.L, "L0": self.L0}
        if self.transition != "cosine":
            out["transition"] = self.transition
        return out


def growth_eval(model: GrowthModel, x, u):
    """f(x, u); scalars in give a float back."""
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    if model.transition == "homogeneous":
        out = model.r * (1 - u) + 0 * x
    else:
        w = model.blend(x)
        inside = model.r * (1 - u)
        out = np.where(w == 1.0, inside, -model.q + (inside + model.q) * w)
        out = np.where(w == 0.0, -model.q + 0 * u, out)
    return out if np.ndim(out) else float(out)


def growth_linearized(model: GrowthModel, x):
    """f(x, 0), the coefficient of the linearization at v = 0."""
    return growth_eval(model, x, 0.0)


def crowding(model: GrowthModel, x):
    """b(x) >= 0 with f(x, u) = f(x, 0) - b(x) u."""
    return model.r * model.blend(x)


def from_config(block: dict) -> GrowthModel:
    return GrowthModel(
        r=float(block.get("r", 1.0)),
        q=float(block.get("q", 1.0)),
        L=float(block.get("L", 5.0)),
        L0=float(block.get("L0", 1.0)),
        transition=block.get("transition", "cosine"),
    )
