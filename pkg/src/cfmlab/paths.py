"""Couplings of (p0, p1) and conditional interpolation paths.

Training tuples pair x_t and x_{t+dt} computed from the SAME (x0, x1)
draw, the discrete analogue of x_{t+dt} being a deterministic function
of (t, x_t) along a conditional trajectory.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

HALF_PI = math.pi / 2.0


@dataclass
class Coupling:
    """independent: draw (x0, x1) independently; affine: x1 = A x0 + b."""

    kind: str  # "independent" | "affine"
    p0: object  # sampler with .sample(n, rng) -> (n, d) and .dim
    p1: Optional[object] = None
    A: Optional[np.ndarray] = None
    b: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.kind == "independent":
            if self.p1 is None:
                raise ValueError("independent coupling needs a target sampler")
        elif self.kind == "affine":
            d = self.p0.dim
            self.A = np.asarray(self.A, dtype=np.float64)
            self.b = np.asarray(self.b, dtype=np.float64)
            if self.A.shape != (d, d) or self.b.shape != (d,):
                raise ValueError(
                    f"affine coupling dims {self.A.shape}/{self.b.shape} "
                    f"do not match source dim {d}"
                )
        else:
            raise ValueError(f"unknown coupling kind '{self.kind}'")

    @property
    def dim(self) -> int:
        return self.p0.dim


def sample_pair(coupling: Coupling, n: int, rng: np.random.Generator):
    """n coupled pairs (x0, x1); deterministic given the rng state."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    x0 = coupling.p0.sample(n, rng)
    if coupling.kind == "independent":
        x1 = coupling.p1.sample(n, rng)
    else:
        x1 = x0 @ coupling.A.T + coupling.b
    return x0, x1


@dataclass
class PathSpec:
    """Conditional interpolation rule between coupled endpoints.

    linear: x_t = (1-t) x0 + t x1
    trig:   x_t = cos(pi t/2) x0 + sin(pi t/2) x1
    """

    kind: str  # "linear" | "trig"
    coupling: Coupling

    def __post_init__(self):
        if self.kind not in ("linear", "trig"):
            raise ValueError(f"unknown path kind '{self.kind}'")

    def point(self, x0: np.ndarray, x1: np.ndarray, t) -> np.ndarray:
        return path_point(self, x0, x1, t)

    def velocity(self, x0: np.ndarray, x1: np.ndarray, t) -> np.ndarray:
        return conditional_velocity(self, x0, x1, t)


def _check_t(t) -> np.ndarray:
    t = np.asarray(t, dtype=np.float64)
    if np.any(t < 0.0) or np.any(t > 1.0):
        raise ValueError(f"path time outside [0,1]: {t}")
    return t


def _col(t: np.ndarray, x: np.ndarray) -> np.ndarray:
    return t[:, None] if (x.ndim == 2 and t.ndim == 1) else t


def path_point(path: PathSpec, x0: np.ndarray, x1: np.ndarray, t) -> np.ndarray:
    t = _check_t(t)
    tc = _col(t, np.asarray(x0))
    if path.kind == "linear":
        return (1.0 - tc) * x0 + tc * x1
    return np.cos(HALF_PI * tc) * x0 + np.sin(HALF_PI * tc) * x1


def conditional_velocity(path: PathSpec, x0: np.ndarray, x1: np.ndarray, t) -> np.ndarray:
    """Time derivative of path_point at t, on the same (x0, x1) pair."""
    t = _check_t(t)
    tc = _col(t, np.asarray(x0))
    if path.kind == "linear":
        return np.broadcast_to(np.asarray(x1) - np.asarray(x0), np.asarray(x0).shape).copy()
    return HALF_PI * (-np.sin(HALF_PI * tc) * x0 + np.cos(HALF_PI * tc) * x1)


@dataclass
class TrainTuple:
    """Batch of (t, x_t, x_{t+dt}) with conditional velocities and endpoints."""

    t: np.ndarray      # (n,)
    x_t: np.ndarray    # (n, d)
    x_tp: np.ndarray   # (n, d) at time t + dt
    u_cond: np.ndarray  # conditional velocity at (t, x_t)
    x0: np.ndarray
    x1: np.ndarray


def sample_train_tuple(path: PathSpec, bounds: tuple[float, float], dt: float,
                       n: int, rng: np.random.Generator) -> TrainTuple:
    """t ~ Uniform[S, T-dt]; x_t and x_{t+dt} from the same pair."""
    S, T = bounds
    if not (T - S > dt > 0.0):
        raise ValueError(f"degenerate segment [{S},{T}] for dt={dt}")
    x0, x1 = sample_pair(path.coupling, n, rng)
    t = S + rng.uniform(0.0, 1.0, size=n) * (T - S - dt)
    return TrainTuple(
        t=t,
        x_t=path.point(x0, x1, t),
        x_tp=path.point(x0, x1, t + dt),
        u_cond=path.velocity(x0, x1, t),
        x0=x0,
        x1=x1,
    )
