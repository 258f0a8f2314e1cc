"""Synthetic low-dimensional source/target distributions."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .paths import Coupling

KINDS = ("standard-gaussian", "gaussian", "eight-gaussians", "two-moons", "checkerboard")


@dataclass
class DistributionSpec:
    """Named sampleable distribution; everything but the gaussian family is 2-D."""

    kind: str
    dim: int = 2
    mu: np.ndarray | float = 0.0
    sigma: float = 1.0
    radius: float = 4.0
    noise: float = 0.05
    cells: int = 4
    extent: float = 4.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown distribution kind '{self.kind}'")
        if self.kind in ("eight-gaussians", "two-moons", "checkerboard") and self.dim != 2:
            raise ValueError(f"{self.kind} is 2-D only")
        if self.kind in ("gaussian", "eight-gaussians") and self.sigma <= 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        if self.kind == "checkerboard" and self.cells < 2:
            raise ValueError(f"checkerboard needs >= 2 cells, got {self.cells}")
        if self.kind == "two-moons" and self.noise < 0:
            raise ValueError(f"noise must be >= 0, got {self.noise}")

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return sample(self, n, rng)


def eight_centers(radius: float) -> np.ndarray:
    ang = np.arange(8) * (math.pi / 4.0)
    return radius * np.stack([np.cos(ang), np.sin(ang)], axis=1)


def sample(spec: DistributionSpec, n: int, rng: np.random.Generator) -> np.ndarray:
    """n i.i.d. draws from the named distribution, float64 (n, d)."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if spec.kind == "standard-gaussian":
        return rng.standard_normal((n, spec.dim))
    if spec.kind == "gaussian":
        return np.asarray(spec.mu, dtype=np.float64) + spec.sigma * rng.standard_normal(
            (n, spec.dim)
        )
    if spec.kind == "eight-gaussians":
        centers = eight_centers(spec.radius)
        which = rng.integers(0, 8, size=n)
        return centers[which] + spec.sigma * rng.standard_normal((n, 2))
    if spec.kind == "two-moons":
        # canonical half-circles: outer (cos a, sin a), inner (1-cos a, 0.5-sin a)
        ang = rng.uniform(0.0, math.pi, size=n)
        outer = rng.uniform(0.0, 1.0, size=n) < 0.5
        x = np.where(outer, np.cos(ang), 1.0 - np.cos(ang))
        y = np.where(outer, np.sin(ang), 0.5 - np.sin(ang))
        pts = np.stack([x, y], axis=1)
        if spec.noise > 0:
            pts += spec.noise * rng.standard_normal((n, 2))
        return pts
    # checkerboard: uniform over the active cells of a cells x cells grid
    k = spec.cells
    active = np.array([(i, j) for i in range(k) for j in range(k) if (i + j) % 2 == 0])
    pick = active[rng.integers(0, len(active), size=n)]
    side = 2.0 * spec.extent / k
    low = -spec.extent + pick * side
    return low + rng.uniform(0.0, 1.0, size=(n, 2)) * side


def make_affine_coupling(A: np.ndarray, b: np.ndarray,
                         source: DistributionSpec) -> Coupling:
    """Deterministic coupling emitting (x0, A x0 + b)."""
    A = np.asarray(A, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if A.shape != (source.dim, source.dim):
        raise ValueError(f"A shape {A.shape} does not match source dim {source.dim}")
    return Coupling(kind="affine", p0=source, A=A, b=b)


def points_to_csv(points: np.ndarray, path) -> None:
    """One row per point, comma-separated, x0..x{d-1} header."""
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2:
        raise ValueError(f"expected (n, d) points, got shape {points.shape}")
    header = ",".join(f"x{i}" for i in range(points.shape[1]))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(header + "\n")
        for row in points:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")
