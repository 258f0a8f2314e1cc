"""Sample-quality and flow-geometry metrics.

wasserstein2_exact solves the assignment problem exactly (O(n^3)
shortest augmenting paths via the kernel backend), so it is a
deterministic metric suitable for acceptance thresholds; energy
distance is the cheap large-n alternative.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from . import backend
from .sampler import Trajectory

W2_MAX_N = 1024


@dataclass
class MetricReport:
    name: str
    value: float
    n: int
    details: np.ndarray | None = None

    def __post_init__(self):
        if not math.isfinite(self.value):
            raise FloatingPointError(f"non-finite metric '{self.name}'")


def wasserstein2_exact(a: np.ndarray, b: np.ndarray) -> float:
    """Exact 2-Wasserstein between equal-size point sets.

    sqrt of the minimum over perfect matchings of the mean squared
    pairwise distance.
    """
    a = np.atleast_2d(np.asarray(a, dtype=np.float64))
    b = np.atleast_2d(np.asarray(b, dtype=np.float64))
    if a.shape != b.shape:
        raise ValueError(f"point sets must match in shape: {a.shape} vs {b.shape}")
    n = a.shape[0]
    if n > W2_MAX_N:
        raise ValueError(f"n={n} exceeds the exact-assignment cap {W2_MAX_N}")
    cost = cdist(a, b, metric="sqeuclidean")
    _, total = backend.solve_assignment(cost)
    return math.sqrt(total / n)


def energy_distance(a: np.ndarray, b: np.ndarray, unbiased: bool = True) -> float:
    """2 E|a-b| - E|a-a'| - E|b-b'| with pairwise estimators.

    unbiased=True uses i != j within-set averages (U-statistic);
    unbiased=False uses all pairs (V-statistic, exactly 0 for equal
    multisets).
    """
    a = np.atleast_2d(np.asarray(a, dtype=np.float64))
    b = np.atleast_2d(np.asarray(b, dtype=np.float64))
    if a.size == 0 or b.size == 0:
        raise ValueError("point sets must be non-empty")

    def within(x: np.ndarray) -> float:
        n = x.shape[0]
        d = cdist(x, x)
        if unbiased:
            if n < 2:
                return 0.0
            return float(d.sum() / (n * (n - 1)))
        return float(d.mean())

    cross = float(cdist(a, b).mean())
    return 2.0 * cross - within(a) - within(b)


def straightness_per_sample(traj: Trajectory) -> np.ndarray:
    """Normalized mean squared chord deviation, one value per trajectory.

    At each interior grid time the state is compared with the point the
    endpoint chord reaches at the same time fraction; the mean of the
    squared deviations is divided by the squared chord length.
    """
    times, states = traj.times, traj.states
    if len(times) < 3:
        raise ValueError("straightness needs at least 3 grid points")
    start, end = states[0], states[-1]
    chord_sq = ((end - start) ** 2).sum(axis=1)
    frac = (times - times[0]) / (times[-1] - times[0])
    chord_pts = start[None] + frac[:, None, None] * (end - start)[None]
    dev_sq = ((states - chord_pts) ** 2).sum(axis=2)[1:-1].mean(axis=0)
    out = np.zeros(traj.n)
    moving = chord_sq > 0
    out[moving] = dev_sq[moving] / chord_sq[moving]
    if np.any(~moving & (dev_sq > 0)):
        raise ValueError("zero-length chord with non-coincident states")
    return out


def straightness(traj: Trajectory) -> float:
    """Mean straightness over the trajectory batch (0 iff exactly straight)."""
    return float(straightness_per_sample(traj).mean())


def consistency_residual(vf, ts: np.ndarray, xs: np.ndarray, h: float = 1e-4) -> float:
    """Finite-difference estimate of mean |d_t v + v . grad_x v|^2.

    Follows the field's own flow direction: compares v(t+h, x + h v(t,x))
    against v(t, x), squared and divided by h^2, averaged over probes.
    """
    if h <= 0:
        raise ValueError(f"h must be positive, got {h}")
    ts = np.asarray(ts, dtype=np.float64)
    xs = np.atleast_2d(np.asarray(xs, dtype=np.float64))
    if np.any(ts + h > 1.0) or np.any(ts < 0.0):
        raise ValueError("probe times must satisfy 0 <= t and t + h <= 1")
    v0 = np.asarray(vf(ts, xs), dtype=np.float64)
    v1 = np.asarray(vf(ts + h, xs + h * v0), dtype=np.float64)
    return float((((v1 - v0) / h) ** 2).sum(axis=1).mean())
