"""Few-step transport from noise to data with a trained field.

Two modes: one jump per segment (evaluate at the segment's left
endpoint, step 1/K), or m Euler sub-steps inside each segment.  Both
are plain Euler; the jump sampler is the m=1 special case.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import NonFiniteError
from .field import VelocityField


@dataclass
class Trajectory:
    """States of a batch of flows on a shared time grid."""

    times: np.ndarray   # (m,), strictly increasing, 0 to 1
    states: np.ndarray  # (m, n, d)
    nfe: int            # field evaluations actually performed

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=np.float64)
        self.states = np.asarray(self.states, dtype=np.float64)
        if self.times.ndim != 1 or len(self.times) != self.states.shape[0]:
            raise ValueError("times and states lengths disagree")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("times must be strictly increasing")
        if self.times[0] != 0.0 or self.times[-1] != 1.0:
            raise ValueError("trajectory must span [0, 1]")

    @property
    def n(self) -> int:
        return self.states.shape[1]


def _check_state(x: np.ndarray) -> None:
    if not np.all(np.isfinite(x)):
        raise NonFiniteError("non-finite state during sampling")


def _velocity_fn(field, params: str):
    """Adapter: VelocityField or any callable (t, x) -> v, with an NFE counter."""
    count = [0]
    if isinstance(field, VelocityField) or hasattr(field, "velocity"):
        def fn(t, x):
            count[0] += 1
            return field.velocity(t, x, params)
    else:
        def fn(t, x):
            count[0] += 1
            return np.asarray(field(t, x), dtype=np.float64)
    return fn, count


def sample_euler(field, x0: np.ndarray, k: int, m: int = 1,
                 params: str = "ema", record: bool = False):
    """K segments x m Euler sub-steps (K*m evaluations, step 1/(K*m)).

    Returns the endpoint batch, or (endpoint, Trajectory) when record=True.
    """
    if k < 1 or m < 1:
        raise ValueError(f"need k >= 1 and m >= 1, got k={k}, m={m}")
    vf, count = _velocity_fn(field, params)
    x = np.array(x0, dtype=np.float64)
    _check_state(x)
    total = k * m
    h = 1.0 / total
    states = [x.copy()] if record else None
    for j in range(total):
        t = j * h
        x = x + h * vf(t, x)
        _check_state(x)
        if record:
            states.append(x.copy())
    if record:
        times = np.arange(total + 1) * h
        times[-1] = 1.0
        return x, Trajectory(times=times, states=np.stack(states), nfe=count[0])
    return x


def sample_segment_jumps(field, x0: np.ndarray, k: int,
                         params: str = "ema", record: bool = False):
    """One evaluation per segment at its left endpoint: the m=1 reduction."""
    return sample_euler(field, x0, k, 1, params, record)


def record_trajectory(field, x0: np.ndarray, grid: np.ndarray,
                      params: str = "ema") -> Trajectory:
    """States at every grid time via Euler between consecutive grid points."""
    grid = np.asarray(grid, dtype=np.float64)
    if grid.ndim != 1 or len(grid) < 2:
        raise ValueError("grid must hold at least two times")
    if np.any(np.diff(grid) <= 0) or grid[0] != 0.0 or grid[-1] != 1.0:
        raise ValueError("grid must increase strictly from 0 to 1")
    vf, count = _velocity_fn(field, params)
    x = np.array(x0, dtype=np.float64)
    _check_state(x)
    states = [x.copy()]
    for j in range(len(grid) - 1):
        x = x + (grid[j + 1] - grid[j]) * vf(grid[j], x)
        _check_state(x)
        states.append(x.copy())
    return Trajectory(times=grid, states=np.stack(states), nfe=count[0])
