"""Training objectives.

Four losses share one structure: an online branch recorded on a tape
(gradients w.r.t. θ only) against a detached target branch evaluated
with the EMA parameters (or a frozen teacher).  The target branch is
plain NumPy and never touches the tape, so the stop-gradient contract
holds by construction.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .autodiff import Tape
from .field import VelocityField
from .paths import PathSpec, sample_pair, sample_train_tuple


@dataclass
class SegmentSchedule:
    """K equal segments of [0,1] with per-segment weights, time gap, alpha."""

    k: int
    lam: np.ndarray
    dt: float = 0.01
    alpha: float = 1.0

    def __post_init__(self):
        self.lam = np.asarray(self.lam, dtype=np.float64)
        if self.k < 1:
            raise ValueError(f"segment count must be >= 1, got {self.k}")
        if self.lam.shape != (self.k,):
            raise ValueError(f"need {self.k} weights, got shape {self.lam.shape}")
        if np.any(self.lam <= 0):
            raise ValueError("all segment weights must be positive")
        if self.alpha <= 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        if not 0.0 < self.dt < 1.0 / self.k:
            raise ValueError(
                f"dt={self.dt} degenerate for segment width {1.0 / self.k}"
            )

    @classmethod
    def uniform(cls, k: int, dt: float = 0.01, alpha: float = 1.0) -> "SegmentSchedule":
        return cls(k=k, lam=np.ones(k), dt=dt, alpha=alpha)

    @classmethod
    def middle_weighted(cls, k: int, dt: float = 0.01, alpha: float = 1.0) -> "SegmentSchedule":
        """Upweights interior segments: lam_i = 1 + sin(pi (i+1/2)/k)."""
        i = np.arange(k)
        return cls(k=k, lam=1.0 + np.sin(math.pi * (i + 0.5) / k), dt=dt, alpha=alpha)


def segment_of(t: float, k: int) -> tuple[int, float, float]:
    """(index, start, end) of the segment containing t; t=1 clamps to the last."""
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"t outside [0,1]: {t}")
    if k < 1:
        raise ValueError(f"segment count must be >= 1, got {k}")
    i = min(int(math.floor(t * k)), k - 1)
    return i, i / k, (i + 1) / k


@dataclass
class LossReport:
    """total = f_term + alpha * v_term for consistency losses; CFM stores its
    mean squared error in both total and f_term.  segment is -1 for batches
    mixing segments (or where the notion does not apply)."""

    total: float
    f_term: float
    v_term: float
    segment: int
    batch: int


def _tile(col: np.ndarray, d: int) -> np.ndarray:
    return np.repeat(col[:, None], d, axis=1)


def _finite(x: float, what: str) -> float:
    if not math.isfinite(x):
        raise FloatingPointError(f"non-finite {what}")
    return x


def _consistency_core(field: VelocityField, t: np.ndarray, T_arr: np.ndarray,
                      x_t: np.ndarray, x_tp: np.ndarray, dt: float, alpha: float,
                      lam: np.ndarray | None):
    """Shared online-vs-detached-target loss.

    f-branch: online θ at (t, x_t) jumped to the per-sample segment end T;
    target branch: EMA θ⁻ at (t+dt, x_tp) jumped to the same T.
    """
    n, d = x_t.shape
    t2 = t + dt
    v_tgt = field.velocity(t2, x_tp, params="ema")
    f_tgt = x_tp + _tile(T_arr - t2, d) * v_tgt

    tape = Tape()
    v = field.velocity_on_tape(tape, t, x_t)
    f = tape.add(tape.const(x_t), tape.mul(v, tape.const(_tile(T_arr - t, d))))

    df = tape.sub(f, tape.const(f_tgt))
    sq_f = tape.mul(df, df)
    dv = tape.sub(v, tape.const(v_tgt))
    sq_v = tape.mul(dv, dv)
    if lam is not None:
        lam_tile = tape.const(_tile(lam, d))
        sq_f = tape.mul(sq_f, lam_tile)
        sq_v = tape.mul(sq_v, lam_tile)
    f_term = tape.scale(tape.reduce_sum(sq_f), 1.0 / n)
    v_term = tape.scale(tape.reduce_sum(sq_v), 1.0 / n)
    total = tape.add(f_term, tape.scale(v_term, alpha))

    grads = tape.backward()
    report = LossReport(
        total=_finite(float(tape.value(total)), "loss"),
        f_term=float(tape.value(f_term)),
        v_term=float(tape.value(v_term)),
        segment=-1,
        batch=n,
    )
    return report, grads


def cfm_loss(field: VelocityField, path: PathSpec, n: int,
             rng: np.random.Generator):
    """Conditional flow-matching regression onto the path's velocity."""
    if n < 1:
        raise ValueError(f"batch must be >= 1, got {n}")
    x0, x1 = sample_pair(path.coupling, n, rng)
    t = rng.uniform(0.0, 1.0, size=n)
    x_t = path.point(x0, x1, t)
    u = path.velocity(x0, x1, t)

    tape = Tape()
    v = field.velocity_on_tape(tape, t, x_t)
    dv = tape.sub(v, tape.const(u))
    sq = tape.mul(dv, dv)
    total = tape.scale(tape.reduce_sum(sq), 1.0 / n)
    grads = tape.backward()
    value = _finite(float(tape.value(total)), "loss")
    return LossReport(total=value, f_term=value, v_term=0.0, segment=-1, batch=n), grads


def velocity_consistency_loss(field: VelocityField, path: PathSpec, n: int,
                              dt: float = 0.01, alpha: float = 1.0,
                              rng: np.random.Generator | None = None):
    """Single-segment consistency loss: endpoint and velocity agreement
    between (t, x_t) online and (t+dt, x_{t+dt}) under the EMA shadow."""
    if not 0.0 < dt < 1.0:
        raise ValueError(f"dt must be in (0,1), got {dt}")
    if alpha <= 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    tup = sample_train_tuple(path, (0.0, 1.0), dt, n, rng)
    T_arr = np.ones_like(tup.t)
    report, grads = _consistency_core(field, tup.t, T_arr, tup.x_t, tup.x_tp,
                                      dt, alpha, lam=None)
    report.segment = 0
    return report, grads


def multisegment_loss(field: VelocityField, path: PathSpec,
                      schedule: SegmentSchedule, n: int,
                      rng: np.random.Generator):
    """Per-sample segment draw, then the consistency loss within that
    segment with endpoint T=(i+1)/K, weighted by lam_i."""
    if n < 1:
        raise ValueError(f"batch must be >= 1, got {n}")
    k = schedule.k
    x0, x1 = sample_pair(path.coupling, n, rng)
    if k > 1:
        seg = rng.integers(0, k, size=n)
    else:
        seg = np.zeros(n, dtype=np.int64)
    S = seg / k
    T_arr = (seg + 1) / k
    t = S + rng.uniform(0.0, 1.0, size=n) * (T_arr - S - schedule.dt)
    x_t = path.point(x0, x1, t)
    x_tp = path.point(x0, x1, t + schedule.dt)
    report, grads = _consistency_core(field, t, T_arr, x_t, x_tp,
                                      schedule.dt, schedule.alpha,
                                      lam=schedule.lam[seg])
    report.segment = -1 if k > 1 else 0
    return report, grads


def distill_loss(student: VelocityField, teacher, path: PathSpec, n: int,
                 dt: float = 0.01, alpha: float = 1.0,
                 rng: np.random.Generator | None = None):
    """Consistency distillation: x_{t+dt} is replaced by the frozen
    teacher's one-step Euler prediction x_t + dt * u(t, x_t).  Single
    segment (K=1) by contract."""
    if not 0.0 < dt < 1.0:
        raise ValueError(f"dt must be in (0,1), got {dt}")
    if alpha <= 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    if n < 1:
        raise ValueError(f"batch must be >= 1, got {n}")
    x0, x1 = sample_pair(path.coupling, n, rng)
    t = rng.uniform(0.0, 1.0, size=n) * (1.0 - dt)
    x_t = path.point(x0, x1, t)
    u_teacher = np.asarray(teacher(t, x_t), dtype=np.float64)
    if u_teacher.shape != x_t.shape:
        raise ValueError(
            f"teacher returned shape {u_teacher.shape}, expected {x_t.shape}"
        )
    x_hat = x_t + dt * u_teacher
    T_arr = np.ones_like(t)
    report, grads = _consistency_core(student, t, T_arr, x_t, x_hat,
                                      dt, alpha, lam=None)
    report.segment = 0
    return report, grads
