"""The learnable velocity field v(t, x) with online and EMA parameter sets.

One MLP conditioned on (sinusoidal time embedding, x) represents the
field on all of [0,1]; segment identity is implicit in t.  The EMA
shadow is a plain copy updated by convex combination and never appears
on any tape, so no gradient can reach it.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import backend
from .autodiff import Tape
from .rng import stream

_T_TOL = 1e-9


@dataclass(frozen=True)
class TimeEmbedding:
    """Smooth sinusoidal features of t: (sin, cos) pairs plus raw t."""

    n_freqs: int = 8
    base: float = math.pi / 2.0

    @property
    def dim(self) -> int:
        return 2 * self.n_freqs + 1

    def frequencies(self) -> np.ndarray:
        # geometric spacing: base * 2^k
        return self.base * (2.0 ** np.arange(self.n_freqs))

    def __call__(self, t: np.ndarray) -> np.ndarray:
        t = np.atleast_1d(np.asarray(t, dtype=np.float64))
        ang = t[:, None] * self.frequencies()[None, :]
        return np.concatenate([np.sin(ang), np.cos(ang), t[:, None]], axis=1)


def _check_t(t: np.ndarray) -> None:
    if np.any(t < -_T_TOL) or np.any(t > 1.0 + _T_TOL):
        raise ValueError(f"time outside [0,1]: {t}")


class VelocityField:
    """MLP (t, x) -> velocity with online params and an EMA shadow.

    Parameter layout is layer-major, weights-then-bias per layer, weights
    row-major with shape (fan_in, fan_out).
    """

    def __init__(self, dim: int, hidden: tuple[int, ...] = (128, 128, 128, 128),
                 act: str = "silu", embed: TimeEmbedding | None = None):
        if dim < 1:
            raise ValueError(f"data dimension must be >= 1, got {dim}")
        if any(h < 1 for h in hidden):
            raise ValueError(f"invalid hidden widths {hidden}")
        self.dim = dim
        self.hidden = tuple(int(h) for h in hidden)
        self.act = act
        self.act_code = {"silu": backend.ACT_SILU, "tanh": backend.ACT_TANH,
                         "softplus": backend.ACT_SOFTPLUS}[act]
        self.embed = embed if embed is not None else TimeEmbedding()
        self.sizes = [dim + self.embed.dim, *self.hidden, dim]
        self.params: list[np.ndarray] = []
        self.ema: list[np.ndarray] = []
        self.eval_count = 0

    # ---- construction ----

    @classmethod
    def init(cls, dim: int, seed: int, hidden: tuple[int, ...] = (128, 128, 128, 128),
             act: str = "silu", embed: TimeEmbedding | None = None) -> "VelocityField":
        """Fan-in-scaled uniform init; EMA starts as an exact copy."""
        f = cls(dim, hidden, act, embed)
        rng = stream(seed, 1)
        for fan_in, fan_out in zip(f.sizes[:-1], f.sizes[1:]):
            bound = 1.0 / math.sqrt(fan_in)
            f.params.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
            f.params.append(rng.uniform(-bound, bound, size=fan_out))
        f.ema = [p.copy() for p in f.params]
        return f

    @classmethod
    def from_params(cls, dim: int, hidden: tuple[int, ...], act: str,
                    embed: TimeEmbedding, params: list[np.ndarray],
                    ema: list[np.ndarray]) -> "VelocityField":
        f = cls(dim, hidden, act, embed)
        expect = f.layout()
        for arrs in (params, ema):
            got = [a.shape for a in arrs]
            if got != expect:
                raise ValueError(f"parameter layout {got} != expected {expect}")
        f.params = [np.asarray(p, dtype=np.float64) for p in params]
        f.ema = [np.asarray(p, dtype=np.float64) for p in ema]
        return f

    def layout(self) -> list[tuple[int, ...]]:
        shapes: list[tuple[int, ...]] = []
        for fan_in, fan_out in zip(self.sizes[:-1], self.sizes[1:]):
            shapes.append((fan_in, fan_out))
            shapes.append((fan_out,))
        return shapes

    # ---- evaluation ----

    def _features(self, t, x: np.ndarray) -> np.ndarray:
        t = np.asarray(t, dtype=np.float64)
        _check_t(t)
        if t.ndim == 0:
            t = np.full(x.shape[0], float(t))
        elif t.shape != (x.shape[0],):
            raise ValueError(f"t shape {t.shape} does not match batch {x.shape[0]}")
        return np.concatenate([x, self.embed(t)], axis=1)

    def _forward_np(self, params: list[np.ndarray], z: np.ndarray) -> np.ndarray:
        n_layers = len(self.sizes) - 1
        for i in range(n_layers):
            z = z @ params[2 * i] + params[2 * i + 1]
            if i < n_layers - 1:
                z = backend.act_forward(z, self.act_code)
        return z

    def velocity(self, t, x: np.ndarray, params: str = "online") -> np.ndarray:
        """v(t, x) under the chosen parameter set; one call = one NFE."""
        x = np.asarray(x, dtype=np.float64)
        single = x.ndim == 1
        xb = x[None, :] if single else x
        if xb.shape[1] != self.dim:
            raise ValueError(f"point dimension {xb.shape[1]} != field dim {self.dim}")
        pset = self.params if params == "online" else self.ema
        out = self._forward_np(pset, self._features(t, xb))
        self.eval_count += 1
        return out[0] if single else out

    def endpoint(self, t, x: np.ndarray, T: float = 1.0, params: str = "online") -> np.ndarray:
        """One-jump prediction x + (T - t) * v(t, x)."""
        t_arr = np.asarray(t, dtype=np.float64)
        if np.any(t_arr > T + _T_TOL):
            raise ValueError(f"t > segment end: t={t}, T={T}")
        if T > 1.0 + _T_TOL:
            raise ValueError(f"segment end beyond 1: {T}")
        v = self.velocity(t, x, params)
        gap = np.asarray(T - t_arr, dtype=np.float64)
        if v.ndim == 2 and gap.ndim == 1:
            gap = gap[:, None]
        return x + gap * v

    def as_fn(self, params: str = "online"):
        """Callable (t, x) -> v for metric and theorem probes."""
        return lambda t, x: self.velocity(t, x, params)

    # ---- training support ----

    def velocity_on_tape(self, tape: Tape, t, x: np.ndarray) -> int:
        """Records the online forward pass; returns the output node id.

        Only the online parameters become tape leaves (registered once per
        tape); t and x enter as constants, so gradients flow to θ alone.
        """
        key = ("field_params", id(self))
        if key not in tape.cache:
            tape.cache[key] = [tape.param(p) for p in self.params]
        pids = tape.cache[key]
        z = tape.input(self._features(t, np.asarray(x, dtype=np.float64)))
        n_layers = len(self.sizes) - 1
        for i in range(n_layers):
            z = tape.bias_add(tape.matmul(z, pids[2 * i]), pids[2 * i + 1])
            if i < n_layers - 1:
                z = tape.nonlin(z, self.act)
        return z

    def ema_update(self, decay: float) -> None:
        """θ⁻ ← decay·θ⁻ + (1-decay)·θ, elementwise; online params untouched."""
        if not 0.0 <= decay <= 1.0:
            raise ValueError(f"EMA decay must be in [0,1], got {decay}")
        for shadow, online in zip(self.ema, self.params):
            shadow *= decay
            shadow += (1.0 - decay) * online
