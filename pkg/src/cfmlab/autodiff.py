"""Tape-based reverse-mode differentiation over float64 NumPy arrays.

The primitive set is deliberately small: add/sub/mul (same-shape
elementwise), matmul (2-D), bias_add (the only broadcast: a row-vector
bias over a matrix), one smooth elementwise nonlinearity, full
reduce_sum, and scalar scale.  Ops are recorded eagerly in topological
order, so replaying the tape reproduces the forward values exactly and
a single reverse sweep yields gradients for every parameter leaf.

Everything is float64; any op producing NaN/Inf raises NonFiniteError
instead of propagating silently.
"""
from __future__ import annotations

from typing import Sequence

import numpy as np

from . import backend

LEAF_KINDS = ("input", "param", "const")

ACT_KINDS = {
    "silu": backend.ACT_SILU,
    "tanh": backend.ACT_TANH,
    "softplus": backend.ACT_SOFTPLUS,
}


class NonFiniteError(FloatingPointError):
    """An operation produced NaN or Inf."""


def _as_f64(value) -> np.ndarray:
    return np.asarray(value, dtype=np.float64)


class Tape:
    """Recorded computation graph with values, usable for replay + backward."""

    def __init__(self):
        self.kinds: list[str] = []
        self.parents: list[tuple[int, ...]] = []
        self.aux: list = []
        self.values: list[np.ndarray] = []
        self.input_ids: list[int] = []
        self.param_ids: list[int] = []
        self.cache: dict = {}  # scratch for callers (e.g. param-leaf reuse)
        self._grads: list[np.ndarray | None] | None = None

    def __len__(self) -> int:
        return len(self.kinds)

    def value(self, nid: int) -> np.ndarray:
        return self.values[nid]

    def _check_finite(self, arr: np.ndarray, kind: str) -> None:
        if not np.all(np.isfinite(arr)):
            raise NonFiniteError(f"non-finite value produced by '{kind}'")

    def _push(self, kind: str, parents: tuple[int, ...], value: np.ndarray, aux=None) -> int:
        self._check_finite(value, kind)
        self.kinds.append(kind)
        self.parents.append(parents)
        self.aux.append(aux)
        self.values.append(value)
        self._grads = None
        return len(self.kinds) - 1

    # ---- leaves ----

    def input(self, value) -> int:
        nid = self._push("input", (), _as_f64(value))
        self.input_ids.append(nid)
        return nid

    def param(self, value) -> int:
        nid = self._push("param", (), _as_f64(value))
        self.param_ids.append(nid)
        return nid

    def const(self, value) -> int:
        return self._push("const", (), _as_f64(value))

    # ---- primitives (eager: compute now, record for replay/backward) ----

    def _same_shape(self, a: int, b: int, op: str) -> None:
        if self.values[a].shape != self.values[b].shape:
            raise ValueError(
                f"{op}: shape mismatch {self.values[a].shape} vs {self.values[b].shape}"
            )

    def add(self, a: int, b: int) -> int:
        self._same_shape(a, b, "add")
        return self._push("add", (a, b), self.values[a] + self.values[b])

    def sub(self, a: int, b: int) -> int:
        self._same_shape(a, b, "sub")
        return self._push("sub", (a, b), self.values[a] - self.values[b])

    def mul(self, a: int, b: int) -> int:
        self._same_shape(a, b, "mul")
        return self._push("mul", (a, b), self.values[a] * self.values[b])

    def matmul(self, a: int, b: int) -> int:
        va, vb = self.values[a], self.values[b]
        if va.ndim != 2 or vb.ndim != 2 or va.shape[1] != vb.shape[0]:
            raise ValueError(f"matmul: incompatible shapes {va.shape} @ {vb.shape}")
        return self._push("matmul", (a, b), va @ vb)

    def bias_add(self, a: int, b: int) -> int:
        va, vb = self.values[a], self.values[b]
        if va.ndim != 2 or vb.shape != (va.shape[1],):
            raise ValueError(f"bias_add: incompatible shapes {va.shape} + {vb.shape}")
        return self._push("bias_add", (a, b), va + vb)

    def nonlin(self, a: int, kind: str = "silu") -> int:
        code = ACT_KINDS[kind]
        return self._push("nonlin", (a,), backend.act_forward(self.values[a], code), aux=code)

    def reduce_sum(self, a: int) -> int:
        return self._push("reduce_sum", (a,), np.asarray(self.values[a].sum()))

    def scale(self, a: int, c: float) -> int:
        return self._push("scale", (a,), self.values[a] * float(c), aux=float(c))

    # ---- replay ----

    def forward(self, inputs: Sequence[np.ndarray] | None = None) -> np.ndarray:
        """Re-executes the recorded ops, optionally rebinding input leaves."""
        if not self.kinds:
            raise RuntimeError("forward on empty tape")
        if inputs is not None:
            if len(inputs) != len(self.input_ids):
                raise ValueError(
                    f"expected {len(self.input_ids)} inputs, got {len(inputs)}"
                )
            for nid, val in zip(self.input_ids, inputs):
                val = _as_f64(val)
                if val.shape != self.values[nid].shape:
                    raise ValueError(
                        f"input shape {val.shape} does not match recorded "
                        f"{self.values[nid].shape}"
                    )
                self.values[nid] = val
        vals = self.values
        for nid, kind in enumerate(self.kinds):
            if kind in LEAF_KINDS:
                continue
            ps = self.parents[nid]
            if kind == "add" or kind == "bias_add":
                out = vals[ps[0]] + vals[ps[1]]
            elif kind == "sub":
                out = vals[ps[0]] - vals[ps[1]]
            elif kind == "mul":
                out = vals[ps[0]] * vals[ps[1]]
            elif kind == "matmul":
                out = vals[ps[0]] @ vals[ps[1]]
            elif kind == "nonlin":
                out = backend.act_forward(vals[ps[0]], self.aux[nid])
            elif kind == "reduce_sum":
                out = np.asarray(vals[ps[0]].sum())
            elif kind == "scale":
                out = vals[ps[0]] * self.aux[nid]
            else:  # pragma: no cover - op table is closed
                raise RuntimeError(f"unknown op '{kind}'")
            self._check_finite(out, kind)
            vals[nid] = out
        self._grads = None
        return vals[-1]

    # ---- reverse sweep ----

    def backward(self, seed=1.0) -> list[np.ndarray]:
        """Accumulates gradients of the last node; returns param-leaf grads."""
        if not self.kinds:
            raise RuntimeError("backward on empty tape")
        out = self.values[-1]
        seed = _as_f64(seed)
        if seed.shape != out.shape:
            raise ValueError(f"seed shape {seed.shape} != output shape {out.shape}")

        n = len(self.kinds)
        grads: list[np.ndarray | None] = [None] * n
        grads[n - 1] = seed

        def acc(nid: int, g: np.ndarray) -> None:
            grads[nid] = g if grads[nid] is None else grads[nid] + g

        vals = self.values
        for nid in range(n - 1, -1, -1):
            g = grads[nid]
            if g is None:
                continue
            kind = self.kinds[nid]
            if kind in LEAF_KINDS:
                continue
            ps = self.parents[nid]
            if kind == "add":
                acc(ps[0], g)
                acc(ps[1], g)
            elif kind == "sub":
                acc(ps[0], g)
                acc(ps[1], -g)
            elif kind == "mul":
                acc(ps[0], g * vals[ps[1]])
                acc(ps[1], g * vals[ps[0]])
            elif kind == "matmul":
                acc(ps[0], g @ vals[ps[1]].T)
                acc(ps[1], vals[ps[0]].T @ g)
            elif kind == "bias_add":
                acc(ps[0], g)
                acc(ps[1], g.sum(axis=0))
            elif kind == "nonlin":
                acc(ps[0], backend.act_backward(vals[ps[0]], g, self.aux[nid]))
            elif kind == "reduce_sum":
                acc(ps[0], np.full(vals[ps[0]].shape, float(g)))
            elif kind == "scale":
                acc(ps[0], g * self.aux[nid])
            else:  # pragma: no cover
                raise RuntimeError(f"unknown op '{kind}'")

        self._grads = grads
        return [
            grads[p] if grads[p] is not None else np.zeros_like(self.values[p])
            for p in self.param_ids
        ]

    def grad_of(self, nid: int) -> np.ndarray:
        """Gradient of any node from the last backward (zeros if unreached)."""
        if self._grads is None:
            raise RuntimeError("grad_of before backward")
        g = self._grads[nid]
        return g if g is not None else np.zeros_like(self.values[nid])


def check_gradient_fd(tape: Tape, inputs: Sequence[np.ndarray] | None = None,
                      h: float = 1e-5) -> float:
    """Max relative error between backward grads and central differences.

    The check runs on sum(output) so non-scalar tapes are supported; the
    finite-difference side perturbs each parameter element in turn and
    replays the tape.
    """
    if h <= 0:
        raise ValueError("h must be positive")
    out = tape.forward(inputs)
    seed = np.ones_like(out)
    analytic = tape.backward(seed)
    worst = 0.0
    for pid, an in zip(tape.param_ids, analytic):
        base = tape.values[pid]
        flat = base.ravel()
        an_flat = an.ravel()
        for k in range(flat.size):
            orig = flat[k]
            flat[k] = orig + h
            fp = float(tape.forward().sum())
            flat[k] = orig - h
            fm = float(tape.forward().sum())
            flat[k] = orig
            fd = (fp - fm) / (2.0 * h)
            rel = abs(an_flat[k] - fd) / (abs(an_flat[k]) + abs(fd) + 1e-12)
            worst = max(worst, rel)
    tape.forward()  # restore recorded values
    return worst
