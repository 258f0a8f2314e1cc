"""Adam optimizer over lists of parameter arrays."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import backend


@dataclass
class AdamState:
    """First/second moments matching the parameter layout, plus hyperparams."""

    m: list[np.ndarray]
    v: list[np.ndarray]
    step: int = 0
    lr: float = 2e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_params(cls, params: list[np.ndarray], lr: float = 2e-4,
                   beta1: float = 0.9, beta2: float = 0.999,
                   eps: float = 1e-8) -> "AdamState":
        return cls(
            m=[np.zeros_like(p) for p in params],
            v=[np.zeros_like(p) for p in params],
            step=0, lr=lr, beta1=beta1, beta2=beta2, eps=eps,
        )


def adam_step(params: list[np.ndarray], grads: list[np.ndarray],
              state: AdamState) -> list[np.ndarray]:
    """Standard bias-corrected Adam update, in place on params and moments."""
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ValueError("parameter/gradient/state layouts disagree")
    for p, g, m in zip(params, grads, state.m):
        if p.shape != g.shape or p.shape != m.shape:
            raise ValueError(f"layout mismatch: {p.shape} vs {g.shape}")
    state.step += 1
    for p, g, m, v in zip(params, grads, state.m, state.v):
        backend.adam_update(p, np.ascontiguousarray(g), m, v, state.step,
                            state.lr, state.beta1, state.beta2, state.eps)
    return params
