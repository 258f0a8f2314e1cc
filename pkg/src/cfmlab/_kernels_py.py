"""Pure-NumPy implementations of the hot kernels.

Fallback used when the compiled extension is unavailable (or when
``CFM_LAB_PUREPY`` is set).  Must stay semantically identical to
``_kernels.pyx``; parity is enforced by tests/test_kernels.py.
"""
from __future__ import annotations

import numpy as np

ACT_SILU = 0
ACT_TANH = 1
ACT_SOFTPLUS = 2


def act_forward(x: np.ndarray, kind: int) -> np.ndarray:
    if kind == ACT_SILU:
        return x / (1.0 + np.exp(-x))
    if kind == ACT_TANH:
        return np.tanh(x)
    if kind == ACT_SOFTPLUS:
        # log(1 + e^x) computed stably for large |x|
        return np.maximum(x, 0.0) + np.log1p(np.exp(-np.abs(x)))
    raise ValueError(f"unknown activation kind {kind}")


def act_backward(x: np.ndarray, grad: np.ndarray, kind: int) -> np.ndarray:
    if kind == ACT_SILU:
        s = 1.0 / (1.0 + np.exp(-x))
        return grad * (s * (1.0 + x * (1.0 - s)))
    if kind == ACT_TANH:
        t = np.tanh(x)
        return grad * (1.0 - t * t)
    if kind == ACT_SOFTPLUS:
        return grad / (1.0 + np.exp(-x))
    raise ValueError(f"unknown activation kind {kind}")


def adam_update(
    p: np.ndarray,
    g: np.ndarray,
    m: np.ndarray,
    v: np.ndarray,
    step: int,
    lr: float,
    beta1: float,
    beta2: float,
    eps: float,
) -> None:
    """Fused in-place Adam update with bias correction (step counts from 1)."""
    m *= beta1
    m += (1.0 - beta1) * g
    v *= beta2
    v += (1.0 - beta2) * (g * g)
    c1 = 1.0 - beta1**step
    c2 = 1.0 - beta2**step
    p -= (lr / c1) * m / (np.sqrt(v / c2) + eps)


def solve_assignment(cost: np.ndarray) -> tuple[np.ndarray, float]:
    """Exact square linear assignment via shortest augmenting paths.

    Jonker-Volgenant style O(n^3) with dual potentials; the Dijkstra inner
    loop is vectorized over columns.  Returns (col_for_row, total_cost).
    """
    cost = np.ascontiguousarray(cost, dtype=np.float64)
    n, m = cost.shape
    if n != m:
        raise ValueError(f"cost matrix must be square, got {cost.shape}")
    if not np.all(np.isfinite(cost)):
        raise ValueError("cost matrix contains non-finite entries")

    u = np.zeros(n + 1)
    v = np.zeros(n + 1)
    # p[j]: row matched to column j; column n is the virtual start column
    p = np.full(n + 1, -1, dtype=np.int64)
    way = np.zeros(n + 1, dtype=np.int64)
    cols = np.arange(n)

    for i in range(n):
        p[n] = i
        j0 = n
        minv = np.full(n + 1, np.inf)
        used = np.zeros(n + 1, dtype=bool)
        while True:
            used[j0] = True
            i0 = p[j0]
            free = ~used[:n]
            idx = cols[free]
            cur = cost[i0, idx] - u[i0] - v[idx]
            better = cur < minv[idx]
            upd = idx[better]
            minv[upd] = cur[better]
            way[upd] = j0
            j1 = idx[np.argmin(minv[idx])]
            delta = minv[j1]
            used_cols = np.flatnonzero(used)
            u[p[used_cols]] += delta
            v[used_cols] -= delta
            minv[~used] -= delta
            j0 = j1
            if p[j0] < 0:
                break
        while j0 != n:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1

    col_for_row = np.empty(n, dtype=np.int64)
    col_for_row[p[:n]] = cols
    total = float(cost[cols, col_for_row].sum())
    return col_for_row, total
