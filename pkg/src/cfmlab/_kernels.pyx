# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled hot kernels: fused activations, Adam update, exact assignment.

API mirrors _kernels_py; parity is enforced by tests/test_kernels.py.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, fabs, log1p, sqrt, tanh

cnp.import_array()

ACT_SILU = 0
ACT_TANH = 1
ACT_SOFTPLUS = 2

DEF _SILU = 0
DEF _TANH = 1
DEF _SOFTPLUS = 2


def act_forward(x, int kind):
    cdef cnp.ndarray[cnp.float64_t, ndim=1] xf = np.ascontiguousarray(x, dtype=np.float64).ravel()
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty_like(xf)
    cdef Py_ssize_t i, n = xf.shape[0]
    cdef double xv, s
    if kind == _SILU:
        for i in range(n):
            xv = xf[i]
            out[i] = xv / (1.0 + exp(-xv))
    elif kind == _TANH:
        for i in range(n):
            out[i] = tanh(xf[i])
    elif kind == _SOFTPLUS:
        for i in range(n):
            xv = xf[i]
            s = xv if xv > 0.0 else 0.0
            out[i] = s + log1p(exp(-fabs(xv)))
    else:
        raise ValueError(f"unknown activation kind {kind}")
    return out.reshape(np.shape(x))


def act_backward(x, grad, int kind):
    cdef cnp.ndarray[cnp.float64_t, ndim=1] xf = np.ascontiguousarray(x, dtype=np.float64).ravel()
    cdef cnp.ndarray[cnp.float64_t, ndim=1] gf = np.ascontiguousarray(grad, dtype=np.float64).ravel()
    if xf.shape[0] != gf.shape[0]:
        raise ValueError("x and grad must have the same size")
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty_like(xf)
    cdef Py_ssize_t i, n = xf.shape[0]
    cdef double xv, s, t
    if kind == _SILU:
        for i in range(n):
            xv = xf[i]
            s = 1.0 / (1.0 + exp(-xv))
            out[i] = gf[i] * (s * (1.0 + xv * (1.0 - s)))
    elif kind == _TANH:
        for i in range(n):
            t = tanh(xf[i])
            out[i] = gf[i] * (1.0 - t * t)
    elif kind == _SOFTPLUS:
        for i in range(n):
            out[i] = gf[i] / (1.0 + exp(-xf[i]))
    else:
        raise ValueError(f"unknown activation kind {kind}")
    return out.reshape(np.shape(x))


def adam_update(p, g, m, v, int step, double lr, double beta1, double beta2, double eps):
    """Fused in-place Adam update with bias correction (step counts from 1)."""
    cdef double[::1] pf = p.reshape(-1)
    cdef double[::1] mf = m.reshape(-1)
    cdef double[::1] vf = v.reshape(-1)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] gf = np.ascontiguousarray(g, dtype=np.float64).ravel()
    cdef Py_ssize_t i, n = pf.shape[0]
    if gf.shape[0] != n or mf.shape[0] != n or vf.shape[0] != n:
        raise ValueError("parameter/gradient/moment sizes disagree")
    cdef double c1 = 1.0 - beta1**step
    cdef double c2 = 1.0 - beta2**step
    cdef double gv, scale = lr / c1
    for i in range(n):
        gv = gf[i]
        mf[i] = beta1 * mf[i] + (1.0 - beta1) * gv
        vf[i] = beta2 * vf[i] + (1.0 - beta2) * (gv * gv)
        pf[i] -= scale * mf[i] / (sqrt(vf[i] / c2) + eps)


def solve_assignment(cost):
    """Exact square linear assignment via shortest augmenting paths.

    Jonker-Volgenant style O(n^3) with dual potentials.
    Returns (col_for_row, total_cost).
    """
    cdef cnp.ndarray[cnp.float64_t, ndim=2] c = np.ascontiguousarray(cost, dtype=np.float64)
    cdef Py_ssize_t n = c.shape[0]
    if c.shape[1] != n:
        raise ValueError(f"cost matrix must be square, got {np.shape(cost)}")
    if not np.all(np.isfinite(c)):
        raise ValueError("cost matrix contains non-finite entries")

    cdef cnp.ndarray[cnp.float64_t, ndim=1] u = np.zeros(n + 1)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] v = np.zeros(n + 1)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] minv = np.empty(n + 1)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] p = np.full(n + 1, -1, dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] way = np.zeros(n + 1, dtype=np.int64)
    cdef cnp.ndarray[cnp.uint8_t, ndim=1] used = np.zeros(n + 1, dtype=np.uint8)
    cdef Py_ssize_t i, j, i0, j0, j1
    cdef double cur, delta, inf = np.inf

    for i in range(n):
        p[n] = i
        j0 = n
        for j in range(n + 1):
            minv[j] = inf
            used[j] = 0
        while True:
            used[j0] = 1
            i0 = p[j0]
            delta = inf
            j1 = -1
            for j in range(n):
                if not used[j]:
                    cur = c[i0, j] - u[i0] - v[j]
                    if cur < minv[j]:
                        minv[j] = cur
                        way[j] = j0
                    if minv[j] < delta:
                        delta = minv[j]
                        j1 = j
            for j in range(n + 1):
                if used[j]:
                    u[p[j]] += delta
                    v[j] -= delta
                else:
                    minv[j] -= delta
            j0 = j1
            if p[j0] < 0:
                break
        while j0 != n:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1

    cdef cnp.ndarray[cnp.int64_t, ndim=1] col_for_row = np.empty(n, dtype=np.int64)
    cdef double total = 0.0
    for j in range(n):
        col_for_row[p[j]] = j
    for i in range(n):
        total += c[i, col_for_row[i]]
    return col_for_row, total
