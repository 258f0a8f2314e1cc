"""Kernel backend selection.

Imports the compiled extension when present, otherwise the NumPy
fallback.  ``CFM_LAB_PUREPY=1`` forces the fallback (used by the
benchmark and to debug backend discrepancies).
"""
from __future__ import annotations

import os

from ._kernels_py import ACT_SILU, ACT_SOFTPLUS, ACT_TANH

if os.environ.get("CFM_LAB_PUREPY", "") not in ("", "0"):
    from . import _kernels_py as _impl

    COMPILED = False
else:
    try:
        from . import _kernels as _impl  # type: ignore[attr-defined]

        COMPILED = True
    except ImportError:
        from . import _kernels_py as _impl

        COMPILED = False

act_forward = _impl.act_forward
act_backward = _impl.act_backward
adam_update = _impl.adam_update
solve_assignment = _impl.solve_assignment

__all__ = [
    "ACT_SILU",
    "ACT_TANH",
    "ACT_SOFTPLUS",
    "COMPILED",
    "act_forward",
    "act_backward",
    "adam_update",
    "solve_assignment",
]
