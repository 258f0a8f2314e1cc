"""Small shared runtime helpers."""
from __future__ import annotations

import os


def worker_count() -> int:
    """Worker-parallelism cap from CFM_LAB_THREADS (0 or unset = auto)."""
    raw = os.environ.get("CFM_LAB_THREADS", "0").strip()
    try:
        n = int(raw) if raw else 0
    except ValueError as exc:
        raise ValueError(f"CFM_LAB_THREADS must be an integer, got {raw!r}") from exc
    if n < 0:
        raise ValueError(f"CFM_LAB_THREADS must be >= 0, got {n}")
    return n if n > 0 else (os.cpu_count() or 1)
