"""Small shared runtime helpers."""

from __future__ import annotations

import os


def worker_count(requested=None) -> int:
    """Worker cap: explicit argument, then FIRMFACTS_THREADS, then CPU count."""
    if requested is not None and requested > 0:
        return int(requested)
    env = os.environ.get("FIRMFACTS_THREADS", "").strip()
    if env:
        try:
            n = int(env)
            if n > 0:
                return n
        except ValueError:
            pass
    return os.cpu_count() or 1
