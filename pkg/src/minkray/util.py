"""Thread-count control and deterministic chunked parallelism."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

__all__ = ["set_num_threads", "get_num_threads", "run_chunks", "chunk_ranges"]

_num_threads = 0  # 0 = auto


def set_num_threads(k: int):
    """0 selects automatic (cpu count, capped at 8)."""
    global _num_threads
    _num_threads = max(0, int(k))


def get_num_threads() -> int:
    if _num_threads > 0:
        return _num_threads
    env = os.environ.get("MINKRAY_THREADS", "")
    if env.strip():
        try:
            k = int(env)
            if k > 0:
                return k
        except ValueError:
            pass
    return min(8, os.cpu_count() or 1)


def chunk_ranges(n: int, max_chunk: int) -> list[tuple[int, int]]:
    out = []
    lo = 0
    while lo < n:
        hi = min(n, lo + max_chunk)
        out.append((lo, hi))
        lo = hi
    return out


def run_chunks(fn, chunks):
    """
    Run fn(chunk) for every chunk.  Each call must write only to its own
    disjoint output slice, so the result is bit-identical for any thread
    count.  Returns nothing.
    """
    k = get_num_threads()
    if k <= 1 or len(chunks) <= 1:
        for c in chunks:
            fn(c)
        return
    with ThreadPoolExecutor(max_workers=k) as ex:
        list(ex.map(fn, chunks))
