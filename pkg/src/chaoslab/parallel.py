"""Replication-level worker pool.

Work is split into chunks with boundaries that depend only on the task
size, never on the worker count, and each chunk's result is placed by
index. Chunk computations are pure functions of their replication range,
so any pool size (including 1) produces bit-identical aggregates.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

__all__ = ["map_chunked", "resolve_workers", "WORKERS_ENV_VAR"]

WORKERS_ENV_VAR = "CHAOSLAB_WORKERS"


def resolve_workers(cli_value=None, config_value=None) -> int:
    """Priority: CLI flag > environment override > config file > 1."""
    if cli_value is not None:
        return max(1, int(cli_value))
    env = os.environ.get(WORKERS_ENV_VAR)
    if env is not None:
        return max(1, int(env))
    if config_value is not None:
        return max(1, int(config_value))
    return 1


def map_chunked(fn, n_items: int, chunk_size: int, workers: int = 1) -> list:
    """Apply fn(start, stop) over fixed chunks; results ordered by chunk."""
    if n_items <= 0:
        return []
    chunk_size = max(1, int(chunk_size))
    starts = list(range(0, n_items, chunk_size))
    ranges = [(s, min(s + chunk_size, n_items)) for s in starts]
    if workers <= 1 or len(ranges) == 1:
        return [fn(a, b) for a, b in ranges]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda ab: fn(*ab), ranges))
