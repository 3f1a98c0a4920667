"""Deterministic parallel helpers.

Concurrency never changes results here: work is split into indexed chunks,
each chunk is reduced independently, and the cross-chunk reduction happens in
chunk order on the main thread. ``SOBOLEV_LAB_THREADS`` caps the pool size.
"""

import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np


def thread_count():
    """Worker count: SOBOLEV_LAB_THREADS if set, else min(cpu_count, 8)."""
    env = os.environ.get("SOBOLEV_LAB_THREADS")
    if env is not None:
        count = int(env)
        if count < 1:
            raise ValueError(f"SOBOLEV_LAB_THREADS must be >= 1, got {env}")
        return count
    return min(os.cpu_count() or 1, 8)


def run_indexed(fn, args_list):
    """Evaluate fn(*args) for each entry, preserving list order.

    Runs on a thread pool when more than one worker is available. Results are
    collected by index, so the output order never depends on scheduling.
    """
    items = list(args_list)
    workers = min(thread_count(), max(len(items), 1))
    if workers <= 1 or len(items) <= 1:
        return [fn(*args) for args in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(fn, *args) for args in items]
        return [f.result() for f in futures]


def pairwise_sum(values):
    """Sum a 1-d array by explicit pairwise halving.

    The reduction tree is a pure function of the array length, which makes the
    floating-point result bit-reproducible regardless of thread count or BLAS
    build. Cost is O(n) with vectorised adds.
    """
    acc = np.asarray(values, dtype=np.float64).ravel()
    if acc.size == 0:
        return 0.0
    carry = 0.0
    while acc.size > 1:
        if acc.size % 2 == 1:
            carry += float(acc[-1])
            acc = acc[:-1]
        acc = acc[0::2] + acc[1::2]
    return float(acc[0]) + carry


def pairwise_sum_axis(values, axis):
    """Pairwise reduction of an nd-array along one axis (same tree as above)."""
    acc = np.asarray(values, dtype=np.float64)
    acc = np.moveaxis(acc, axis, 0)
    carry = np.zeros(acc.shape[1:], dtype=np.float64)
    while acc.shape[0] > 1:
        if acc.shape[0] % 2 == 1:
            carry = carry + acc[-1]
            acc = acc[:-1]
        acc = acc[0::2] + acc[1::2]
    if acc.shape[0] == 0:
        return carry
    return acc[0] + carry


__all__ = ["thread_count", "run_indexed", "pairwise_sum", "pairwise_sum_axis"]
