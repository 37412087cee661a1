"""Shared plumbing: derived random streams, worker resolution, segmented array ops."""

from __future__ import annotations

import hashlib
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

WORKERS_ENV = "DOMATIC_FORGE_WORKERS"


@dataclass(frozen=True)
class Stream:
    """A random stream keyed by (master seed, path), independent of execution order.

    The generator is keyed by a hash of the full path, so the stream drawn for
    (seed, i) is the same no matter which worker evaluates it or in what order.
    """

    seed_path: tuple
    gen: np.random.Generator = field(repr=False)


def substream(master_seed: int, *path) -> Stream:
    """Derive the counter-based stream for `path` (e.g. a trial or stage index)."""
    seed_path = (int(master_seed),) + tuple(path)
    payload = repr(("domatic-forge", seed_path)).encode()
    digest = hashlib.sha256(payload).digest()
    key = np.frombuffer(digest[:16], dtype=np.uint64).copy()
    return Stream(seed_path, np.random.Generator(np.random.Philox(key=key)))


def stream_label(stream: Stream) -> str:
    """Stable printable identity of a stream, used in CSV seed columns."""
    return ":".join(str(p) for p in stream.seed_path)


def resolve_workers(requested: int | None = None) -> int:
    """Worker count for trial evaluation; the environment variable caps it."""
    cap = os.environ.get(WORKERS_ENV)
    cap_n = max(1, int(cap)) if cap else None
    if requested is None:
        return cap_n or 1
    requested = max(1, int(requested))
    return min(requested, cap_n) if cap_n else requested


def parallel_map(fn, items, workers: int | None = None) -> list:
    """Map preserving order; results depend only on the items, never the schedule."""
    n = resolve_workers(workers)
    items = list(items)
    if n <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))


def _guarded_reduceat(ufunc, values: np.ndarray, indptr: np.ndarray, empty):
    """ufunc.reduceat with empty segments forced to `empty` (numpy quirk guard)."""
    n = len(indptr) - 1
    counts = np.diff(indptr)
    if len(values) == 0:
        return np.full(n, empty, dtype=values.dtype if values.size else None)
    starts = np.minimum(indptr[:-1], len(values) - 1)
    out = ufunc.reduceat(values, starts)
    out[counts == 0] = empty
    return out


def segment_or(values: np.ndarray, indptr: np.ndarray) -> np.ndarray:
    """Per-segment bitwise OR of a flat uint64 array split by indptr."""
    if len(values) == 0:
        return np.zeros(len(indptr) - 1, dtype=np.uint64)
    return _guarded_reduceat(np.bitwise_or, values, indptr, 0)


def segment_max(values: np.ndarray, indptr: np.ndarray, empty=0) -> np.ndarray:
    """Per-segment max of a flat array split by indptr; empty segments get `empty`."""
    if len(values) == 0:
        return np.full(len(indptr) - 1, empty, dtype=np.int64)
    return _guarded_reduceat(np.maximum, values, indptr, empty)


def popcounts(masks: np.ndarray) -> np.ndarray:
    """Bit counts of a uint64 array (portable across numpy versions)."""
    distinct, inverse = np.unique(masks, return_inverse=True)
    table = np.fromiter((int(m).bit_count() for m in distinct), dtype=np.int64,
                        count=len(distinct))
    return table[inverse]
