"""Seeding, ordered parallel map and atomic file output."""

from __future__ import annotations

import os
import random
import tempfile
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Iterable, Sequence

import numpy as np

_MASK64 = (1 << 64) - 1


def make_rng(*keys) -> random.Random:
    """Independent RNG stream for a tuple of non-negative integer keys.

    ``make_rng(seed, epoch, index)`` never collides with
    ``make_rng(seed, epoch + 1, index)`` the way ``Random(seed + epoch + index)`` would.
    """
    state = np.random.SeedSequence([int(k) & _MASK64 for k in keys]).generate_state(2, np.uint64)
    return random.Random((int(state[0]) << 64) | int(state[1]))


def as_rng(seed) -> random.Random:
    if isinstance(seed, random.Random):
        return seed
    if isinstance(seed, (tuple, list)):
        return make_rng(*seed)
    return make_rng(int(seed))


def ordered_map(func: Callable, items: Sequence, jobs: int = 1, chunksize: int = 64) -> list:
    """``list(map(func, items))``, optionally over `jobs` worker processes.

    Results come back in input order whatever the job count.
    """
    if jobs <= 1 or len(items) < 2 * chunksize:
        return [func(x) for x in items]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(func, items, chunksize=chunksize))


def atomic_write(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def batched(items: Iterable, n: int):
    batch = []
    for x in items:
        batch.append(x)
        if len(batch) == n:
            yield batch
            batch = []
    if batch:
        yield batch
